#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "urban2vec/geo.hpp"
#include "urban2vec/rng.hpp"

namespace urban2vec {

using TokenId = std::uint32_t;

struct PoiRecord {
  std::string id;
  GeoPoint geo;
  std::optional<EntityId> neighborhood_id;  // absent until assigned
  std::vector<std::string> categories;
  std::optional<double> rating;  // [1.0, 5.0]
  std::optional<int> price;      // [1, 4]
  std::vector<std::string> reviews;

  friend bool operator==(const PoiRecord&, const PoiRecord&) = default;
};

// Throws kInvalidInput naming the POI when coordinates, rating or price are
// out of range.
void validate(const PoiRecord& poi);

// Multiset of token strings. Order is kept for reproducibility but carries no
// meaning; duplicates do.
struct WordBag {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

inline constexpr std::string_view kCategoryPrefix = "cat_";
inline constexpr std::string_view kRatingPrefix = "rate_";
inline constexpr std::string_view kPricePrefix = "price_";

// "Shopping  Center" -> "cat_shopping_center".
std::string category_token(std::string_view phrase);
// 4.3 -> "rate_4_5" (nearest half star, clamped to [1, 5]).
std::string rating_token(double rating);
std::string price_token(int tier);
// Lowercased alphanumeric runs of length >= 2 that are not pure digits.
std::vector<std::string> tokenize_review(std::string_view text);

// Category, rating and price tokens followed by review words deduplicated
// across all of the POI's reviews.
WordBag textualize_poi(const PoiRecord& poi);

// Multiset union of the POIs' bags. Throws kValidation when the POIs do not
// all carry the same neighborhood id.
WordBag build_neighborhood_bag(std::span<const PoiRecord> pois);

class Vocabulary {
 public:
  // Ids are assigned in lexicographic token order; frequencies count every
  // occurrence across all bags. Throws kInvalidInput if every bag is empty.
  static Vocabulary build(std::span<const WordBag> bags);

  // Rebuilds from an explicit (token, frequency) table, e.g. a checkpoint.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;
  std::uint64_t frequency(TokenId id) const { return frequencies_.at(id); }
  std::span<const std::uint64_t> frequencies() const { return frequencies_; }
  std::span<const std::string> tokens() const { return tokens_; }
  std::uint64_t total_count() const { return total_; }

  // Throws kNotFound for tokens outside the vocabulary.
  std::vector<TokenId> encode(const WordBag& bag) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> frequencies_;
  std::uint64_t total_ = 0;
};

// Sorted distinct ids of an encoded bag: the "context" a negative must avoid.
std::vector<TokenId> context_set(std::span<const TokenId> encoded_bag);

// Draws tokens outside a context set with probability proportional to
// frequency^exponent. Uses rejection against the global table when the
// context holds little mass, and an explicit complement table otherwise; both
// realize the same conditional law.
class NegativeSampler {
 public:
  NegativeSampler(const Vocabulary& vocab, double exponent = 0.5);

  // context must be sorted and distinct. Throws kInvalidInput when it covers
  // the whole vocabulary.
  TokenId sample(std::span<const TokenId> context, Rng& rng) const;

  // Analytic probability of drawing `token` given `context`.
  double probability(TokenId token, std::span<const TokenId> context) const;

  double exponent() const { return exponent_; }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  double exponent_;
};

TokenId negative_sample_word(const Vocabulary& vocab, std::span<const TokenId> context,
                             Rng& rng, double exponent = 0.5);

// Reads "token v1 ... vd" lines. Only vocabulary tokens without the cat_,
// rate_ or price_ prefix are returned. Any line whose vector length differs
// from dim is a kFormat error; an unreadable file is kIo.
std::map<TokenId, std::vector<double>> load_pretrained_vectors(const std::filesystem::path& path,
                                                               const Vocabulary& vocab,
                                                               std::size_t dim);

}  // namespace urban2vec
