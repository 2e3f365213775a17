#include "urban2vec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "urban2vec/error.hpp"

namespace urban2vec {
namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool starts_with_reserved_prefix(std::string_view token) {
  return token.starts_with(kCategoryPrefix) || token.starts_with(kRatingPrefix) ||
         token.starts_with(kPricePrefix);
}

}  // namespace

void validate(const PoiRecord& poi) {
  if (!is_valid(poi.geo)) {
    fail(ErrorKind::kInvalidInput, "POI " + poi.id + ": coordinate out of range");
  }
  if (poi.rating && !(*poi.rating >= 1.0 && *poi.rating <= 5.0)) {
    fail(ErrorKind::kInvalidInput, "POI " + poi.id + ": rating outside [1, 5]");
  }
  if (poi.price && (*poi.price < 1 || *poi.price > 4)) {
    fail(ErrorKind::kInvalidInput, "POI " + poi.id + ": price tier outside [1, 4]");
  }
}

std::string category_token(std::string_view phrase) {
  std::string out(kCategoryPrefix);
  bool pending_gap = false;
  for (char c : phrase) {
    if (is_space(c)) {
      pending_gap = out.size() > kCategoryPrefix.size();
      continue;
    }
    if (pending_gap) out.push_back('_');
    pending_gap = false;
    out.push_back(lower(c));
  }
  return out;
}

std::string rating_token(double rating) {
  const double half_steps = std::clamp(std::round(rating * 2.0), 2.0, 10.0);
  const int whole = static_cast<int>(half_steps) / 2;
  const int half = static_cast<int>(half_steps) % 2;
  return std::string(kRatingPrefix) + std::to_string(whole) + (half ? "_5" : "_0");
}

std::string price_token(int tier) { return std::string(kPricePrefix) + std::to_string(tier); }

std::vector<std::string> tokenize_review(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    const bool numeric = std::all_of(current.begin(), current.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (current.size() >= 2 && !numeric) out.push_back(current);
    current.clear();
  };
  for (char c : text) {
    if (is_alnum(c)) current.push_back(lower(c));
    else flush();
  }
  flush();
  return out;
}

WordBag textualize_poi(const PoiRecord& poi) {
  WordBag bag;
  for (const auto& phrase : poi.categories) {
    std::string token = category_token(phrase);
    if (token.size() > kCategoryPrefix.size()) bag.tokens.push_back(std::move(token));
  }
  if (poi.rating) bag.tokens.push_back(rating_token(*poi.rating));
  if (poi.price) bag.tokens.push_back(price_token(*poi.price));

  std::unordered_set<std::string> seen;
  for (const auto& review : poi.reviews) {
    for (auto& word : tokenize_review(review)) {
      if (seen.insert(word).second) bag.tokens.push_back(std::move(word));
    }
  }
  return bag;
}

WordBag build_neighborhood_bag(std::span<const PoiRecord> pois) {
  WordBag merged;
  if (pois.empty()) return merged;
  const auto neighborhood = pois.front().neighborhood_id;
  for (const auto& poi : pois) {
    if (poi.neighborhood_id != neighborhood) {
      fail(ErrorKind::kValidation,
           "build_neighborhood_bag: POI " + poi.id + " belongs to a different neighborhood");
    }
    auto bag = textualize_poi(poi);
    merged.tokens.insert(merged.tokens.end(), std::make_move_iterator(bag.tokens.begin()),
                         std::make_move_iterator(bag.tokens.end()));
  }
  return merged;
}

Vocabulary Vocabulary::build(std::span<const WordBag> bags) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& bag : bags) {
    for (const auto& token : bag.tokens) ++counts[token];
  }
  require(!counts.empty(), ErrorKind::kInvalidInput, "build_vocabulary: all bags are empty");
  return from_counts({counts.begin(), counts.end()});
}

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts) {
  std::sort(counts.begin(), counts.end());
  Vocabulary vocab;
  vocab.tokens_.reserve(counts.size());
  vocab.frequencies_.reserve(counts.size());
  for (auto& [token, count] : counts) {
    require(count >= 1, ErrorKind::kInvalidInput, "vocabulary: zero frequency for " + token);
    if (!vocab.tokens_.empty() && vocab.tokens_.back() == token) {
      fail(ErrorKind::kDuplicateId, "vocabulary: duplicate token " + token);
    }
    vocab.tokens_.push_back(std::move(token));
    vocab.frequencies_.push_back(count);
    vocab.total_ += count;
  }
  return vocab;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return std::nullopt;
  return static_cast<TokenId>(it - tokens_.begin());
}

std::vector<TokenId> Vocabulary::encode(const WordBag& bag) const {
  std::vector<TokenId> ids;
  ids.reserve(bag.tokens.size());
  for (const auto& token : bag.tokens) {
    const auto id = find(token);
    if (!id) fail(ErrorKind::kNotFound, "token not in vocabulary: " + token);
    ids.push_back(*id);
  }
  return ids;
}

std::vector<TokenId> context_set(std::span<const TokenId> encoded_bag) {
  std::vector<TokenId> out(encoded_bag.begin(), encoded_bag.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NegativeSampler::NegativeSampler(const Vocabulary& vocab, double exponent)
    : exponent_(exponent) {
  require(std::isfinite(exponent), ErrorKind::kInvalidInput, "negative sampling exponent");
  weights_.reserve(vocab.size());
  cumulative_.reserve(vocab.size());
  double running = 0.0;
  for (auto f : vocab.frequencies()) {
    const double w = std::pow(static_cast<double>(f), exponent);
    weights_.push_back(w);
    running += w;
    cumulative_.push_back(running);
  }
}

TokenId NegativeSampler::sample(std::span<const TokenId> context, Rng& rng) const {
  require(context.size() < weights_.size(), ErrorKind::kInvalidInput,
          "negative sampling: context covers the whole vocabulary");
  double excluded = 0.0;
  for (TokenId id : context) excluded += weights_.at(id);
  const double total = cumulative_.back();

  auto in_context = [&](TokenId id) {
    return std::binary_search(context.begin(), context.end(), id);
  };

  if (total - excluded >= 0.05 * total) {
    for (;;) {
      const double target = rng.uniform() * total;
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
      if (it == cumulative_.end()) --it;
      const auto id = static_cast<TokenId>(it - cumulative_.begin());
      if (!in_context(id)) return id;
    }
  }

  std::vector<TokenId> allowed;
  std::vector<double> cumulative;
  allowed.reserve(weights_.size() - context.size());
  cumulative.reserve(weights_.size() - context.size());
  double running = 0.0;
  for (TokenId id = 0; id < weights_.size(); ++id) {
    if (in_context(id)) continue;
    running += weights_[id];
    allowed.push_back(id);
    cumulative.push_back(running);
  }
  const double target = rng.uniform() * running;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return allowed[static_cast<std::size_t>(it - cumulative.begin())];
}

double NegativeSampler::probability(TokenId token, std::span<const TokenId> context) const {
  if (std::binary_search(context.begin(), context.end(), token)) return 0.0;
  double excluded = 0.0;
  for (TokenId id : context) excluded += weights_.at(id);
  return weights_.at(token) / (cumulative_.back() - excluded);
}

TokenId negative_sample_word(const Vocabulary& vocab, std::span<const TokenId> context,
                             Rng& rng, double exponent) {
  return NegativeSampler(vocab, exponent).sample(context, rng);
}

std::map<TokenId, std::vector<double>> load_pretrained_vectors(const std::filesystem::path& path,
                                                               const Vocabulary& vocab,
                                                               std::size_t dim) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read pretrained vectors: " + path.string());
  std::map<TokenId, std::vector<double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string raw;
    while (fields >> raw) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(raw, &used));
        if (used != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                     ": not a number: " + raw);
      }
    }
    if (values.size() != dim) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(dim) + " values, got " +
                                   std::to_string(values.size()));
    }
    if (starts_with_reserved_prefix(token)) continue;
    if (const auto id = vocab.find(token)) out[*id] = std::move(values);
  }
  if (in.bad()) fail(ErrorKind::kIo, "error reading " + path.string());
  return out;
}

}  // namespace urban2vec
