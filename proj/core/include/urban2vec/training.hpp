#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urban2vec/corpus.hpp"
#include "urban2vec/encoder.hpp"
#include "urban2vec/geo.hpp"
#include "urban2vec/rng.hpp"

namespace urban2vec {

struct TrainingConfig {
  Eigen::Index dim = 200;
  std::size_t context_size = 5;  // K nearest street views
  double margin_sv = 0.2;
  double margin_poi = 0.2;
  double neg_exponent = 0.5;
  double lr_sv = 0.01;
  double lr_poi = 0.01;
  std::size_t epochs_sv = 10;
  std::size_t epochs_poi = 10;
  std::size_t triplets_per_anchor = 5;
  std::size_t batch_size = 64;
  Eigen::Index encoder_hidden = 128;  // 0 = linear encoder
  double z_anchor_weight = 0.0;       // optional pull of Z towards its stage-2 value
  std::uint64_t seed = 42;

  // Throws kValidation naming the offending field.
  void validate() const;
};

// Random streams derived from TrainingConfig::seed.
enum class SeedStream : std::uint64_t {
  kEncoderInit = 1,
  kStreetViewTriplets = 2,
  kWordInit = 3,
  kPoiTriplets = 4,
  kRandomNeighborhoods = 5,
  kHeldOutStreetView = 6,
  kHeldOutPoi = 7,
};

std::uint64_t stream_seed(std::uint64_t root, SeedStream stream);

struct Triplet {
  EntityId anchor;
  EntityId context;
  EntityId negative;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

inline constexpr double kDistanceFloor = 1e-8;

// max(0, margin + |a - c| - |a - n|) with Euclidean distances.
double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                    const Eigen::Ref<const Eigen::VectorXd>& context,
                    const Eigen::Ref<const Eigen::VectorXd>& negative, double margin);

struct TripletGrads {
  Eigen::VectorXd anchor;
  Eigen::VectorXd context;
  Eigen::VectorXd negative;
};

// Gradient of triplet_loss; all zero for inactive triplets. Distances below
// kDistanceFloor are floored in the denominators.
TripletGrads triplet_grads(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                           const Eigen::Ref<const Eigen::VectorXd>& context,
                           const Eigen::Ref<const Eigen::VectorXd>& negative, double margin);

// K-nearest street views per anchor, in `ids` order.
class ContextTable {
 public:
  ContextTable(const SpatialIndex& index, std::span<const EntityId> ids, std::size_t k);

  std::span<const EntityId> ids() const { return ids_; }
  std::span<const EntityId> context(std::size_t anchor_pos) const { return contexts_[anchor_pos]; }
  std::size_t k() const { return k_; }

 private:
  std::vector<EntityId> ids_;
  std::vector<std::vector<EntityId>> contexts_;
  std::size_t k_;
};

// per_anchor triplets per id: context uniform over the anchor's K nearest,
// negative uniform over everything except the anchor and its context.
std::vector<Triplet> sample_sv_triplets(const ContextTable& table, std::size_t per_anchor, Rng& rng);
std::vector<Triplet> sample_sv_triplets(const SpatialIndex& index, std::span<const EntityId> ids,
                                        std::size_t k, std::size_t per_anchor, Rng& rng);

struct FeatureMatrix {
  std::vector<EntityId> ids;  // row i of values belongs to ids[i]
  Eigen::MatrixXd values;
};

struct StreetViewStageResult {
  EncoderParams encoder;
  Eigen::MatrixXd embeddings;        // row-aligned with the feature ids
  std::vector<double> epoch_losses;  // mean active+inactive loss per epoch
};

// Mini-batch SGD on the street-view triplet loss through the encoder.
StreetViewStageResult train_street_view(EncoderParams encoder, const FeatureMatrix& features,
                                        const SpatialIndex& index, const TrainingConfig& config);

// Mean triplet loss of `triplets` under the given encoder (ids resolve
// through features).
double mean_street_view_loss(const EncoderParams& encoder, const FeatureMatrix& features,
                             std::span<const Triplet> triplets, double margin);

enum class EmptyNeighborhoodPolicy { kError, kZeroWithWarning };

// z_i = mean of the rows assigned to neighborhood i.
Eigen::MatrixXd aggregate_neighborhoods(
    const Eigen::MatrixXd& embeddings, std::span<const std::size_t> assignment,
    std::size_t neighborhood_count,
    EmptyNeighborhoodPolicy policy = EmptyNeighborhoodPolicy::kError);

// Anchors are neighborhood rows, context/negative are token ids.
std::vector<Triplet> sample_poi_triplets(std::span<const std::vector<TokenId>> bags,
                                         const NegativeSampler& sampler, std::size_t per_anchor,
                                         Rng& rng);

double mean_poi_loss(const Eigen::MatrixXd& neighborhoods, const Eigen::MatrixXd& words,
                     std::span<const Triplet> triplets, double margin);

Eigen::MatrixXd init_word_embeddings(const Vocabulary& vocab, Eigen::Index dim,
                                     const std::map<TokenId, std::vector<double>>& pretrained,
                                     std::uint64_t seed);

struct PoiStageResult {
  Eigen::MatrixXd neighborhoods;  // Z
  Eigen::MatrixXd words;          // Y
  std::vector<double> epoch_losses;
};

// Joint SGD on Z and Y with the neighborhood/POI-word triplet loss. bags[i]
// is the encoded word multiset of neighborhood i.
PoiStageResult train_poi_stage(const Eigen::MatrixXd& initial_neighborhoods,
                               const Vocabulary& vocab,
                               std::span<const std::vector<TokenId>> bags,
                               const TrainingConfig& config,
                               const std::map<TokenId, std::vector<double>>& pretrained = {});

}  // namespace urban2vec
