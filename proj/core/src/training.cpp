#include "urban2vec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "urban2vec/error.hpp"
#include "urban2vec/log.hpp"

namespace urban2vec {
namespace {

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) {
  if (!v.allFinite()) fail(ErrorKind::kInvalidInput, std::string(what) + ": non-finite input");
}

void check_triplet(const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& c,
                   const Eigen::Ref<const Eigen::VectorXd>& n, double margin) {
  require(a.size() == c.size() && a.size() == n.size(), ErrorKind::kInvalidInput,
          "triplet: vector length mismatch");
  require(std::isfinite(margin) && margin >= 0.0, ErrorKind::kInvalidInput,
          "triplet: margin must be finite and >= 0");
  require_finite(a, "triplet anchor");
  require_finite(c, "triplet context");
  require_finite(n, "triplet negative");
}

std::unordered_map<EntityId, Eigen::Index> row_lookup(std::span<const EntityId> ids) {
  std::unordered_map<EntityId, Eigen::Index> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!rows.emplace(ids[i], static_cast<Eigen::Index>(i)).second) {
      fail(ErrorKind::kDuplicateId, "duplicate street-view id " + std::to_string(ids[i]));
    }
  }
  return rows;
}

}  // namespace

void TrainingConfig::validate() const {
  auto check = [](bool ok, const char* field) {
    if (!ok) fail(ErrorKind::kValidation, std::string("invalid config field: ") + field);
  };
  check(dim >= 1, "d");
  check(context_size >= 1, "K");
  check(std::isfinite(margin_sv) && margin_sv >= 0.0, "margin_sv");
  check(std::isfinite(margin_poi) && margin_poi >= 0.0, "margin_poi");
  check(std::isfinite(neg_exponent), "neg_exponent");
  check(std::isfinite(lr_sv) && lr_sv > 0.0, "lr_sv");
  check(std::isfinite(lr_poi) && lr_poi > 0.0, "lr_poi");
  check(triplets_per_anchor >= 1, "triplets_per_anchor");
  check(batch_size >= 1, "batch_size");
  check(encoder_hidden >= 0, "encoder_hidden");
  check(std::isfinite(z_anchor_weight) && z_anchor_weight >= 0.0, "z_anchor_weight");
}

std::uint64_t stream_seed(std::uint64_t root, SeedStream stream) {
  return Rng::derive_seed(root, static_cast<std::uint64_t>(stream));
}

double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                    const Eigen::Ref<const Eigen::VectorXd>& context,
                    const Eigen::Ref<const Eigen::VectorXd>& negative, double margin) {
  check_triplet(anchor, context, negative, margin);
  const double value = margin + (anchor - context).norm() - (anchor - negative).norm();
  return std::max(0.0, value);
}

TripletGrads triplet_grads(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                           const Eigen::Ref<const Eigen::VectorXd>& context,
                           const Eigen::Ref<const Eigen::VectorXd>& negative, double margin) {
  check_triplet(anchor, context, negative, margin);
  const Eigen::VectorXd to_context = anchor - context;
  const Eigen::VectorXd to_negative = anchor - negative;
  const double dc = to_context.norm();
  const double dn = to_negative.norm();
  const Eigen::Index d = anchor.size();
  if (margin + dc - dn <= 0.0) {
    return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  }
  const Eigen::VectorXd unit_c = to_context / std::max(dc, kDistanceFloor);
  const Eigen::VectorXd unit_n = to_negative / std::max(dn, kDistanceFloor);
  return {unit_c - unit_n, -unit_c, unit_n};
}

ContextTable::ContextTable(const SpatialIndex& index, std::span<const EntityId> ids, std::size_t k)
    : ids_(ids.begin(), ids.end()), k_(k) {
  require(k >= 1, ErrorKind::kInvalidInput, "context size must be >= 1");
  if (ids_.size() < k + 2) {
    fail(ErrorKind::kInvalidInput, "triplet sampling needs at least K+2 street views (have " +
                                       std::to_string(ids_.size()) + ", K=" + std::to_string(k) +
                                       ")");
  }
  contexts_.reserve(ids_.size());
  for (EntityId id : ids_) contexts_.push_back(index.k_nearest(id, k));
}

std::vector<Triplet> sample_sv_triplets(const ContextTable& table, std::size_t per_anchor,
                                        Rng& rng) {
  const auto ids = table.ids();
  std::vector<Triplet> out;
  out.reserve(ids.size() * per_anchor);
  for (std::size_t a = 0; a < ids.size(); ++a) {
    const auto context = table.context(a);
    for (std::size_t t = 0; t < per_anchor; ++t) {
      const EntityId positive = context[rng.index(context.size())];
      EntityId negative;
      do {
        negative = ids[rng.index(ids.size())];
      } while (negative == ids[a] ||
               std::find(context.begin(), context.end(), negative) != context.end());
      out.push_back({ids[a], positive, negative});
    }
  }
  return out;
}

std::vector<Triplet> sample_sv_triplets(const SpatialIndex& index, std::span<const EntityId> ids,
                                        std::size_t k, std::size_t per_anchor, Rng& rng) {
  return sample_sv_triplets(ContextTable(index, ids, k), per_anchor, rng);
}

StreetViewStageResult train_street_view(EncoderParams encoder, const FeatureMatrix& features,
                                        const SpatialIndex& index, const TrainingConfig& config) {
  config.validate();
  require(static_cast<std::size_t>(features.values.rows()) == features.ids.size(),
          ErrorKind::kInvalidInput, "train_street_view: feature ids/rows mismatch");
  require(features.values.cols() == encoder.input_dim(), ErrorKind::kInvalidInput,
          "train_street_view: feature width does not match encoder input");
  require(encoder.output_dim() == config.dim, ErrorKind::kInvalidInput,
          "train_street_view: encoder output width does not match d");
  const auto rows = row_lookup(features.ids);
  for (EntityId id : features.ids) {
    require(index.contains(id), ErrorKind::kNotFound,
            "train_street_view: street view " + std::to_string(id) + " missing from index");
  }

  StreetViewStageResult result;
  if (config.epochs_sv > 0) {
    const ContextTable table(index, features.ids, config.context_size);
    Rng rng(stream_seed(config.seed, SeedStream::kStreetViewTriplets));
    auto grads = EncoderGradients::zeros_like(encoder);

    for (std::size_t epoch = 0; epoch < config.epochs_sv; ++epoch) {
      auto triplets = sample_sv_triplets(table, config.triplets_per_anchor, rng);
      rng.shuffle(triplets.begin(), triplets.end());
      double loss_sum = 0.0;
      for (std::size_t begin = 0; begin < triplets.size(); begin += config.batch_size) {
        const std::size_t end = std::min(triplets.size(), begin + config.batch_size);
        grads.set_zero();
        for (std::size_t t = begin; t < end; ++t) {
          const auto fa = features.values.row(rows.at(triplets[t].anchor)).transpose();
          const auto fc = features.values.row(rows.at(triplets[t].context)).transpose();
          const auto fn = features.values.row(rows.at(triplets[t].negative)).transpose();
          const Eigen::VectorXd xa = encode(encoder, fa);
          const Eigen::VectorXd xc = encode(encoder, fc);
          const Eigen::VectorXd xn = encode(encoder, fn);
          const double loss = triplet_loss(xa, xc, xn, config.margin_sv);
          loss_sum += loss;
          if (loss <= 0.0) continue;
          const auto g = triplet_grads(xa, xc, xn, config.margin_sv);
          accumulate_backward(encoder, fa, g.anchor, grads);
          accumulate_backward(encoder, fc, g.context, grads);
          accumulate_backward(encoder, fn, g.negative, grads);
        }
        apply_gradient(encoder, grads, config.lr_sv / static_cast<double>(end - begin));
      }
      result.epoch_losses.push_back(loss_sum / static_cast<double>(triplets.size()));
      if (!encoder.all_finite()) {
        fail(ErrorKind::kValidation, "street-view training diverged (non-finite parameters)");
      }
    }
  }
  result.embeddings = encode_rows(encoder, features.values);
  result.encoder = std::move(encoder);
  return result;
}

double mean_street_view_loss(const EncoderParams& encoder, const FeatureMatrix& features,
                             std::span<const Triplet> triplets, double margin) {
  require(!triplets.empty(), ErrorKind::kInvalidInput, "mean_street_view_loss: no triplets");
  const auto rows = row_lookup(features.ids);
  double sum = 0.0;
  for (const auto& t : triplets) {
    sum += triplet_loss(encode(encoder, features.values.row(rows.at(t.anchor)).transpose()),
                        encode(encoder, features.values.row(rows.at(t.context)).transpose()),
                        encode(encoder, features.values.row(rows.at(t.negative)).transpose()),
                        margin);
  }
  return sum / static_cast<double>(triplets.size());
}

Eigen::MatrixXd aggregate_neighborhoods(const Eigen::MatrixXd& embeddings,
                                        std::span<const std::size_t> assignment,
                                        std::size_t neighborhood_count,
                                        EmptyNeighborhoodPolicy policy) {
  require(static_cast<std::size_t>(embeddings.rows()) == assignment.size(),
          ErrorKind::kInvalidInput, "aggregate_neighborhoods: assignment length mismatch");
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(neighborhood_count),
                                               embeddings.cols());
  std::vector<std::size_t> counts(neighborhood_count, 0);
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    require(assignment[r] < neighborhood_count, ErrorKind::kInvalidInput,
            "aggregate_neighborhoods: neighborhood index out of range");
    sums.row(static_cast<Eigen::Index>(assignment[r])) += embeddings.row(static_cast<Eigen::Index>(r));
    ++counts[assignment[r]];
  }
  for (std::size_t i = 0; i < neighborhood_count; ++i) {
    if (counts[i] == 0) {
      if (policy == EmptyNeighborhoodPolicy::kError) {
        fail(ErrorKind::kValidation,
             "neighborhood row " + std::to_string(i) + " has no street views");
      }
      log_warning("neighborhood row " + std::to_string(i) + " has no street views; using zero vector");
      continue;
    }
    sums.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(counts[i]);
  }
  return sums;
}

std::vector<Triplet> sample_poi_triplets(std::span<const std::vector<TokenId>> bags,
                                         const NegativeSampler& sampler, std::size_t per_anchor,
                                         Rng& rng) {
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (bags[i].empty()) continue;
    const auto context = context_set(bags[i]);
    for (std::size_t t = 0; t < per_anchor; ++t) {
      const TokenId positive = bags[i][rng.index(bags[i].size())];
      const TokenId negative = sampler.sample(context, rng);
      out.push_back({static_cast<EntityId>(i), positive, negative});
    }
  }
  return out;
}

double mean_poi_loss(const Eigen::MatrixXd& neighborhoods, const Eigen::MatrixXd& words,
                     std::span<const Triplet> triplets, double margin) {
  require(!triplets.empty(), ErrorKind::kInvalidInput, "mean_poi_loss: no triplets");
  double sum = 0.0;
  for (const auto& t : triplets) {
    sum += triplet_loss(neighborhoods.row(t.anchor).transpose(), words.row(t.context).transpose(),
                        words.row(t.negative).transpose(), margin);
  }
  return sum / static_cast<double>(triplets.size());
}

Eigen::MatrixXd init_word_embeddings(const Vocabulary& vocab, Eigen::Index dim,
                                     const std::map<TokenId, std::vector<double>>& pretrained,
                                     std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 0.5 / static_cast<double>(dim);
  Eigen::MatrixXd words(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index r = 0; r < words.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) words(r, c) = rng.uniform(-bound, bound);
  }
  for (const auto& [token, vec] : pretrained) {
    require(token < vocab.size(), ErrorKind::kInvalidInput, "pretrained token id out of range");
    require(static_cast<Eigen::Index>(vec.size()) == dim, ErrorKind::kFormat,
            "pretrained vector for " + vocab.token(token) + " has wrong length");
    words.row(token) = Eigen::Map<const Eigen::RowVectorXd>(vec.data(), dim);
  }
  return words;
}

PoiStageResult train_poi_stage(const Eigen::MatrixXd& initial_neighborhoods,
                               const Vocabulary& vocab,
                               std::span<const std::vector<TokenId>> bags,
                               const TrainingConfig& config,
                               const std::map<TokenId, std::vector<double>>& pretrained) {
  config.validate();
  require(static_cast<std::size_t>(initial_neighborhoods.rows()) == bags.size(),
          ErrorKind::kInvalidInput, "train_poi_stage: Z rows != number of bags");
  require(initial_neighborhoods.cols() == config.dim, ErrorKind::kInvalidInput,
          "train_poi_stage: Z width != d");
  require(initial_neighborhoods.allFinite(), ErrorKind::kInvalidInput,
          "train_poi_stage: non-finite Z");
  const bool any_words = std::any_of(bags.begin(), bags.end(), [](const auto& b) { return !b.empty(); });
  require(any_words, ErrorKind::kInvalidInput, "train_poi_stage: every bag is empty");

  PoiStageResult result;
  result.neighborhoods = initial_neighborhoods;
  result.words = init_word_embeddings(vocab, config.dim, pretrained,
                                      stream_seed(config.seed, SeedStream::kWordInit));
  if (config.epochs_poi == 0) return result;

  std::vector<std::vector<TokenId>> contexts(bags.size());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    for (TokenId t : bags[i]) {
      require(t < vocab.size(), ErrorKind::kInvalidInput, "bag token id out of range");
    }
    if (bags[i].empty()) {
      log_info("neighborhood row " + std::to_string(i) + " has no POI words; skipped");
      continue;
    }
    contexts[i] = context_set(bags[i]);
  }

  const NegativeSampler sampler(vocab, config.neg_exponent);
  Rng rng(stream_seed(config.seed, SeedStream::kPoiTriplets));
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), 0);
  auto& z = result.neighborhoods;
  auto& y = result.words;

  for (std::size_t epoch = 0; epoch < config.epochs_poi; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : order) {
      if (bags[i].empty()) continue;
      const auto row = static_cast<Eigen::Index>(i);
      for (std::size_t t = 0; t < config.triplets_per_anchor; ++t) {
        const TokenId positive = bags[i][rng.index(bags[i].size())];
        const TokenId negative = sampler.sample(contexts[i], rng);
        const Eigen::VectorXd za = z.row(row).transpose();
        const Eigen::VectorXd yc = y.row(positive).transpose();
        const Eigen::VectorXd yn = y.row(negative).transpose();
        const double loss = triplet_loss(za, yc, yn, config.margin_poi);
        loss_sum += loss;
        ++count;
        if (config.z_anchor_weight > 0.0) {
          z.row(row) -= config.lr_poi * config.z_anchor_weight *
                        (z.row(row) - initial_neighborhoods.row(row));
        }
        if (loss <= 0.0) continue;
        const auto g = triplet_grads(za, yc, yn, config.margin_poi);
        z.row(row) -= config.lr_poi * g.anchor.transpose();
        y.row(positive) -= config.lr_poi * g.context.transpose();
        y.row(negative) -= config.lr_poi * g.negative.transpose();
      }
    }
    result.epoch_losses.push_back(count ? loss_sum / static_cast<double>(count) : 0.0);
  }
  return result;
}

}  // namespace urban2vec
