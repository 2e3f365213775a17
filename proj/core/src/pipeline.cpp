#include "urban2vec/pipeline.hpp"

#include "urban2vec/rng.hpp"

namespace urban2vec {

CorpusModel build_corpus(const UrbanDataset& dataset) {
  const auto bags = dataset.neighborhood_bags();
  CorpusModel corpus{Vocabulary::build(bags), {}};
  corpus.bags.reserve(bags.size());
  for (const auto& bag : bags) corpus.bags.push_back(corpus.vocab.encode(bag));
  return corpus;
}

StreetViewStageResult run_street_view_stage(const UrbanDataset& dataset, const TrainingConfig& config) {
  config.validate();
  auto encoder = init_encoder(dataset.features.values.cols(), config.encoder_hidden, config.dim,
                              stream_seed(config.seed, SeedStream::kEncoderInit));
  return train_street_view(std::move(encoder), dataset.features, dataset.build_view_index(), config);
}

Eigen::MatrixXd run_aggregation(const UrbanDataset& dataset, const Eigen::MatrixXd& view_embeddings,
                                EmptyNeighborhoodPolicy policy) {
  const auto assignment = dataset.view_assignment();
  return aggregate_neighborhoods(view_embeddings, assignment, dataset.neighborhoods.size(), policy);
}

PoiStageResult run_poi_stage(const CorpusModel& corpus, const Eigen::MatrixXd& initial_neighborhoods,
                             const TrainingConfig& config,
                             const std::map<TokenId, std::vector<double>>& pretrained) {
  return train_poi_stage(initial_neighborhoods, corpus.vocab, corpus.bags, config, pretrained);
}

Eigen::MatrixXd random_neighborhood_init(Eigen::Index rows, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 0.5 / static_cast<double>(dim);
  Eigen::MatrixXd out(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) out(r, c) = rng.uniform(-bound, bound);
  }
  return out;
}

PipelineOutput run_pipeline(const UrbanDataset& dataset, const TrainingConfig& config) {
  PipelineOutput out;
  out.street_view = run_street_view_stage(dataset, config);
  out.sve = run_aggregation(dataset, out.street_view.embeddings);
  out.corpus = build_corpus(dataset);
  out.poi = run_poi_stage(out.corpus, out.sve, config);
  return out;
}

}  // namespace urban2vec
