#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "urban2vec/corpus.hpp"
#include "urban2vec/dataset.hpp"
#include "urban2vec/training.hpp"

namespace urban2vec {

// Vocabulary plus each neighborhood's encoded word multiset, in
// neighborhood order.
struct CorpusModel {
  Vocabulary vocab;
  std::vector<std::vector<TokenId>> bags;
};

CorpusModel build_corpus(const UrbanDataset& dataset);

// Stage 1: encoder init from the config seed, then triplet training.
StreetViewStageResult run_street_view_stage(const UrbanDataset& dataset, const TrainingConfig& config);

// Stage 2.
Eigen::MatrixXd run_aggregation(const UrbanDataset& dataset, const Eigen::MatrixXd& view_embeddings,
                                EmptyNeighborhoodPolicy policy = EmptyNeighborhoodPolicy::kError);

// Stage 3 on top of any neighborhood initialization.
PoiStageResult run_poi_stage(const CorpusModel& corpus, const Eigen::MatrixXd& initial_neighborhoods,
                             const TrainingConfig& config,
                             const std::map<TokenId, std::vector<double>>& pretrained = {});

// Uniform(-0.5/d, 0.5/d) rows; the POI-only variant starts from these.
Eigen::MatrixXd random_neighborhood_init(Eigen::Index rows, Eigen::Index dim, std::uint64_t seed);

struct PipelineOutput {
  StreetViewStageResult street_view;
  Eigen::MatrixXd sve;  // stage-2 neighborhoods
  PoiStageResult poi;   // final Z and Y
  CorpusModel corpus;
};

PipelineOutput run_pipeline(const UrbanDataset& dataset, const TrainingConfig& config);

}  // namespace urban2vec
