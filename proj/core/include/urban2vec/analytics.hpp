#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urban2vec/corpus.hpp"
#include "urban2vec/geo.hpp"

namespace urban2vec {

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // n_components x d, orthonormal rows
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_variance_ratio;

  Eigen::Index n_components() const { return components.rows(); }
  // Projects rows onto the first `keep` components (all when keep < 0).
  Eigen::MatrixXd transform(const Eigen::MatrixXd& data, Eigen::Index keep = -1) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const;
};

// Eigendecomposition of the sample covariance. Each component is signed so
// that its largest-magnitude entry is positive. Throws kInvalidInput when all
// rows are identical or the shape is unusable.
PcaModel pca_fit(const Eigen::MatrixXd& data, Eigen::Index n_components);

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

inline constexpr double kRidgeLambda = 1e-8;

// Least squares with an intercept via centered normal equations plus a
// Tikhonov term.
LinearModel linreg_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                       double ridge = kRidgeLambda);

// 1 - SS_res / SS_tot. Throws kValidation for a constant y_true.
double r_squared(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

struct RegressionProtocol {
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::size_t repeats = 20;
  // Candidate PCA component counts; empty means a geometric ladder up to the
  // largest usable count.
  std::vector<Eigen::Index> pca_components;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle-split for one repeat (seed + repeat).
Split make_split(std::size_t rows, const RegressionProtocol& protocol, std::size_t repeat);

struct TargetReport {
  std::string name;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;
  std::vector<double> test_r2;
  std::vector<Eigen::Index> chosen_components;
};

struct RegressionReport {
  std::vector<TargetReport> targets;
  RegressionProtocol protocol;
  std::size_t rows = 0;
  std::vector<Eigen::VectorXd> pca_means;  // one per repeat, for leakage audits

  double overall_mean_r2() const;
};

RegressionReport evaluate_regression(const Eigen::MatrixXd& embeddings,
                                     const Eigen::MatrixXd& targets,
                                     std::span<const std::string> target_names,
                                     const RegressionProtocol& protocol);

void write_report_csv(std::ostream& out, const RegressionReport& report);
void write_report_text(std::ostream& out, const RegressionReport& report);

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding, restarted n_init times from
// seeds derived from `seed`; the lowest-inertia run is returned.
KMeansResult kmeans(const Eigen::MatrixXd& data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300, std::size_t n_init = 10);

double adjusted_rand_index(std::span<const std::size_t> labels_a,
                           std::span<const std::size_t> labels_b);

struct Similarity {
  EntityId id;
  double cosine;

  friend bool operator==(const Similarity&, const Similarity&) = default;
};

// Candidates ranked by cosine similarity to the query, descending (or
// ascending with `least`), ties by ascending id. Zero-norm candidates are
// skipped with a warning; a zero-norm query is kInvalidInput.
std::vector<Similarity> cosine_rank(const Eigen::VectorXd& query, const Eigen::MatrixXd& candidates,
                                    std::span<const EntityId> ids, std::size_t top_n,
                                    bool least = false);

struct PoiStats {
  std::vector<TokenId> categories;  // column order
  Eigen::MatrixXd values;           // neighborhoods x categories
};

// tf = count / category tokens in the neighborhood; idf = ln(N / (1 + df)).
PoiStats poistats_tfidf(std::span<const std::vector<TokenId>> bags, const Vocabulary& vocab);

}  // namespace urban2vec
