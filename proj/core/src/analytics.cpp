#include "urban2vec/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "urban2vec/error.hpp"
#include "urban2vec/log.hpp"
#include "urban2vec/rng.hpp"

namespace urban2vec {
namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<Eigen::Index> component_ladder(Eigen::Index max_components) {
  std::vector<Eigen::Index> ladder;
  for (Eigen::Index c = 1; c < max_components; c = std::max(c + 1, c * 3 / 2)) ladder.push_back(c);
  ladder.push_back(max_components);
  return ladder;
}

double squared_distance(const Eigen::MatrixXd& data, Eigen::Index row, const Eigen::MatrixXd& centroids,
                        Eigen::Index c) {
  return (data.row(row) - centroids.row(c)).squaredNorm();
}

}  // namespace

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& data, Eigen::Index keep) const {
  require(data.cols() == mean.size(), ErrorKind::kInvalidInput, "pca transform: width mismatch");
  if (keep < 0 || keep > n_components()) keep = n_components();
  return (data.rowwise() - mean.transpose()) * components.topRows(keep).transpose();
}

Eigen::MatrixXd PcaModel::inverse_transform(const Eigen::MatrixXd& scores) const {
  require(scores.cols() <= n_components(), ErrorKind::kInvalidInput,
          "pca inverse_transform: too many columns");
  Eigen::MatrixXd out = scores * components.topRows(scores.cols());
  out.rowwise() += mean.transpose();
  return out;
}

PcaModel pca_fit(const Eigen::MatrixXd& data, Eigen::Index n_components) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  require(n >= 2, ErrorKind::kInvalidInput, "pca_fit: need at least 2 rows");
  require(n_components >= 1 && n_components <= std::min(n, d), ErrorKind::kInvalidInput,
          "pca_fit: n_components must be in [1, min(N, d)]");
  require(data.allFinite(), ErrorKind::kInvalidInput, "pca_fit: non-finite input");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd covariance =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double total = covariance.trace();
  require(total > 0.0, ErrorKind::kInvalidInput, "pca_fit: degenerate input (all rows identical)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  require(solver.info() == Eigen::Success, ErrorKind::kInvalidInput, "pca_fit: eigensolver failed");
  // Eigen returns ascending eigenvalues.
  model.components.resize(n_components, d);
  model.explained_variance.resize(n_components);
  for (Eigen::Index i = 0; i < n_components; ++i) {
    const Eigen::Index src = d - 1 - i;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v(argmax) < 0.0) v = -v;
    model.components.row(i) = v.transpose();
    model.explained_variance(i) = std::max(0.0, solver.eigenvalues()(src));
  }
  model.explained_variance_ratio = model.explained_variance / total;
  return model;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& features) const {
  require(features.cols() == weights.size(), ErrorKind::kInvalidInput,
          "linreg_predict: width mismatch");
  return (features * weights).array() + intercept;
}

LinearModel linreg_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                       double ridge) {
  require(features.rows() == targets.size(), ErrorKind::kInvalidInput,
          "linreg_fit: row count mismatch");
  require(features.rows() >= 1, ErrorKind::kInvalidInput, "linreg_fit: no rows");
  require(features.allFinite() && targets.allFinite(), ErrorKind::kInvalidInput,
          "linreg_fit: non-finite input");
  const Eigen::RowVectorXd x_mean = features.colwise().mean();
  const double y_mean = targets.mean();
  const Eigen::MatrixXd xc = features.rowwise() - x_mean;
  const Eigen::VectorXd yc = targets.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += ridge;
  LinearModel model;
  model.weights = gram.ldlt().solve(xc.transpose() * yc);
  model.intercept = y_mean - x_mean.dot(model.weights);
  return model;
}

double r_squared(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  require(y_true.size() == y_pred.size(), ErrorKind::kInvalidInput, "r_squared: length mismatch");
  require(y_true.size() >= 2, ErrorKind::kInvalidInput, "r_squared: need at least 2 values");
  const double mean = y_true.mean();
  const double ss_tot = (y_true.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) fail(ErrorKind::kValidation, "r_squared: undefined for constant y_true");
  const double ss_res = (y_true - y_pred).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

Split make_split(std::size_t rows, const RegressionProtocol& protocol, std::size_t repeat) {
  const auto n_train = static_cast<std::size_t>(std::floor(protocol.train_fraction * static_cast<double>(rows)));
  const auto n_val = static_cast<std::size_t>(std::floor(protocol.val_fraction * static_cast<double>(rows)));
  if (n_train < 3 || n_val < 2 || n_train + n_val + 2 > rows) {
    fail(ErrorKind::kValidation,
         "evaluate_regression: too few rows (" + std::to_string(rows) + ") for the split");
  }
  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(protocol.seed + repeat);
  rng.shuffle(perm.begin(), perm.end());
  Split split;
  split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                   perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return split;
}

double RegressionReport::overall_mean_r2() const {
  if (targets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : targets) sum += t.mean_r2;
  return sum / static_cast<double>(targets.size());
}

RegressionReport evaluate_regression(const Eigen::MatrixXd& embeddings,
                                     const Eigen::MatrixXd& targets,
                                     std::span<const std::string> target_names,
                                     const RegressionProtocol& protocol) {
  require(embeddings.rows() == targets.rows(), ErrorKind::kInvalidInput,
          "evaluate_regression: embedding and target row counts differ");
  require(static_cast<std::size_t>(targets.cols()) == target_names.size(), ErrorKind::kInvalidInput,
          "evaluate_regression: target names do not match target columns");
  require(protocol.repeats >= 1, ErrorKind::kInvalidInput, "evaluate_regression: repeats must be >= 1");
  require(embeddings.allFinite() && targets.allFinite(), ErrorKind::kInvalidInput,
          "evaluate_regression: non-finite input");

  const auto rows = static_cast<std::size_t>(embeddings.rows());
  RegressionReport report;
  report.protocol = protocol;
  report.rows = rows;
  report.targets.resize(target_names.size());
  for (std::size_t t = 0; t < target_names.size(); ++t) report.targets[t].name = target_names[t];

  for (std::size_t repeat = 0; repeat < protocol.repeats; ++repeat) {
    const Split split = make_split(rows, protocol, repeat);
    const Eigen::MatrixXd train_x = take_rows(embeddings, split.train);
    const Eigen::MatrixXd val_x = take_rows(embeddings, split.val);
    const Eigen::MatrixXd test_x = take_rows(embeddings, split.test);

    // Keep the regression over-determined: p <= n_train - 2.
    const Eigen::Index max_components =
        std::min<Eigen::Index>(embeddings.cols(), static_cast<Eigen::Index>(split.train.size()) - 2);
    const PcaModel pca = pca_fit(train_x, max_components);
    report.pca_means.push_back(pca.mean);
    const Eigen::MatrixXd train_scores = pca.transform(train_x);
    const Eigen::MatrixXd val_scores = pca.transform(val_x);
    const Eigen::MatrixXd test_scores = pca.transform(test_x);

    std::vector<Eigen::Index> candidates;
    for (auto c : protocol.pca_components) {
      if (c >= 1 && c <= max_components) candidates.push_back(c);
    }
    if (candidates.empty()) candidates = component_ladder(max_components);

    for (std::size_t t = 0; t < target_names.size(); ++t) {
      const Eigen::VectorXd y = targets.col(static_cast<Eigen::Index>(t));
      const Eigen::VectorXd train_y = take(y, split.train);
      const Eigen::VectorXd val_y = take(y, split.val);
      const Eigen::VectorXd test_y = take(y, split.test);

      Eigen::Index best_c = candidates.back();
      double best_val = -std::numeric_limits<double>::infinity();
      const double val_spread = (val_y.array() - val_y.mean()).square().sum();
      if (val_spread > 0.0) {
        for (auto c : candidates) {
          const auto model = linreg_fit(train_scores.leftCols(c), train_y);
          const double score = r_squared(val_y, model.predict(val_scores.leftCols(c)));
          if (score > best_val) {
            best_val = score;
            best_c = c;
          }
        }
      }
      const auto model = linreg_fit(train_scores.leftCols(best_c), train_y);
      const double test_r2 = r_squared(test_y, model.predict(test_scores.leftCols(best_c)));
      report.targets[t].test_r2.push_back(test_r2);
      report.targets[t].chosen_components.push_back(best_c);
    }
  }

  for (auto& target : report.targets) {
    const auto n = static_cast<double>(target.test_r2.size());
    target.mean_r2 = std::accumulate(target.test_r2.begin(), target.test_r2.end(), 0.0) / n;
    double var = 0.0;
    for (double v : target.test_r2) var += (v - target.mean_r2) * (v - target.mean_r2);
    target.std_r2 = target.test_r2.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  }
  return report;
}

void write_report_csv(std::ostream& out, const RegressionReport& report) {
  out << "target,mean_r2,std_r2,repeats\n";
  out << std::setprecision(10);
  for (const auto& t : report.targets) {
    out << t.name << ',' << t.mean_r2 << ',' << t.std_r2 << ',' << t.test_r2.size() << '\n';
  }
}

void write_report_text(std::ostream& out, const RegressionReport& report) {
  out << "PCA+LR regression over " << report.protocol.repeats << " split(s) of " << report.rows
      << " neighborhoods (train " << report.protocol.train_fraction << ", val "
      << report.protocol.val_fraction << ", seed " << report.protocol.seed << ")\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& t : report.targets) {
    out << "  " << std::left << std::setw(24) << t.name << " R2 = " << t.mean_r2 << " +/- "
        << t.std_r2 << '\n';
  }
  out << "  overall mean R2 = " << report.overall_mean_r2() << '\n';
  out.unsetf(std::ios::fixed);
}

namespace {

KMeansResult kmeans_once(const Eigen::MatrixXd& data, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(data.rows());
  Rng rng(seed);
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), data.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  centroids.row(0) = data.row(static_cast<Eigen::Index>(first));
  chosen[first] = true;
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(data, static_cast<Eigen::Index>(i), centroids,
                                                         static_cast<Eigen::Index>(c - 1)));
      if (!chosen[i]) total += nearest[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || nearest[i] <= 0.0) continue;
        pick = i;
        target -= nearest[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      // Remaining points all coincide with chosen centers.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng.index(free.size())];
    }
    chosen[pick] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(pick));
  }

  KMeansResult result;
  result.assignments.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(data, static_cast<Eigen::Index>(i), centroids, 0);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(data, static_cast<Eigen::Index>(i), centroids,
                                          static_cast<Eigen::Index>(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (iter == 0 || best != result.assignments[i]) changed = true;
      result.assignments[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }

    // An empty cluster takes the point farthest from its centroid among
    // clusters that can spare one.
    std::vector<std::size_t> counts(k, 0);
    for (auto a : result.assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[result.assignments[i]] <= 1) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      inertia -= dist[far];
      --counts[result.assignments[far]];
      result.assignments[far] = c;
      ++counts[c];
      dist[far] = 0.0;
      centroids.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(far));
      changed = true;
    }

    result.inertia_history.push_back(inertia);
    result.inertia = inertia;
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centroids.rows(), centroids.cols());
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(result.assignments[i])) += data.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t c = 0; c < k; ++c) {
      centroids.row(static_cast<Eigen::Index>(c)) =
          sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter, std::size_t n_init) {
  const auto n = static_cast<std::size_t>(data.rows());
  require(k >= 1, ErrorKind::kInvalidInput, "kmeans: k must be >= 1");
  if (k > n) {
    fail(ErrorKind::kInvalidInput,
         "kmeans: k (" + std::to_string(k) + ") exceeds row count (" + std::to_string(n) + ")");
  }
  require(n_init >= 1, ErrorKind::kInvalidInput, "kmeans: n_init must be >= 1");
  require(data.allFinite(), ErrorKind::kInvalidInput, "kmeans: non-finite input");

  KMeansResult best;
  for (std::size_t r = 0; r < n_init; ++r) {
    auto run = kmeans_once(data, k, Rng::derive_seed(seed, r), max_iter);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

double adjusted_rand_index(std::span<const std::size_t> labels_a,
                           std::span<const std::size_t> labels_b) {
  require(labels_a.size() == labels_b.size(), ErrorKind::kInvalidInput,
          "adjusted_rand_index: length mismatch");
  const auto n = static_cast<double>(labels_a.size());
  require(labels_a.size() >= 2, ErrorKind::kInvalidInput, "adjusted_rand_index: need >= 2 labels");
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    table[{labels_a[i], labels_b[i]}] += 1.0;
    rows[labels_a[i]] += 1.0;
    cols[labels_b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, v] : table) index += pairs(v);
  double sum_rows = 0.0;
  for (const auto& [key, v] : rows) sum_rows += pairs(v);
  double sum_cols = 0.0;
  for (const auto& [key, v] : cols) sum_cols += pairs(v);
  const double expected = sum_rows * sum_cols / pairs(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<Similarity> cosine_rank(const Eigen::VectorXd& query, const Eigen::MatrixXd& candidates,
                                    std::span<const EntityId> ids, std::size_t top_n, bool least) {
  require(candidates.rows() == static_cast<Eigen::Index>(ids.size()), ErrorKind::kInvalidInput,
          "cosine_rank: ids do not match candidate rows");
  require(candidates.cols() == query.size(), ErrorKind::kInvalidInput,
          "cosine_rank: dimension mismatch");
  const double query_norm = query.norm();
  require(query_norm > 0.0 && std::isfinite(query_norm), ErrorKind::kInvalidInput,
          "cosine_rank: zero-norm query");

  std::vector<Similarity> ranked;
  ranked.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = candidates.row(static_cast<Eigen::Index>(i));
    const double norm = row.norm();
    if (!(norm > 0.0)) {
      log_warning("cosine_rank: skipping zero-norm candidate " + std::to_string(ids[i]));
      continue;
    }
    const double cosine = std::clamp(row.dot(query) / (norm * query_norm), -1.0, 1.0);
    ranked.push_back({ids[i], cosine});
  }
  std::sort(ranked.begin(), ranked.end(), [least](const Similarity& a, const Similarity& b) {
    if (a.cosine != b.cosine) return least ? a.cosine < b.cosine : a.cosine > b.cosine;
    return a.id < b.id;
  });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

PoiStats poistats_tfidf(std::span<const std::vector<TokenId>> bags, const Vocabulary& vocab) {
  PoiStats stats;
  std::vector<Eigen::Index> column(vocab.size(), -1);
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (vocab.token(id).starts_with(kCategoryPrefix)) {
      column[id] = static_cast<Eigen::Index>(stats.categories.size());
      stats.categories.push_back(id);
    }
  }
  const auto n = static_cast<Eigen::Index>(bags.size());
  const auto m = static_cast<Eigen::Index>(stats.categories.size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (TokenId t : bags[static_cast<std::size_t>(i)]) {
      require(t < vocab.size(), ErrorKind::kInvalidInput, "poistats: token id out of range");
      if (column[t] >= 0) counts(i, column[t]) += 1.0;
    }
  }
  Eigen::VectorXd df = (counts.array() > 0.0).cast<double>().colwise().sum().transpose();
  Eigen::VectorXd idf(m);
  for (Eigen::Index c = 0; c < m; ++c) idf(c) = std::log(static_cast<double>(n) / (1.0 + df(c)));

  stats.values = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double total = counts.row(i).sum();
    if (total <= 0.0) {
      log_warning("poistats: neighborhood row " + std::to_string(i) + " has no category tokens");
      continue;
    }
    stats.values.row(i) = (counts.row(i) / total).cwiseProduct(idf.transpose());
  }
  return stats;
}

}  // namespace urban2vec
