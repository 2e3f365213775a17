#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "urban2vec/analytics.hpp"
#include "urban2vec/error.hpp"
#include "urban2vec/rng.hpp"

using namespace urban2vec;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

}  // namespace

TEST_SUITE("analytics") {

TEST_CASE("PCA on points along y = x") {
  Eigen::MatrixXd data(5, 2);
  data << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5;
  const auto model = pca_fit(data, 2);
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(model.components(0, 0) == doctest::Approx(s));
  CHECK(model.components(0, 1) == doctest::Approx(s));
  CHECK(model.explained_variance(0) == doctest::Approx(5.0));  // var of t*sqrt(2), ddof 1
  CHECK(model.explained_variance_ratio(0) == doctest::Approx(1.0));
  CHECK(model.mean(0) == doctest::Approx(3.0));
}

TEST_CASE("PCA on an isotropic 2D sample") {
  Rng rng(40);
  const auto model = pca_fit(gaussian(5000, 2, rng), 2);
  CHECK(std::abs(model.explained_variance_ratio(0) - 0.5) <= 0.05);
  CHECK(std::abs(model.explained_variance_ratio(1) - 0.5) <= 0.05);
}

TEST_CASE("PCA typed invariants after a random fit") {
  Rng rng(41);
  Eigen::MatrixXd data = gaussian(300, 6, rng);
  data.col(1) += 2.0 * data.col(0);
  const auto model = pca_fit(data, 4);
  CHECK((model.components * model.components.transpose() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index c = 1; c < 4; ++c) CHECK(model.explained_variance_ratio(c) <= model.explained_variance_ratio(c - 1));
  CHECK(model.explained_variance_ratio.sum() <= 1.0 + 1e-12);
}

TEST_CASE("PCA on an isotropic sample and its reconstruction") {
  Rng rng(4);
  const Eigen::MatrixXd data = gaussian(20'000, 3, rng);
  const auto model = pca_fit(data, 3);
  for (Eigen::Index c = 0; c < 3; ++c) CHECK(std::abs(model.explained_variance_ratio(c) - 1.0 / 3.0) < 0.02);
  CHECK((model.components * model.components.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::Index arg;
    model.components.row(c).cwiseAbs().maxCoeff(&arg);
    CHECK(model.components(c, arg) > 0);
  }
  const Eigen::MatrixXd head = data.topRows(10);
  CHECK((model.inverse_transform(model.transform(head)) - head).norm() < 1e-9);
  CHECK(model.transform(head, 2).cols() == 2);

  const Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(5, 3);
  CHECK_THROWS_AS(pca_fit(constant, 2), Error);
}

TEST_CASE("linear regression agrees with the QR oracle") {
  Rng rng(7);
  const Eigen::MatrixXd x = gaussian(80, 4, rng);
  Eigen::VectorXd y = x * Eigen::Vector4d(1.5, -2, 0.25, 3) + Eigen::VectorXd::Constant(80, 0.7);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.1 * rng.normal();
  const auto model = linreg_fit(x, y);
  const auto [weights, intercept] = oracle::least_squares(x, y);
  CHECK((model.weights - weights).norm() < 1e-6);
  CHECK(model.intercept == doctest::Approx(intercept).epsilon(1e-6));
  CHECK((model.predict(x).array() - (x * weights).array() - intercept).matrix().norm() < 1e-5);
}

TEST_CASE("linear regression edge cases") {
  Rng rng(16);
  const Eigen::MatrixXd x = gaussian(30, 3, rng);
  const Eigen::Vector3d w(0.5, -1.0, 2.0);
  const Eigen::VectorXd exact = x * w;
  const auto fit = linreg_fit(x, exact.array() + 4.0);
  CHECK((fit.weights - w).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit.intercept == doctest::Approx(4.0));
  CHECK(r_squared(exact.array() + 4.0, fit.predict(x)) == doctest::Approx(1.0));

  const auto flat = linreg_fit(x, Eigen::VectorXd::Constant(30, 2.5));
  CHECK(flat.weights.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(flat.intercept == doctest::Approx(2.5));

  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(linreg_fit(bad, exact), Error);
}

TEST_CASE("R squared") {
  CHECK(r_squared(Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(0, 1, 1)) == doctest::Approx(0.5));
  const Eigen::Vector4d y(1, 2, 3, 4);
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, Eigen::Vector4d::Constant(2.5)) == doctest::Approx(0.0));
  CHECK(r_squared(y, Eigen::Vector4d(2, 2, 3, 4)) == doctest::Approx(1.0 - 1.0 / 5.0));
  CHECK_THROWS_AS(r_squared(Eigen::Vector4d::Ones(), y), Error);
}

TEST_CASE("splits are disjoint, sized and seeded per repeat") {
  RegressionProtocol protocol;
  protocol.seed = 9;
  const auto split = make_split(200, protocol, 0);
  CHECK(split.train.size() == 140);
  CHECK(split.val.size() == 30);
  CHECK(split.test.size() == 30);
  std::set<std::size_t> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 200);
  CHECK(make_split(200, protocol, 0).test == split.test);
  CHECK(make_split(200, protocol, 1).test != split.test);
}

TEST_CASE("evaluate_regression: linear signal, pure noise and no leakage") {
  Rng rng(12);
  const Eigen::MatrixXd z = gaussian(1000, 10, rng);
  Eigen::MatrixXd targets(1000, 2);
  targets.col(0) = z * Eigen::VectorXd::LinSpaced(10, -1, 1) + 0.01 * gaussian(1000, 1, rng);
  // n_test = 150 keeps the small-sample bias of a fitted intercept on noise
  // (about -(p+1)/n_test) inside the tolerance.
  targets.col(1) = gaussian(1000, 1, rng);
  const std::vector<std::string> names{"linear", "noise"};
  RegressionProtocol protocol;
  protocol.seed = 3;
  protocol.repeats = 20;
  const auto report = evaluate_regression(z, targets, names, protocol);
  REQUIRE(report.targets.size() == 2);
  CHECK(report.targets[0].mean_r2 > 0.95);
  CHECK(std::abs(report.targets[1].mean_r2) <= 0.05);
  CHECK(report.targets[0].test_r2.size() == 20);

  REQUIRE(report.pca_means.size() == 20);
  for (std::size_t r = 0; r < 20; ++r) {
    const auto split = make_split(1000, protocol, r);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(10);
    for (auto i : split.train) mean += z.row(static_cast<Eigen::Index>(i)).transpose();
    mean /= static_cast<double>(split.train.size());
    CHECK((report.pca_means[r] - mean).norm() < 1e-12);
    for (const auto& t : report.targets) CHECK(t.chosen_components[r] <= 10);
  }

  std::ostringstream csv;
  write_report_csv(csv, report);
  CHECK(csv.str().starts_with("target,mean_r2,std_r2,repeats\nlinear,"));
  CHECK(report.overall_mean_r2() == doctest::Approx((report.targets[0].mean_r2 + report.targets[1].mean_r2) / 2));
}

TEST_CASE("evaluate_regression: single repeat matches the first of many; too few rows") {
  Rng rng(15);
  const Eigen::MatrixXd z = gaussian(60, 5, rng);
  const Eigen::MatrixXd y = z.col(0) + 0.5 * gaussian(60, 1, rng);
  const std::vector<std::string> names{"y"};
  RegressionProtocol protocol;
  protocol.seed = 11;
  protocol.repeats = 1;
  const auto one = evaluate_regression(z, y, names, protocol);
  protocol.repeats = 20;
  const auto many = evaluate_regression(z, y, names, protocol);
  CHECK(one.targets[0].test_r2.size() == 1);
  CHECK(one.targets[0].test_r2[0] == many.targets[0].test_r2[0]);
  CHECK_THROWS_AS(evaluate_regression(z.topRows(5), y.topRows(5), names, protocol), Error);
}

TEST_CASE("k-means recovers two blobs and never raises inertia") {
  Rng rng(5);
  Eigen::MatrixXd data(100, 2);
  std::vector<std::size_t> truth(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    const double cx = i < 50 ? -50.0 : 50.0;
    data.row(i) << cx + 0.1 * rng.normal(), 0.1 * rng.normal();
    truth[static_cast<std::size_t>(i)] = i < 50 ? 0 : 1;
  }
  const auto result = kmeans(data, 2, 1);
  CHECK(adjusted_rand_index(result.assignments, truth) == doctest::Approx(1.0));
  CHECK(result.converged);

  const Eigen::MatrixXd cloud = gaussian(300, 3, rng);
  const auto run = kmeans(cloud, 6, 2);
  for (std::size_t i = 1; i < run.inertia_history.size(); ++i) {
    CHECK(run.inertia_history[i] <= run.inertia_history[i - 1] + 1e-9);
  }
  CHECK(kmeans(cloud, 6, 2).assignments == run.assignments);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(kmeans(cloud, 6, seed).inertia <= kmeans(cloud, 6, seed, 300, 1).inertia + 1e-9);
  }
  CHECK_THROWS_AS(kmeans(cloud, 2, 1, 300, 0), Error);
  const auto singletons = kmeans(cloud.topRows(12), 12, 3);
  CHECK(singletons.inertia == 0.0);
  CHECK(std::set<std::size_t>(singletons.assignments.begin(), singletons.assignments.end()).size() == 12);
  CHECK_THROWS_AS(kmeans(cloud, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(cloud, 301, 1), Error);
}

TEST_CASE("ARI agrees with the contingency-table oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> a(60), b(60);
    for (auto& v : a) v = rng.index(4);
    for (auto& v : b) v = rng.index(3);
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::ari(a, b)));
  }
  const std::vector<std::size_t> x{0, 0, 1, 1, 2, 2}, relabeled{2, 2, 0, 0, 1, 1};
  CHECK(adjusted_rand_index(x, relabeled) == doctest::Approx(1.0));
}

TEST_CASE("cosine ranking agrees with brute force") {
  Rng rng(10);
  const Eigen::MatrixXd candidates = gaussian(100, 6, rng);
  std::vector<EntityId> ids(100);
  std::iota(ids.begin(), ids.end(), 100);
  const Eigen::VectorXd query = gaussian(6, 1, rng);

  std::vector<std::pair<double, EntityId>> brute;
  for (Eigen::Index i = 0; i < 100; ++i) {
    const Eigen::VectorXd c = candidates.row(i).transpose();
    brute.push_back({-query.dot(c) / (query.norm() * c.norm()), ids[static_cast<std::size_t>(i)]});
  }
  std::sort(brute.begin(), brute.end());
  const auto ranked = cosine_rank(query, candidates, ids, 100);
  REQUIRE(ranked.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(ranked[i].id == brute[i].second);
    CHECK(ranked[i].cosine == doctest::Approx(-brute[i].first));
  }

  const auto least = cosine_rank(query, candidates, ids, 100, true);
  const auto most = cosine_rank(query, candidates, ids, 100);
  CHECK(std::equal(least.begin(), least.end(), most.rbegin()));
  const auto scaled = cosine_rank(3.5 * query, candidates, ids, 100);
  for (std::size_t i = 0; i < most.size(); ++i) {
    CHECK(scaled[i].id == most[i].id);
    CHECK(scaled[i].cosine == doctest::Approx(most[i].cosine));
  }
  CHECK_THROWS_AS(cosine_rank(Eigen::VectorXd::Zero(6), candidates, ids, 5), Error);
}

TEST_CASE("orthogonal vectors have cosine 0; zero candidates are skipped") {
  Eigen::MatrixXd candidates(2, 2);
  candidates << 0, 1, 0, 0;
  const std::vector<EntityId> ids{1, 2};
  const auto ranked = cosine_rank(Eigen::Vector2d(1, 0), candidates, ids, 5);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0].cosine == doctest::Approx(0.0));
}

TEST_CASE("cosine ties go to the smaller id") {
  Eigen::MatrixXd candidates(3, 2);
  candidates << 1, 0, 2, 0, 0, 1;
  const std::vector<EntityId> ids{9, 4, 1};
  const auto ranked = cosine_rank(Eigen::Vector2d(1, 0), candidates, ids, 3);
  CHECK(ranked[0].id == 4);
  CHECK(ranked[1].id == 9);
  CHECK(ranked[2].id == 1);
}

TEST_CASE("tf-idf on a hand-worked example") {
  const auto vocab = Vocabulary::from_counts({{"cat_a", 3}, {"cat_b", 1}, {"price_1", 3}});
  const std::vector<std::vector<TokenId>> bags{{0, 0, 1, 2}, {0}, {2}, {2}};
  const auto stats = poistats_tfidf(bags, vocab);
  CHECK(stats.categories == std::vector<TokenId>{0, 1});
  REQUIRE(stats.values.rows() == 4);
  REQUIRE(stats.values.cols() == 2);
  // N = 4; df(cat_a) = 2, df(cat_b) = 1.
  CHECK(stats.values(0, 0) == doctest::Approx(2.0 / 3.0 * std::log(4.0 / 3.0)));
  CHECK(stats.values(0, 1) == doctest::Approx(1.0 / 3.0 * std::log(2.0)));
  CHECK(stats.values(1, 0) == doctest::Approx(std::log(4.0 / 3.0)));
  CHECK(stats.values(1, 1) == 0.0);
  CHECK(stats.values.row(2).isZero());
}

TEST_CASE("tf-idf edge cases") {
  const auto vocab = Vocabulary::from_counts({{"cat_a", 2}});
  const std::vector<std::vector<TokenId>> everywhere{{0}, {0}};
  // Present in every neighborhood: idf = ln(2/3) < 0.
  CHECK(poistats_tfidf(everywhere, vocab).values(0, 0) == doctest::Approx(std::log(2.0 / 3.0)));
  const std::vector<std::vector<TokenId>> single{{0}};
  CHECK(poistats_tfidf(single, vocab).values(0, 0) == doctest::Approx(1.0 * std::log(0.5)));
}

}  // TEST_SUITE
