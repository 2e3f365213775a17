#include <benchmark/benchmark.h>

#include "urban2vec/analytics.hpp"
#include "urban2vec/log.hpp"
#include "urban2vec/pipeline.hpp"
#include "urban2vec/synthcity.hpp"

using namespace urban2vec;

namespace {

SpatialIndex random_index(std::size_t n) {
  Rng rng(1);
  std::vector<std::pair<EntityId, GeoPoint>> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    points.push_back({static_cast<EntityId>(i), {rng.uniform(37.6, 37.9), rng.uniform(-122.6, -122.3)}});
  }
  return SpatialIndex::build(points);
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

const UrbanDataset& bench_city() {
  static const UrbanDataset dataset = [] {
    SynthConfig sc;
    sc.n_neighborhoods = 100;
    sc.views_per_neighborhood = 20;
    sc.pois_per_neighborhood = 20;
    return to_dataset(generate_city(sc));
  }();
  return dataset;
}

}  // namespace

static void BM_IndexBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(random_index(static_cast<std::size_t>(state.range(0))));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_IndexBuild)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

static void BM_KNearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto index = random_index(n);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.k_nearest(static_cast<EntityId>(q), 5));
    q = (q + 7919) % n;
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KNearest)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity(benchmark::oLogN);

static void BM_EncodeRows(benchmark::State& state) {
  const auto params = init_encoder(512, 128, 200, 1);
  const auto features = random_matrix(state.range(0), 512, 2);
  for (auto _ : state) benchmark::DoNotOptimize(encode_rows(params, features));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeRows)->Arg(64)->Arg(1024);

static void BM_TripletStep(benchmark::State& state) {
  const auto params = init_encoder(512, 128, 200, 1);
  const auto x = random_matrix(3, 512, 3);
  auto grads = EncoderGradients::zeros_like(params);
  for (auto _ : state) {
    const Eigen::VectorXd a = encode(params, x.row(0).transpose());
    const Eigen::VectorXd c = encode(params, x.row(1).transpose());
    const Eigen::VectorXd n = encode(params, x.row(2).transpose());
    const auto g = triplet_grads(a, c, n, 10.0);
    accumulate_backward(params, x.row(0).transpose(), g.anchor, grads);
    accumulate_backward(params, x.row(1).transpose(), g.context, grads);
    accumulate_backward(params, x.row(2).transpose(), g.negative, grads);
  }
}
BENCHMARK(BM_TripletStep);

static void BM_StreetViewEpoch(benchmark::State& state) {
  set_log_sink([](LogLevel, const std::string&) {});
  TrainingConfig config;
  config.dim = 32;
  config.epochs_sv = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_street_view_stage(bench_city(), config));
}
BENCHMARK(BM_StreetViewEpoch)->Unit(benchmark::kMillisecond);

static void BM_PoiEpoch(benchmark::State& state) {
  set_log_sink([](LogLevel, const std::string&) {});
  TrainingConfig config;
  config.dim = 32;
  config.epochs_poi = 1;
  const auto corpus = build_corpus(bench_city());
  const auto z = random_neighborhood_init(static_cast<Eigen::Index>(corpus.bags.size()), config.dim, 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_poi_stage(corpus, z, config));
}
BENCHMARK(BM_PoiEpoch)->Unit(benchmark::kMillisecond);

static void BM_KMeans(benchmark::State& state) {
  const auto data = random_matrix(state.range(0), 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(data, 4, 1));
}
BENCHMARK(BM_KMeans)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_EvaluateRegression(benchmark::State& state) {
  const auto z = random_matrix(200, 32, 5);
  const auto y = random_matrix(200, 3, 6);
  const std::vector<std::string> names{"a", "b", "c"};
  RegressionProtocol protocol;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_regression(z, y, names, protocol));
}
BENCHMARK(BM_EvaluateRegression)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
