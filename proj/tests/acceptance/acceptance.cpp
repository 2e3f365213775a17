// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "urban2vec/analytics.hpp"
#include "urban2vec/embedding_io.hpp"
#include "urban2vec/log.hpp"
#include "urban2vec/pipeline.hpp"
#include "urban2vec/synthcity.hpp"

using namespace urban2vec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int number, const std::string& name, double budget_seconds,
               const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome outcome{false, ""};
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && seconds > budget_seconds) {
    outcome.pass = false;
    outcome.detail += "; over the " + std::to_string(budget_seconds) + " s budget";
  }
  if (!outcome.pass) ++failures;
  std::printf("%s criterion %d: %s | %s | %.2f s\n", outcome.pass ? "PASS" : "FAIL", number, name.c_str(),
              outcome.detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Settings fixed by the end-to-end criteria; everything else keeps its
// library default.
SynthConfig city_config() {
  SynthConfig sc;
  sc.n_neighborhoods = 200;
  sc.views_per_neighborhood = 20;
  sc.pois_per_neighborhood = 20;
  sc.latent_dim = 3;
  return sc;
}

TrainingConfig training_config() {
  TrainingConfig tc;
  tc.dim = 32;
  return tc;
}

RegressionProtocol protocol(const TrainingConfig& tc) {
  RegressionProtocol p;
  p.repeats = 20;
  p.seed = tc.seed;
  return p;
}

double mean_r2(const Eigen::MatrixXd& z, const SynthCity& city, const TrainingConfig& tc,
               std::string* csv = nullptr) {
  const auto report = evaluate_regression(z, city.latents.values, city.latents.names, protocol(tc));
  if (csv) {
    std::ostringstream out;
    write_report_csv(out, report);
    *csv = out.str();
  }
  return report.overall_mean_r2();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> id_strings(std::span<const EntityId> ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(std::to_string(id));
  return out;
}

// Writes every checkpoint of a run and returns their concatenated bytes.
std::string checkpoint_bytes(const PipelineOutput& run, const UrbanDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const auto nbhd = id_strings(dataset.neighborhood_ids());
  const std::vector<std::string> tokens(run.corpus.vocab.tokens().begin(), run.corpus.vocab.tokens().end());
  const std::vector<std::pair<std::string, EmbeddingTable>> tables{
      {"street_views", {id_strings(dataset.features.ids), run.street_view.embeddings}},
      {"neighborhoods_sve", {nbhd, run.sve}},
      {"neighborhoods_u2v", {nbhd, run.poi.neighborhoods}},
      {"words", {tokens, run.poi.words}},
  };
  std::string bytes;
  for (const auto& [name, table] : tables) {
    const auto path = dir / (name + ".gvemb");
    write_embedding(path, table);
    bytes += file_bytes(path) + file_bytes(sidecar_path(path));
  }
  return bytes;
}

bool away_from_kinks(const EncoderParams& params, const Eigen::VectorXd& x, double band) {
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
    const Eigen::VectorXd pre = params.layers[l].weight * h + params.layers[l].bias;
    if (pre.cwiseAbs().minCoeff() < band) return false;
    h = pre.cwiseMax(0.0);
  }
  return true;
}

}  // namespace

int main() {
  set_log_sink([](LogLevel, const std::string&) {});

  criterion(1, "triplet and encoder gradients vs central differences", 5.0, [] {
    Rng rng(101);
    const double step = 1e-4;
    double worst = 0.0;
    int triplets = 0;
    while (triplets < 20) {
      const Eigen::VectorXd a = random_vector(8, rng), c = random_vector(8, rng), n = random_vector(8, rng);
      const double margin = 1.0;
      if (std::abs(margin + (a - c).norm() - (a - n).norm()) < 1e-2) continue;  // hinge
      ++triplets;
      const auto g = triplet_grads(a, c, n, margin);
      worst = std::max({worst,
                        oracle::relative_error(g.anchor, oracle::numeric_gradient(
                            [&](const Eigen::VectorXd& v) { return triplet_loss(v, c, n, margin); }, a, step)),
                        oracle::relative_error(g.context, oracle::numeric_gradient(
                            [&](const Eigen::VectorXd& v) { return triplet_loss(a, v, n, margin); }, c, step)),
                        oracle::relative_error(g.negative, oracle::numeric_gradient(
                            [&](const Eigen::VectorXd& v) { return triplet_loss(a, c, v, margin); }, n, step))});
    }
    int encoders = 0;
    for (std::uint64_t seed = 1; encoders < 20; ++seed) {
      auto params = init_encoder(EncoderShape{10, {8, 6}, 4}, seed);
      for (auto& layer : params.layers) layer.bias = 0.1 * random_vector(layer.bias.size(), rng);
      const Eigen::VectorXd x = random_vector(10, rng);
      const Eigen::VectorXd g = random_vector(4, rng);
      if (!away_from_kinks(params, x, 1e-3)) continue;  // ReLU kink
      ++encoders;
      const auto grads = encode_backward(params, x, g);
      worst = std::max(worst, oracle::relative_error(grads.input, oracle::numeric_gradient(
          [&](const Eigen::VectorXd& v) { return encode(params, v).dot(g); }, x, step)));
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& w = params.layers[l].weight;
        Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
        const auto numeric = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& v) {
              auto p = params;
              p.layers[l].weight = Eigen::Map<const Eigen::MatrixXd>(v.data(), w.rows(), w.cols());
              return encode(p, x).dot(g);
            },
            flat, step);
        const auto& gw = grads.layers[l].weight;
        worst = std::max(worst, oracle::relative_error(Eigen::Map<const Eigen::VectorXd>(gw.data(), gw.size()), numeric));
        const auto numeric_bias = oracle::numeric_gradient(
            [&](const Eigen::VectorXd& v) {
              auto p = params;
              p.layers[l].bias = v;
              return encode(p, x).dot(g);
            },
            params.layers[l].bias, step);
        worst = std::max(worst, oracle::relative_error(grads.layers[l].bias, numeric_bias));
      }
    }
    return Outcome{worst < 1e-4, "20 triplet + 20 encoder instances, worst relative error " +
                                     sci(worst) + " (< 1e-4)"};
  });

  criterion(2, "aggregated z minimizes the summed squared distance", 5.0, [] {
    Rng rng(202);
    const Eigen::Index d = 16;
    std::vector<std::size_t> assignment;
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t k = 0; k < 50; ++k) {
      const std::size_t views = 1 + rng.index(30);
      for (std::size_t v = 0; v < views; ++v) {
        assignment.push_back(k);
        rows.push_back(random_vector(d, rng) * 3.0);
      }
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    const auto z = aggregate_neighborhoods(x, assignment, 50);
    int violations = 0;
    double smallest_gain = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 50; ++k) {
      auto cost = [&](const Eigen::VectorXd& c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (assignment[r] == k) s += (c - rows[r]).squaredNorm();
        }
        return s;
      };
      const Eigen::VectorXd zk = z.row(static_cast<Eigen::Index>(k)).transpose();
      const double base = cost(zk);
      for (int p = 0; p < 100; ++p) {
        const Eigen::VectorXd u = random_vector(d, rng).normalized();
        const double gain = cost(zk + u) - base;
        smallest_gain = std::min(smallest_gain, gain);
        if (gain < 0) ++violations;
      }
    }
    return Outcome{violations == 0, "50 x 100 unit perturbations, " + std::to_string(violations) +
                                        " reductions, smallest increase " + fmt(smallest_gain)};
  });

  criterion(3, "negative draws follow F^0.5 within +-0.01", 5.0, [] {
    const std::vector<std::uint64_t> freq{1, 4, 9, 16, 100};
    const auto vocab = Vocabulary::from_counts({{"t0", 1}, {"t1", 4}, {"t2", 9}, {"t3", 16}, {"t4", 100}});
    const NegativeSampler sampler(vocab, 0.5);
    double worst = 0.0;
    for (const std::vector<TokenId>& context : {std::vector<TokenId>{}, std::vector<TokenId>{2}}) {
      double mass = 0.0;
      for (TokenId t = 0; t < 5; ++t) {
        if (std::find(context.begin(), context.end(), t) == context.end()) mass += std::sqrt(double(freq[t]));
      }
      Rng rng(303);
      std::vector<double> hits(5, 0.0);
      const int draws = 100'000;
      for (int i = 0; i < draws; ++i) hits[sampler.sample(context, rng)] += 1.0;
      for (TokenId t = 0; t < 5; ++t) {
        const bool excluded = std::find(context.begin(), context.end(), t) != context.end();
        const double expected = excluded ? 0.0 : std::sqrt(double(freq[t])) / mass;
        worst = std::max(worst, std::abs(hits[t] / draws - expected));
      }
    }
    return Outcome{worst <= 0.01, "1e5 draws per context, worst deviation " + fmt(worst)};
  });

  criterion(4, "KNN index equals brute force including tie order", 10.0, [] {
    Rng rng(404);
    std::vector<oracle::Site> sites;
    std::vector<std::pair<EntityId, GeoPoint>> points;
    for (std::size_t i = 0; i < 1000; ++i) {
      // A coarse lattice makes exact distance ties common.
      const double lat = 37.70 + 0.002 * static_cast<double>(rng.index(40));
      const double lon = -122.50 + 0.002 * static_cast<double>(rng.index(40));
      const auto id = static_cast<EntityId>((i * 7919) % 1000);
      sites.push_back({id, lat, lon});
      points.push_back({id, {lat, lon}});
    }
    const auto index = SpatialIndex::build(points);
    auto dist = [](const oracle::Site& a, const oracle::Site& b) {
      return haversine_distance({a.lat, a.lon}, {b.lat, b.lon});
    };
    int mismatches = 0;
    for (const auto& s : sites) {
      if (index.k_nearest(s.id, 5) != oracle::brute_knn(sites, s, 5, true, dist)) ++mismatches;
    }
    return Outcome{mismatches == 0, "1000 K=5 queries on a tie-heavy lattice, " + std::to_string(mismatches) +
                                        " mismatches"};
  });

  const auto city = generate_city(city_config());
  const auto dataset = to_dataset(city);
  const auto tc = training_config();
  PipelineOutput run;
  double r2_full = 0.0;

  criterion(5, "end-to-end latent recovery", 600.0, [&] {
    run = run_pipeline(dataset, tc);
    r2_full = mean_r2(run.poi.neighborhoods, city, tc);
    const auto random = random_neighborhood_init(static_cast<Eigen::Index>(city.neighborhoods.size()), tc.dim,
                                                 stream_seed(tc.seed, SeedStream::kRandomNeighborhoods));
    const double r2_random = mean_r2(random, city, tc);
    return Outcome{r2_full >= 0.5 && r2_full - r2_random >= 0.3,
                   "mean test R2 " + fmt(r2_full) + " (>= 0.5), random baseline " + fmt(r2_random) +
                       ", gap " + fmt(r2_full - r2_random) + " (>= 0.3)"};
  });

  criterion(6, "street views + POIs beat either modality alone (-0.02)", 600.0, [&] {
    const double r2_sve = mean_r2(run.sve, city, tc);
    const auto poi_only = run_poi_stage(
        run.corpus,
        random_neighborhood_init(static_cast<Eigen::Index>(city.neighborhoods.size()), tc.dim,
                                 stream_seed(tc.seed, SeedStream::kRandomNeighborhoods)),
        tc);
    const double r2_poi = mean_r2(poi_only.neighborhoods, city, tc);
    const double bar = std::max(r2_sve, r2_poi) - 0.02;
    return Outcome{r2_full >= bar, "full " + fmt(r2_full) + ", SVE-only " + fmt(r2_sve) + ", POI-only " +
                                       fmt(r2_poi) + " (need >= " + fmt(bar) + ")"};
  });

  criterion(7, "k-means on Z recovers 4 latent clusters", 600.0, [&] {
    auto config = city_config();
    config.n_clusters = 4;
    const auto clustered = generate_city(config);
    const auto out = run_pipeline(to_dataset(clustered), tc);
    const auto result = kmeans(out.poi.neighborhoods, 4, tc.seed);
    const double ari = adjusted_rand_index(result.assignments, clustered.cluster_labels);
    return Outcome{ari >= 0.8, "ARI " + fmt(ari) + " (>= 0.8)"};
  });

  criterion(8, "similarity search contract", 5.0, [&] {
    const Eigen::MatrixXd& z = run.poi.neighborhoods;
    const auto ids = dataset.neighborhood_ids();
    const auto n = ids.size();
    bool ok = true;
    double worst_self = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const Eigen::VectorXd query = z.row(static_cast<Eigen::Index>(q)).transpose();
      const auto most = cosine_rank(query, z, ids, n);
      worst_self = std::max(worst_self, std::abs(most.front().cosine - 1.0));
      ok = ok && most.front().id == ids[q];
      const auto scaled = cosine_rank(7.25 * query, z, ids, n);
      const auto least = cosine_rank(query, z, ids, n, true);
      for (std::size_t i = 0; i < n; ++i) {
        ok = ok && scaled[i].id == most[i].id && least[i].id == most[n - 1 - i].id;
      }
    }
    ok = ok && worst_self <= 1e-6;
    return Outcome{ok, std::to_string(n) + " self-queries, worst |cos - 1| " + sci(worst_self) +
                           ", scaling and --least order checked"};
  });

  criterion(9, "identical seeds give byte-identical checkpoints and reports", 600.0, [&] {
    const fs::path root = fs::temp_directory_path() / "urban2vec_acceptance_determinism";
    fs::remove_all(root);
    const auto again = run_pipeline(dataset, tc);
    const bool checkpoints = checkpoint_bytes(run, dataset, root / "a") == checkpoint_bytes(again, dataset, root / "b");
    std::string csv_a, csv_b;
    mean_r2(run.poi.neighborhoods, city, tc, &csv_a);
    mean_r2(again.poi.neighborhoods, city, tc, &csv_b);
    fs::remove_all(root);
    return Outcome{checkpoints && csv_a == csv_b,
                   std::string("checkpoints ") + (checkpoints ? "identical" : "DIFFER") + ", report CSV " +
                       (csv_a == csv_b ? "identical" : "DIFFERS")};
  });

  criterion(10, "held-out triplet losses drop by >= 5%", 600.0, [&] {
    const auto index = dataset.build_view_index();
    Rng sv_rng(stream_seed(tc.seed, SeedStream::kHeldOutStreetView));
    const auto sv_triplets = sample_sv_triplets(index, dataset.features.ids, tc.context_size, 2, sv_rng);
    const auto initial = init_encoder(dataset.features.values.cols(), tc.encoder_hidden, tc.dim,
                                      stream_seed(tc.seed, SeedStream::kEncoderInit));
    const double sv_before = mean_street_view_loss(initial, dataset.features, sv_triplets, tc.margin_sv);
    const double sv_after = mean_street_view_loss(run.street_view.encoder, dataset.features, sv_triplets, tc.margin_sv);

    const NegativeSampler sampler(run.corpus.vocab, tc.neg_exponent);
    Rng poi_rng(stream_seed(tc.seed, SeedStream::kHeldOutPoi));
    const auto poi_triplets = sample_poi_triplets(run.corpus.bags, sampler, 10, poi_rng);
    const auto y0 = init_word_embeddings(run.corpus.vocab, tc.dim, {}, stream_seed(tc.seed, SeedStream::kWordInit));
    const double poi_before = mean_poi_loss(run.sve, y0, poi_triplets, tc.margin_poi);
    const double poi_after = mean_poi_loss(run.poi.neighborhoods, run.poi.words, poi_triplets, tc.margin_poi);

    const bool ok = sv_after <= 0.95 * sv_before && poi_after <= 0.95 * poi_before;
    return Outcome{ok, "stage 1 " + fmt(sv_before) + " -> " + fmt(sv_after) + ", stage 3 " + fmt(poi_before) +
                           " -> " + fmt(poi_after)};
  });

  std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
