#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "urban2vec/error.hpp"
#include "urban2vec/synthcity.hpp"

using namespace urban2vec;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig sc;
  sc.n_neighborhoods = 49;
  sc.views_per_neighborhood = 5;
  sc.pois_per_neighborhood = 6;
  return sc;
}

}  // namespace

TEST_SUITE("synthcity") {

TEST_CASE("generation is deterministic and sized by the config") {
  const auto a = generate_city(small_config());
  const auto b = generate_city(small_config());
  CHECK(a.features.values == b.features.values);
  CHECK(a.pois == b.pois);
  CHECK(a.latents.values == b.latents.values);
  CHECK(a.neighborhoods.size() == 49);
  CHECK(a.street_views.size() == 245);
  CHECK(a.pois.size() == 294);
  CHECK(a.latents.values.cols() == 3);
  CHECK(a.features.values.cols() == 16);
  CHECK(a.cluster_labels.empty());
  // Stored features survive a float32 round-trip unchanged.
  CHECK(a.features.values == a.features.values.cast<float>().cast<double>());

  auto other = small_config();
  other.seed = 8;
  CHECK(generate_city(other).features.values != a.features.values);

  const auto ds = to_dataset(a);
  CHECK(ds.neighborhoods.size() == 49);
  CHECK(ds.features.ids.size() == 245);
}

TEST_CASE("identity mixing exposes the latent directly") {
  auto sc = small_config();
  sc.identity_mixing = true;
  sc.feature_noise = 0.0;
  const auto city = generate_city(sc);
  for (std::size_t v = 0; v < city.street_views.size(); ++v) {
    const auto k = static_cast<Eigen::Index>(*city.street_views[v].neighborhood_id - city.neighborhoods.front().id);
    const auto row = city.features.values.row(static_cast<Eigen::Index>(v));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(row(j) == static_cast<double>(static_cast<float>(city.latents.values(k, j))));
    CHECK(row.tail(13).isZero());
  }
}

TEST_CASE("latents are spatially coherent") {
  auto sc = small_config();
  sc.n_neighborhoods = 400;
  const auto city = generate_city(sc);
  std::vector<std::pair<EntityId, GeoPoint>> points;
  for (const auto& c : city.neighborhoods) points.push_back({c.id, c.geo});
  const auto index = SpatialIndex::build(points);
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::VectorXd own(400), around(400);
    for (std::size_t k = 0; k < 400; ++k) {
      own[static_cast<Eigen::Index>(k)] = city.latents.values(static_cast<Eigen::Index>(k), j);
      double sum = 0;
      const auto near = index.k_nearest(city.neighborhoods[k].id, 4);
      for (auto id : near) sum += city.latents.values(static_cast<Eigen::Index>(id - city.neighborhoods.front().id), j);
      around[static_cast<Eigen::Index>(k)] = sum / static_cast<double>(near.size());
    }
    CHECK(oracle::pearson(own, around) > 0.3);
  }
}

TEST_CASE("cluster mode labels contiguous blocks") {
  auto sc = small_config();
  sc.n_neighborhoods = 100;
  sc.n_clusters = 4;
  const auto city = generate_city(sc);
  REQUIRE(city.cluster_labels.size() == 100);
  std::vector<std::size_t> sizes(4, 0);
  for (auto label : city.cluster_labels) ++sizes.at(label);
  for (auto s : sizes) CHECK(s >= 15);
}

TEST_CASE("config validation names the field") {
  auto sc = small_config();
  sc.n_clusters = 100;
  try {
    generate_city(sc);
    FAIL("oversized cluster count accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).find("n_clusters") != std::string::npos);
  }
}

TEST_CASE("export and reload give the same dataset") {
  const fs::path dir = fs::temp_directory_path() / "u2v_synth_export";
  fs::remove_all(dir);
  auto sc = small_config();
  sc.n_clusters = 4;
  const auto city = generate_city(sc);
  const auto files = export_city(city, dir);
  CHECK(fs::exists(files.clusters));
  const auto direct = to_dataset(city);
  const auto loaded = load_exported_city(files);
  CHECK(loaded.neighborhoods == direct.neighborhoods);
  CHECK(loaded.street_views == direct.street_views);
  CHECK(loaded.features.ids == direct.features.ids);
  CHECK(loaded.features.values == direct.features.values);
  CHECK(loaded.pois == direct.pois);
  const auto latents = read_attributes_csv(files.latents);
  CHECK((latents.values - city.latents.values).cwiseAbs().maxCoeff() < 1e-12);
  fs::remove_all(dir);
}

}  // TEST_SUITE
