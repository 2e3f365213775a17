#include "urban2vec/synthcity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "urban2vec/error.hpp"
#include "urban2vec/rng.hpp"

namespace urban2vec {
namespace {

constexpr double kMaxOffset = 0.49;  // grid units; keeps records inside their cell
constexpr double kBlendBandwidth = 0.5;

struct Grid {
  std::size_t cols;
  std::size_t rows;
  std::size_t row(std::size_t k) const { return k / cols; }
  std::size_t col(std::size_t k) const { return k % cols; }
};

double offset(Rng& rng, double sigma) {
  return std::clamp(rng.normal(0.0, sigma), -kMaxOffset, kMaxOffset);
}

std::size_t draw(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double target = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  return weights.size() - 1;
}

std::string zero_pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  auto check = [](bool ok, const char* field) {
    if (!ok) fail(ErrorKind::kValidation, std::string("invalid synth config field: ") + field);
  };
  check(n_neighborhoods >= 1, "n_neighborhoods");
  check(views_per_neighborhood >= 1, "views_per_neighborhood");
  check(pois_per_neighborhood >= 1, "pois_per_neighborhood");
  check(latent_dim >= 1, "latent_dim");
  check(feature_dim >= 1, "feature_dim");
  check(vocab_size >= 2 * latent_dim, "vocab_size");
  check(std::isfinite(spatial_noise) && spatial_noise >= 0.0, "spatial_noise");
  check(std::isfinite(feature_noise) && feature_noise >= 0.0, "feature_noise");
  check(n_clusters <= 2 * latent_dim && n_clusters <= n_neighborhoods, "n_clusters");
  check(std::isfinite(cluster_separation) && cluster_separation >= 0.0, "cluster_separation");
  check(std::isfinite(cluster_noise) && cluster_noise >= 0.0, "cluster_noise");
  check(!identity_mixing || feature_dim >= latent_dim, "identity_mixing");
  check(std::isfinite(topic_sharpness), "topic_sharpness");
  check(std::isfinite(grid_spacing_deg) && grid_spacing_deg > 0.0, "grid_spacing_deg");
  const auto side = static_cast<double>(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_neighborhoods)))));
  check(is_valid({origin_lat, origin_lon}) &&
            is_valid({origin_lat + side * grid_spacing_deg, origin_lon + side * grid_spacing_deg}),
        "origin_lat/origin_lon");
}

SynthCity generate_city(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.n_neighborhoods;
  const std::size_t latent = config.latent_dim;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const Grid grid{cols, (n + cols - 1) / cols};
  const double spacing = config.grid_spacing_deg;

  SynthCity city;
  city.config = config;
  for (std::size_t k = 0; k < n; ++k) {
    city.neighborhoods.push_back({static_cast<EntityId>(k + 1),
                                  {config.origin_lat + static_cast<double>(grid.row(k)) * spacing,
                                   config.origin_lon + static_cast<double>(grid.col(k)) * spacing},
                                  "synth"});
  }

  auto neighbors_of = [&](std::size_t k, bool diagonal) {
    std::vector<std::size_t> out;
    const auto r = static_cast<long>(grid.row(k));
    const auto c = static_cast<long>(grid.col(k));
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        if ((dr == 0 && dc == 0) || (!diagonal && dr != 0 && dc != 0)) continue;
        const long rr = r + dr;
        const long cc = c + dc;
        if (rr < 0 || cc < 0 || cc >= static_cast<long>(grid.cols)) continue;
        const auto j = static_cast<std::size_t>(rr) * grid.cols + static_cast<std::size_t>(cc);
        if (j < n) out.push_back(j);
      }
    }
    return out;
  };

  // Latent attributes.
  Eigen::MatrixXd u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(latent));
  if (config.n_clusters == 0) {
    Eigen::MatrixXd raw(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index j = 0; j < raw.cols(); ++j) raw(i, j) = rng.normal();
    }
    for (std::size_t k = 0; k < n; ++k) {
      const auto nbrs = neighbors_of(k, false);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(u.cols());
      for (auto j : nbrs) mean += raw.row(static_cast<Eigen::Index>(j));
      if (!nbrs.empty()) mean /= static_cast<double>(nbrs.size());
      else mean = raw.row(static_cast<Eigen::Index>(k));
      u.row(static_cast<Eigen::Index>(k)) = 0.5 * raw.row(static_cast<Eigen::Index>(k)) + 0.5 * mean;
    }
    const Eigen::RowVectorXd mu = u.colwise().mean();
    u.rowwise() -= mu;
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      const double sd = std::sqrt(u.col(j).squaredNorm() / static_cast<double>(std::max<std::size_t>(n - 1, 1)));
      if (sd > 0.0) u.col(j) /= sd;
    }
  } else {
    const std::size_t k_clusters = config.n_clusters;
    const auto block_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k_clusters))));
    const std::size_t block_rows = (k_clusters + block_cols - 1) / block_cols;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t br = grid.row(k) * block_rows / grid.rows;
      const std::size_t bc = grid.col(k) * block_cols / grid.cols;
      city.cluster_labels.push_back(std::min(k_clusters - 1, br * block_cols + bc));
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t label = city.cluster_labels[k];
      for (std::size_t j = 0; j < latent; ++j) {
        double center = 0.0;
        if (j == label % latent) center = (label / latent) % 2 == 0 ? config.cluster_separation
                                                                    : -config.cluster_separation;
        u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            center + config.cluster_noise * rng.normal();
      }
    }
  }
  city.latents.ids.reserve(n);
  for (const auto& c : city.neighborhoods) city.latents.ids.push_back(c.id);
  for (std::size_t j = 0; j < latent; ++j) city.latents.names.push_back("latent_" + std::to_string(j));
  city.latents.values = u;

  // Feature mixing.
  const auto feature_dim = static_cast<Eigen::Index>(config.feature_dim);
  Eigen::MatrixXd mixing = Eigen::MatrixXd::Zero(feature_dim, u.cols());
  if (config.identity_mixing) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) mixing(j, j) = 1.0;
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(latent));
    for (Eigen::Index i = 0; i < mixing.rows(); ++i) {
      for (Eigen::Index j = 0; j < mixing.cols(); ++j) mixing(i, j) = scale * rng.normal();
    }
  }

  // Street views.
  const std::size_t view_count = n * config.views_per_neighborhood;
  city.features.values.resize(static_cast<Eigen::Index>(view_count), feature_dim);
  std::size_t next_view = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& home = city.neighborhoods[k];
    const auto blend = neighbors_of(k, true);
    for (std::size_t v = 0; v < config.views_per_neighborhood; ++v) {
      const double dy = offset(rng, config.spatial_noise);
      const double dx = offset(rng, config.spatial_noise);
      const auto id = static_cast<EntityId>(next_view + 1);
      city.street_views.push_back({id, {home.geo.lat + dy * spacing, home.geo.lon + dx * spacing}, home.id});

      Eigen::VectorXd local = u.row(static_cast<Eigen::Index>(k)).transpose();
      if (!config.identity_mixing) {
        const double own = std::exp(-(dx * dx + dy * dy) / (2.0 * kBlendBandwidth * kBlendBandwidth));
        local *= own;
        double total = own;
        for (auto j : blend) {
          const double ry = static_cast<double>(grid.row(j)) - static_cast<double>(grid.row(k)) - dy;
          const double rx = static_cast<double>(grid.col(j)) - static_cast<double>(grid.col(k)) - dx;
          const double w = std::exp(-(rx * rx + ry * ry) / (2.0 * kBlendBandwidth * kBlendBandwidth));
          local += w * u.row(static_cast<Eigen::Index>(j)).transpose();
          total += w;
        }
        local /= total;
      }
      Eigen::VectorXd feature = mixing * local;
      for (Eigen::Index f = 0; f < feature.size(); ++f) {
        feature(f) = static_cast<float>(feature(f) + config.feature_noise * rng.normal());
      }
      city.features.ids.push_back(id);
      city.features.values.row(static_cast<Eigen::Index>(next_view)) = feature.transpose();
      ++next_view;
    }
  }

  // Topic distributions over category and review tokens; every topic boosts
  // its own signature tokens.
  const std::size_t n_categories = std::max(latent, config.vocab_size / 4);
  const std::size_t n_words = config.vocab_size - n_categories;
  auto topic_weights = [&](std::size_t size) {
    std::vector<std::vector<double>> topics(latent, std::vector<double>(size));
    for (std::size_t t = 0; t < latent; ++t) {
      for (std::size_t w = 0; w < size; ++w) {
        topics[t][w] = std::exp(rng.normal()) * (w % latent == t ? 6.0 : 1.0);
      }
    }
    return topics;
  };
  const auto category_topics = topic_weights(n_categories);
  const auto word_topics = topic_weights(n_words);

  std::size_t next_poi = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& home = city.neighborhoods[k];
    std::vector<double> mixture(latent);
    double max_logit = -1e300;
    for (std::size_t t = 0; t < latent; ++t) {
      max_logit = std::max(max_logit, config.topic_sharpness * u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)));
    }
    for (std::size_t t = 0; t < latent; ++t) {
      mixture[t] = std::exp(config.topic_sharpness * u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) - max_logit);
    }
    for (std::size_t p = 0; p < config.pois_per_neighborhood; ++p) {
      PoiRecord poi;
      poi.id = "p" + zero_pad(++next_poi, 6);
      const double dy = offset(rng, config.spatial_noise);
      const double dx = offset(rng, config.spatial_noise);
      poi.geo = {home.geo.lat + dy * spacing, home.geo.lon + dx * spacing};
      poi.neighborhood_id = home.id;
      const std::size_t topic = draw(rng, mixture);

      const std::size_t n_cat = rng.uniform() < 0.3 ? 2 : 1;
      for (std::size_t c = 0; c < n_cat; ++c) {
        std::string phrase = "Venue Type " + zero_pad(draw(rng, category_topics[topic]), 3);
        if (std::find(poi.categories.begin(), poi.categories.end(), phrase) == poi.categories.end()) {
          poi.categories.push_back(std::move(phrase));
        }
      }
      if (rng.uniform() < 0.7) poi.rating = 1.0 + 0.5 * static_cast<double>(rng.index(9));
      if (rng.uniform() < 0.6) poi.price = 1 + static_cast<int>(rng.index(4));
      const std::size_t n_reviews = 1 + rng.index(2);
      for (std::size_t r = 0; r < n_reviews; ++r) {
        std::ostringstream text;
        const std::size_t length = 4 + rng.index(8);
        for (std::size_t w = 0; w < length; ++w) {
          if (w) text << (w % 5 == 0 ? ", " : " ");
          text << 'w' << zero_pad(draw(rng, word_topics[topic]), 3);
        }
        text << '.';
        poi.reviews.push_back(text.str());
      }
      city.pois.push_back(std::move(poi));
    }
  }
  return city;
}

UrbanDataset to_dataset(const SynthCity& city) {
  return assemble_dataset(city.neighborhoods, city.street_views, city.features, city.pois, {});
}

ExportedCity export_city(const SynthCity& city, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + directory.string() + ": " + ec.message());
  ExportedCity files{directory / "pois.jsonl",   directory / "features.gvfeat",
                     directory / "street_views.csv", directory / "centroids.csv",
                     directory / "latents.csv",  {}};
  write_poi_jsonl(files.pois, city.pois);
  write_features_binary(files.features, city.features);
  write_street_views_csv(files.street_views, city.street_views);
  write_centroids_csv(files.centroids, city.neighborhoods);
  write_attributes_csv(files.latents, city.latents);
  if (!city.cluster_labels.empty()) {
    files.clusters = directory / "clusters.csv";
    std::ofstream out(files.clusters, std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + files.clusters.string());
    out << "id,cluster\n";
    for (std::size_t k = 0; k < city.cluster_labels.size(); ++k) {
      out << city.neighborhoods[k].id << ',' << city.cluster_labels[k] << '\n';
    }
    if (!out) fail(ErrorKind::kIo, "error writing " + files.clusters.string());
  }
  return files;
}

UrbanDataset load_exported_city(const ExportedCity& files) {
  auto views = read_street_views_csv(files.street_views);
  std::vector<EntityId> ids;
  for (const auto& v : views) ids.push_back(v.id);
  auto features = read_features_binary(files.features, std::move(ids));
  return assemble_dataset(read_centroids_csv(files.centroids), std::move(views),
                          std::move(features), read_poi_jsonl(files.pois), {});
}

}  // namespace urban2vec
