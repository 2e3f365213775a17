#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "urban2vec/corpus.hpp"
#include "urban2vec/dataset.hpp"

namespace urban2vec {

struct SynthConfig {
  std::size_t n_neighborhoods = 200;
  std::size_t views_per_neighborhood = 37;
  std::size_t pois_per_neighborhood = 58;
  std::size_t latent_dim = 3;
  std::size_t feature_dim = 16;
  std::size_t vocab_size = 200;
  double spatial_noise = 0.3;  // grid units, std of view/POI offsets from the centroid
  double feature_noise = 0.5;
  std::uint64_t seed = 7;

  // Cluster mode: latents are blocky around n_clusters separated centers,
  // laid out as contiguous spatial blocks. 0 disables it.
  std::size_t n_clusters = 0;
  double cluster_separation = 4.0;
  double cluster_noise = 0.3;

  // Features become the (zero-padded) neighborhood latent without spatial
  // blending; needs feature_dim >= latent_dim.
  bool identity_mixing = false;
  double topic_sharpness = 1.5;
  double grid_spacing_deg = 0.01;
  double origin_lat = 37.70;
  double origin_lon = -122.50;

  // Throws kValidation naming the offending field.
  void validate() const;
};

struct SynthCity {
  SynthConfig config;
  std::vector<Centroid> neighborhoods;  // ascending id
  AttributeTable latents;               // u_i per neighborhood, columns latent_0..
  std::vector<std::size_t> cluster_labels;  // empty unless cluster mode
  std::vector<StreetViewRecord> street_views;
  FeatureMatrix features;  // row-aligned with street_views, float32-exact
  std::vector<PoiRecord> pois;
};

SynthCity generate_city(const SynthConfig& config);

UrbanDataset to_dataset(const SynthCity& city);

struct ExportedCity {
  std::filesystem::path pois;          // pois.jsonl
  std::filesystem::path features;      // features.gvfeat
  std::filesystem::path street_views;  // street_views.csv (id sidecar)
  std::filesystem::path centroids;     // centroids.csv
  std::filesystem::path latents;       // latents.csv
  std::filesystem::path clusters;      // clusters.csv, empty path unless cluster mode
};

ExportedCity export_city(const SynthCity& city, const std::filesystem::path& directory);

// Reads the files written by export_city back into a dataset.
UrbanDataset load_exported_city(const ExportedCity& files);

}  // namespace urban2vec
