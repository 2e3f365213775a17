#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urban2vec/corpus.hpp"
#include "urban2vec/geo.hpp"
#include "urban2vec/training.hpp"

namespace urban2vec {

struct StreetViewRecord {
  EntityId id = 0;
  GeoPoint geo;
  std::optional<EntityId> neighborhood_id;

  friend bool operator==(const StreetViewRecord&, const StreetViewRecord&) = default;
};

struct Centroid {
  EntityId id = 0;
  GeoPoint geo;
  std::string city;  // optional tag, empty when absent

  friend bool operator==(const Centroid&, const Centroid&) = default;
};

struct AttributeTable {
  std::vector<EntityId> ids;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // ids.size() x names.size()

  // Rows reordered to follow `order`; throws kValidation on missing ids.
  AttributeTable aligned_to(std::span<const EntityId> order) const;
};

inline constexpr char kFeatureMagic[8] = {'G', 'V', 'F', 'E', 'A', 'T', '0', '1'};

// --- POI JSON lines: id, lat, lon, neighborhood_id, categories, rating, price, reviews
std::vector<PoiRecord> read_poi_jsonl(const std::filesystem::path& path);
void write_poi_jsonl(const std::filesystem::path& path, std::span<const PoiRecord> pois);

// --- Street-view sidecar CSV: id,lat,lon,neighborhood_id (neighborhood may be blank)
std::vector<StreetViewRecord> read_street_views_csv(const std::filesystem::path& path);
void write_street_views_csv(const std::filesystem::path& path,
                            std::span<const StreetViewRecord> views);

// --- Features: CSV "id,f1..fD" or GVFEAT01 binary (magic, u32 count, u32 D,
// little-endian float32 rows). Binary rows carry no ids; they pair with
// `binary_ids` in ascending-id order.
FeatureMatrix read_features_csv(const std::filesystem::path& path);
void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_features_binary(const std::filesystem::path& path,
                                   std::vector<EntityId> binary_ids);
// Rows are written in ascending-id order.
void write_features_binary(const std::filesystem::path& path, const FeatureMatrix& features);
bool is_feature_binary(const std::filesystem::path& path);

// --- Centroid CSV: id,lat,lon[,city]
std::vector<Centroid> read_centroids_csv(const std::filesystem::path& path);
void write_centroids_csv(const std::filesystem::path& path, std::span<const Centroid> centroids);

// --- Attribute CSV: header, first column neighborhood id, then numeric targets
AttributeTable read_attributes_csv(const std::filesystem::path& path);
void write_attributes_csv(const std::filesystem::path& path, const AttributeTable& table);

// Everything the training stages consume, with ids resolved to row indices.
struct UrbanDataset {
  std::vector<Centroid> neighborhoods;          // ascending id
  std::vector<StreetViewRecord> street_views;   // ascending id, neighborhood set
  FeatureMatrix features;                       // rows follow street_views
  std::vector<PoiRecord> pois;                  // input order, neighborhood set

  std::vector<EntityId> neighborhood_ids() const;
  std::size_t neighborhood_row(EntityId id) const;
  // Neighborhood row of each street view.
  std::vector<std::size_t> view_assignment() const;
  // Per-neighborhood merged POI bags, in neighborhood order.
  std::vector<WordBag> neighborhood_bags() const;
  SpatialIndex build_view_index() const;
};

struct IngestOptions {
  bool assign_missing = false;
};

// Range checks, referential integrity and id alignment. Every offender is
// listed in the message. Records pointing at unknown (or, without
// assign_missing, absent) neighborhoods raise kIntegrity; everything else is
// kValidation. `warnings` collects non-fatal notes.
UrbanDataset assemble_dataset(std::vector<Centroid> centroids,
                              std::vector<StreetViewRecord> views, FeatureMatrix features,
                              std::vector<PoiRecord> pois, const IngestOptions& options,
                              std::vector<std::string>* warnings = nullptr);

}  // namespace urban2vec
