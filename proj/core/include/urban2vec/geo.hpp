#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace urban2vec {

using EntityId = std::int64_t;

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p);

// Throws ErrorKind::kInvalidInput if p is non-finite or out of range.
void validate(const GeoPoint& p);

// Great-circle distance in meters on a sphere of radius kEarthRadiusMeters.
double haversine_distance(const GeoPoint& a, const GeoPoint& b);

// Immutable spatial index answering exact k-nearest queries under haversine
// distance. Internally a 3-D kd-tree over unit vectors; chord-distance bounds
// are converted to great-circle lower bounds for pruning, and candidates are
// ranked by (haversine, id) so the output matches a linear scan exactly.
class SpatialIndex {
 public:
  static SpatialIndex build(std::vector<std::pair<EntityId, GeoPoint>> points);

  // The k ids closest to query_id, excluding it, ascending by (distance, id).
  std::vector<EntityId> k_nearest(EntityId query_id, std::size_t k) const;

  // Same ordering for an arbitrary location; nothing is excluded.
  std::vector<EntityId> k_nearest(const GeoPoint& query, std::size_t k) const;

  std::size_t size() const { return ids_.size(); }
  bool contains(EntityId id) const { return slot_.contains(id); }
  const GeoPoint& location(EntityId id) const;

  // Insertion order as given to build().
  std::span<const EntityId> ids() const { return ids_; }

 private:
  struct Node {
    double lo[3];
    double hi[3];
    std::uint32_t begin;
    std::uint32_t end;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  SpatialIndex() = default;
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);
  std::vector<EntityId> search(const GeoPoint& query, std::size_t k,
                               std::ptrdiff_t exclude_slot) const;

  std::vector<EntityId> ids_;
  std::vector<GeoPoint> points_;
  std::vector<std::array<double, 3>> unit_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::unordered_map<EntityId, std::size_t> slot_;
};

// Nearest centroid by haversine; ties go to the smaller id.
EntityId assign_neighborhood(const GeoPoint& point,
                             std::span<const std::pair<EntityId, GeoPoint>> centroids);

}  // namespace urban2vec
