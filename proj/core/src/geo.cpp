#include "urban2vec/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <string>

#include "urban2vec/error.hpp"

namespace urban2vec {
namespace {

constexpr std::uint32_t kLeafSize = 16;

double to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::array<double, 3> to_unit(const GeoPoint& p) {
  const double lat = to_radians(p.lat);
  const double lon = to_radians(p.lon);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

// Lower bound on the great-circle distance from q to any point inside the box.
double box_lower_bound(const std::array<double, 3>& q, const double* lo, const double* hi) {
  double sq = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    double diff = 0.0;
    if (q[axis] < lo[axis]) diff = lo[axis] - q[axis];
    else if (q[axis] > hi[axis]) diff = q[axis] - hi[axis];
    sq += diff * diff;
  }
  const double chord = std::min(2.0, std::sqrt(sq));
  return 2.0 * kEarthRadiusMeters * std::asin(chord / 2.0);
}

struct Candidate {
  double distance;
  EntityId id;
  bool operator<(const Candidate& other) const {
    if (distance != other.distance) return distance < other.distance;
    return id < other.id;
  }
};

}  // namespace

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

void validate(const GeoPoint& p) {
  if (!is_valid(p)) {
    fail(ErrorKind::kInvalidInput,
         "invalid coordinate (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ")");
  }
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) || !std::isfinite(b.lat) ||
      !std::isfinite(b.lon)) {
    fail(ErrorKind::kInvalidInput, "haversine_distance: non-finite coordinate");
  }
  const double dlat = to_radians(b.lat - a.lat);
  const double dlon = to_radians(b.lon - a.lon);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(to_radians(a.lat)) * std::cos(to_radians(b.lat)) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(h));
}

SpatialIndex SpatialIndex::build(std::vector<std::pair<EntityId, GeoPoint>> points) {
  require(!points.empty(), ErrorKind::kInvalidInput, "build_index: empty point list");
  SpatialIndex index;
  index.ids_.reserve(points.size());
  index.points_.reserve(points.size());
  index.unit_.reserve(points.size());
  for (const auto& [id, p] : points) {
    validate(p);
    if (!index.slot_.emplace(id, index.ids_.size()).second) {
      fail(ErrorKind::kDuplicateId, "build_index: duplicate id " + std::to_string(id));
    }
    index.ids_.push_back(id);
    index.points_.push_back(p);
    index.unit_.push_back(to_unit(p));
  }
  index.order_.resize(points.size());
  for (std::uint32_t i = 0; i < index.order_.size(); ++i) index.order_[i] = i;
  index.nodes_.reserve(2 * points.size() / kLeafSize + 2);
  index.build_node(0, static_cast<std::uint32_t>(points.size()));
  return index;
}

std::int32_t SpatialIndex::build_node(std::uint32_t begin, std::uint32_t end) {
  Node node{};
  for (int axis = 0; axis < 3; ++axis) {
    node.lo[axis] = 2.0;
    node.hi[axis] = -2.0;
  }
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& u = unit_[order_[i]];
    for (int axis = 0; axis < 3; ++axis) {
      node.lo[axis] = std::min(node.lo[axis], u[axis]);
      node.hi[axis] = std::max(node.hi[axis], u[axis]);
    }
  }
  node.begin = begin;
  node.end = end;
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return self;

  int split_axis = 0;
  double widest = -1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double width = node.hi[axis] - node.lo[axis];
    if (width > widest) {
      widest = width;
      split_axis = axis;
    }
  }
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return unit_[a][split_axis] < unit_[b][split_axis];
                   });
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

const GeoPoint& SpatialIndex::location(EntityId id) const {
  const auto it = slot_.find(id);
  if (it == slot_.end()) fail(ErrorKind::kNotFound, "unknown id " + std::to_string(id));
  return points_[it->second];
}

std::vector<EntityId> SpatialIndex::k_nearest(EntityId query_id, std::size_t k) const {
  const auto it = slot_.find(query_id);
  if (it == slot_.end()) {
    fail(ErrorKind::kNotFound, "k_nearest: unknown query id " + std::to_string(query_id));
  }
  require(k >= 1, ErrorKind::kInvalidInput, "k_nearest: k must be >= 1");
  return search(points_[it->second], k, static_cast<std::ptrdiff_t>(it->second));
}

std::vector<EntityId> SpatialIndex::k_nearest(const GeoPoint& query, std::size_t k) const {
  validate(query);
  require(k >= 1, ErrorKind::kInvalidInput, "k_nearest: k must be >= 1");
  return search(query, k, -1);
}

std::vector<EntityId> SpatialIndex::search(const GeoPoint& query, std::size_t k,
                                           std::ptrdiff_t exclude_slot) const {
  const std::size_t available = ids_.size() - (exclude_slot >= 0 ? 1 : 0);
  k = std::min(k, available);
  std::vector<EntityId> result;
  if (k == 0) return result;

  const auto q = to_unit(query);
  // Max-heap of the best k so far; top() is the current worst.
  std::priority_queue<Candidate> best;
  // Bounds are computed in a different arithmetic than haversine; the slack
  // keeps pruning conservative so equal-distance ties are never lost.
  constexpr double kSlackMeters = 1e-3;

  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (best.size() == k &&
        box_lower_bound(q, node.lo, node.hi) > best.top().distance + kSlackMeters) {
      continue;
    }
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t slot = order_[i];
        if (static_cast<std::ptrdiff_t>(slot) == exclude_slot) continue;
        const Candidate c{haversine_distance(query, points_[slot]), ids_[slot]};
        if (best.size() < k) {
          best.push(c);
        } else if (c < best.top()) {
          best.pop();
          best.push(c);
        }
      }
      continue;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    // Visit the nearer child first (pushed last).
    if (box_lower_bound(q, l.lo, l.hi) <= box_lower_bound(q, r.lo, r.hi)) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }

  result.resize(best.size());
  for (std::size_t i = best.size(); i > 0; --i) {
    result[i - 1] = best.top().id;
    best.pop();
  }
  return result;
}

EntityId assign_neighborhood(const GeoPoint& point,
                             std::span<const std::pair<EntityId, GeoPoint>> centroids) {
  require(!centroids.empty(), ErrorKind::kInvalidInput, "assign_neighborhood: no centroids");
  validate(point);
  Candidate best{haversine_distance(point, centroids.front().second), centroids.front().first};
  for (const auto& [id, c] : centroids.subspan(1)) {
    const Candidate candidate{haversine_distance(point, c), id};
    if (candidate < best) best = candidate;
  }
  return best.id;
}

}  // namespace urban2vec
