#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "text_util.hpp"
#include "urban2vec/dataset.hpp"
#include "urban2vec/error.hpp"

namespace urban2vec {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::ifstream open_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return in;
}

std::ofstream create_text(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.precision(17);
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool looks_like_header(std::string_view first_field) {
  EntityId probe = 0;
  return !detail::parse_number(first_field, probe);
}

std::string coords(const GeoPoint& p) {
  return "(" + detail::format_number(p.lat) + ", " + detail::format_number(p.lon) + ")";
}

// Collects offenders and throws once with all of them listed.
class Offenders {
 public:
  explicit Offenders(std::string what, ErrorKind kind = ErrorKind::kValidation)
      : what_(std::move(what)), kind_(kind) {}
  void add(std::string item) { items_.push_back(std::move(item)); }
  void raise_if_any() const {
    if (items_.empty()) return;
    std::string message = what_ + " (" + std::to_string(items_.size()) + "): ";
    for (std::size_t i = 0; i < items_.size() && i < 20; ++i) {
      if (i) message += "; ";
      message += items_[i];
    }
    if (items_.size() > 20) message += "; ...";
    fail(kind_, message);
  }

 private:
  std::string what_;
  ErrorKind kind_;
  std::vector<std::string> items_;
};

std::optional<EntityId> json_neighborhood(const json& value, const fs::path& path, std::size_t line) {
  if (value.is_null()) return std::nullopt;
  if (value.is_number_integer()) return value.get<EntityId>();
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (detail::trim(text).empty()) return std::nullopt;
    return detail::parse_or_fail<EntityId>(text, path, line, "neighborhood_id");
  }
  detail::format_error(path, line, "neighborhood_id must be an integer, string or null");
}

}  // namespace

AttributeTable AttributeTable::aligned_to(std::span<const EntityId> order) const {
  std::unordered_map<EntityId, Eigen::Index> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) rows.emplace(ids[i], static_cast<Eigen::Index>(i));
  AttributeTable out;
  out.names = names;
  out.ids.assign(order.begin(), order.end());
  out.values.resize(static_cast<Eigen::Index>(order.size()), values.cols());
  Offenders missing("neighborhood ids missing from the attribute table");
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto it = rows.find(order[i]);
    if (it == rows.end()) {
      missing.add(std::to_string(order[i]));
      continue;
    }
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(it->second);
  }
  missing.raise_if_any();
  return out;
}

std::vector<PoiRecord> read_poi_jsonl(const fs::path& path) {
  auto in = open_text(path);
  std::vector<PoiRecord> pois;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      detail::format_error(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) detail::format_error(path, line_no, "expected a JSON object");
    try {
      PoiRecord poi;
      const auto& id = obj.at("id");
      poi.id = id.is_string() ? id.get<std::string>() : id.dump();
      poi.geo = {obj.at("lat").get<double>(), obj.at("lon").get<double>()};
      if (obj.contains("neighborhood_id")) {
        poi.neighborhood_id = json_neighborhood(obj["neighborhood_id"], path, line_no);
      }
      if (obj.contains("categories") && !obj["categories"].is_null()) {
        poi.categories = obj["categories"].get<std::vector<std::string>>();
      }
      if (obj.contains("rating") && !obj["rating"].is_null()) poi.rating = obj["rating"].get<double>();
      if (obj.contains("price") && !obj["price"].is_null()) {
        const auto& price = obj["price"];
        if (!price.is_number_integer()) detail::format_error(path, line_no, "price must be an integer");
        poi.price = price.get<int>();
      }
      if (obj.contains("reviews") && !obj["reviews"].is_null()) {
        poi.reviews = obj["reviews"].get<std::vector<std::string>>();
      }
      pois.push_back(std::move(poi));
    } catch (const json::exception& e) {
      detail::format_error(path, line_no, e.what());
    }
  }
  return pois;
}

void write_poi_jsonl(const fs::path& path, std::span<const PoiRecord> pois) {
  auto out = create_text(path);
  for (const auto& poi : pois) {
    json obj = json::object();
    obj["id"] = poi.id;
    obj["lat"] = poi.geo.lat;
    obj["lon"] = poi.geo.lon;
    obj["neighborhood_id"] = poi.neighborhood_id ? json(*poi.neighborhood_id) : json(nullptr);
    obj["categories"] = poi.categories;
    obj["rating"] = poi.rating ? json(*poi.rating) : json(nullptr);
    obj["price"] = poi.price ? json(*poi.price) : json(nullptr);
    obj["reviews"] = poi.reviews;
    out << obj.dump() << '\n';
  }
  finish(out, path);
}

std::vector<StreetViewRecord> read_street_views_csv(const fs::path& path) {
  auto in = open_text(path);
  std::vector<StreetViewRecord> views;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (line_no == 1 && looks_like_header(fields[0])) continue;
    if (fields.size() < 3 || fields.size() > 4) {
      detail::format_error(path, line_no, "expected id,lat,lon[,neighborhood_id]");
    }
    StreetViewRecord view;
    view.id = detail::parse_or_fail<EntityId>(fields[0], path, line_no, "id");
    view.geo.lat = detail::parse_or_fail<double>(fields[1], path, line_no, "lat");
    view.geo.lon = detail::parse_or_fail<double>(fields[2], path, line_no, "lon");
    if (fields.size() == 4 && !detail::trim(fields[3]).empty()) {
      view.neighborhood_id = detail::parse_or_fail<EntityId>(fields[3], path, line_no, "neighborhood_id");
    }
    views.push_back(view);
  }
  return views;
}

void write_street_views_csv(const fs::path& path, std::span<const StreetViewRecord> views) {
  auto out = create_text(path);
  out << "id,lat,lon,neighborhood_id\n";
  for (const auto& v : views) {
    out << v.id << ',' << detail::format_number(v.geo.lat) << ','
        << detail::format_number(v.geo.lon) << ',';
    if (v.neighborhood_id) out << *v.neighborhood_id;
    out << '\n';
  }
  finish(out, path);
}

FeatureMatrix read_features_csv(const fs::path& path) {
  auto in = open_text(path);
  std::vector<EntityId> ids;
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (line_no == 1 && looks_like_header(fields[0])) continue;
    if (fields.size() < 2) detail::format_error(path, line_no, "expected id,f1..fD");
    if (!rows.empty() && fields.size() - 1 != rows.front().size()) {
      detail::format_error(path, line_no, "inconsistent feature count");
    }
    ids.push_back(detail::parse_or_fail<EntityId>(fields[0], path, line_no, "id"));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      row.push_back(detail::parse_or_fail<double>(fields[i], path, line_no, "feature"));
    }
    rows.push_back(std::move(row));
  }
  FeatureMatrix features;
  features.ids = std::move(ids);
  const auto width = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  features.values.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c < width; ++c) features.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return features;
}

void write_features_csv(const fs::path& path, const FeatureMatrix& features) {
  auto out = create_text(path);
  out << "id";
  for (Eigen::Index c = 0; c < features.values.cols(); ++c) out << ",f" << (c + 1);
  out << '\n';
  for (std::size_t r = 0; r < features.ids.size(); ++r) {
    out << features.ids[r];
    for (Eigen::Index c = 0; c < features.values.cols(); ++c) {
      out << ',' << detail::format_number(features.values(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
  finish(out, path);
}

bool is_feature_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(kFeatureMagic)] = {};
  in.read(magic, sizeof(magic));
  return in && std::memcmp(magic, kFeatureMagic, sizeof(magic)) == 0;
}

FeatureMatrix read_features_binary(const fs::path& path, std::vector<EntityId> binary_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  char magic[sizeof(kFeatureMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    fail(ErrorKind::kFormat, path.string() + ": not a GVFEAT01 feature table");
  }
  const std::uint32_t count = detail::read_u32(in);
  const std::uint32_t dim = detail::read_u32(in);
  if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated header");
  std::sort(binary_ids.begin(), binary_ids.end());
  if (binary_ids.size() != count) {
    fail(ErrorKind::kFormat, path.string() + ": holds " + std::to_string(count) +
                                 " rows but the id list has " + std::to_string(binary_ids.size()));
  }
  FeatureMatrix features;
  features.ids = std::move(binary_ids);
  features.values.resize(count, dim);
  std::vector<float> buffer(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (!in) fail(ErrorKind::kFormat, path.string() + ": truncated at row " + std::to_string(r));
    for (std::uint32_t c = 0; c < dim; ++c) features.values(r, c) = buffer[c];
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    fail(ErrorKind::kFormat, path.string() + ": trailing bytes after rows");
  }
  return features;
}

void write_features_binary(const fs::path& path, const FeatureMatrix& features) {
  require(features.ids.size() == static_cast<std::size_t>(features.values.rows()),
          ErrorKind::kInvalidInput, "write_features_binary: ids/rows mismatch");
  std::vector<std::size_t> order(features.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return features.ids[a] < features.ids[b]; });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  detail::write_u32(out, static_cast<std::uint32_t>(features.values.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(features.values.cols()));
  for (std::size_t r : order) {
    for (Eigen::Index c = 0; c < features.values.cols(); ++c) {
      detail::write_f32(out, static_cast<float>(features.values(static_cast<Eigen::Index>(r), c)));
    }
  }
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());
}

std::vector<Centroid> read_centroids_csv(const fs::path& path) {
  auto in = open_text(path);
  std::vector<Centroid> centroids;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (line_no == 1 && looks_like_header(fields[0])) continue;
    if (fields.size() < 3 || fields.size() > 4) detail::format_error(path, line_no, "expected id,lat,lon[,city]");
    Centroid c;
    c.id = detail::parse_or_fail<EntityId>(fields[0], path, line_no, "id");
    c.geo.lat = detail::parse_or_fail<double>(fields[1], path, line_no, "lat");
    c.geo.lon = detail::parse_or_fail<double>(fields[2], path, line_no, "lon");
    if (fields.size() == 4) c.city = std::string(detail::trim(fields[3]));
    centroids.push_back(std::move(c));
  }
  return centroids;
}

void write_centroids_csv(const fs::path& path, std::span<const Centroid> centroids) {
  auto out = create_text(path);
  out << "id,lat,lon,city\n";
  for (const auto& c : centroids) {
    out << c.id << ',' << detail::format_number(c.geo.lat) << ','
        << detail::format_number(c.geo.lon) << ',' << c.city << '\n';
  }
  finish(out, path);
}

AttributeTable read_attributes_csv(const fs::path& path) {
  auto in = open_text(path);
  AttributeTable table;
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_cr(raw);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (!have_header) {
      if (fields.size() < 2) detail::format_error(path, line_no, "header needs id plus at least one target");
      for (std::size_t i = 1; i < fields.size(); ++i) table.names.emplace_back(detail::trim(fields[i]));
      have_header = true;
      continue;
    }
    if (fields.size() != table.names.size() + 1) {
      detail::format_error(path, line_no, "expected " + std::to_string(table.names.size() + 1) + " columns");
    }
    table.ids.push_back(detail::parse_or_fail<EntityId>(fields[0], path, line_no, "neighborhood id"));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      row.push_back(detail::parse_or_fail<double>(fields[i], path, line_no, "target value"));
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorKind::kFormat, path.string() + ": empty attribute table");
  std::unordered_set<EntityId> seen;
  for (auto id : table.ids) {
    if (!seen.insert(id).second) {
      fail(ErrorKind::kDuplicateId, path.string() + ": duplicate neighborhood id " + std::to_string(id));
    }
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < table.names.size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

void write_attributes_csv(const fs::path& path, const AttributeTable& table) {
  auto out = create_text(path);
  out << "id";
  for (const auto& name : table.names) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out << table.ids[r];
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << ',' << detail::format_number(table.values(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
  finish(out, path);
}

std::vector<EntityId> UrbanDataset::neighborhood_ids() const {
  std::vector<EntityId> ids;
  ids.reserve(neighborhoods.size());
  for (const auto& n : neighborhoods) ids.push_back(n.id);
  return ids;
}

std::size_t UrbanDataset::neighborhood_row(EntityId id) const {
  const auto it = std::lower_bound(neighborhoods.begin(), neighborhoods.end(), id,
                                   [](const Centroid& c, EntityId v) { return c.id < v; });
  if (it == neighborhoods.end() || it->id != id) {
    fail(ErrorKind::kNotFound, "unknown neighborhood id " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - neighborhoods.begin());
}

std::vector<std::size_t> UrbanDataset::view_assignment() const {
  std::vector<std::size_t> rows;
  rows.reserve(street_views.size());
  for (const auto& v : street_views) rows.push_back(neighborhood_row(v.neighborhood_id.value()));
  return rows;
}

std::vector<WordBag> UrbanDataset::neighborhood_bags() const {
  std::vector<std::vector<PoiRecord>> grouped(neighborhoods.size());
  for (const auto& poi : pois) grouped[neighborhood_row(poi.neighborhood_id.value())].push_back(poi);
  std::vector<WordBag> bags;
  bags.reserve(grouped.size());
  for (const auto& group : grouped) bags.push_back(build_neighborhood_bag(group));
  return bags;
}

SpatialIndex UrbanDataset::build_view_index() const {
  std::vector<std::pair<EntityId, GeoPoint>> points;
  points.reserve(street_views.size());
  for (const auto& v : street_views) points.emplace_back(v.id, v.geo);
  return SpatialIndex::build(std::move(points));
}

UrbanDataset assemble_dataset(std::vector<Centroid> centroids,
                              std::vector<StreetViewRecord> views, FeatureMatrix features,
                              std::vector<PoiRecord> pois, const IngestOptions& options,
                              std::vector<std::string>* warnings) {
  auto warn = [&](std::string message) {
    if (warnings) warnings->push_back(std::move(message));
  };

  require(!centroids.empty(), ErrorKind::kValidation, "no neighborhoods given");
  std::sort(centroids.begin(), centroids.end(),
            [](const Centroid& a, const Centroid& b) { return a.id < b.id; });
  Offenders bad_centroids("invalid neighborhood centroids");
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    if (i > 0 && centroids[i].id == centroids[i - 1].id) {
      bad_centroids.add("duplicate id " + std::to_string(centroids[i].id));
    }
    if (!is_valid(centroids[i].geo)) {
      bad_centroids.add("neighborhood " + std::to_string(centroids[i].id) + " coordinate " +
                        coords(centroids[i].geo) + " out of range");
    }
  }
  bad_centroids.raise_if_any();

  std::vector<std::pair<EntityId, GeoPoint>> centroid_points;
  std::unordered_set<EntityId> known;
  for (const auto& c : centroids) {
    centroid_points.emplace_back(c.id, c.geo);
    known.insert(c.id);
  }

  auto resolve = [&](std::optional<EntityId>& neighborhood, const GeoPoint& geo,
                     const std::string& label, Offenders& dangling) {
    if (neighborhood) {
      if (!known.contains(*neighborhood)) {
        dangling.add(label + " -> unknown neighborhood " + std::to_string(*neighborhood));
      }
      return;
    }
    if (options.assign_missing) {
      neighborhood = assign_neighborhood(geo, centroid_points);
      return;
    }
    dangling.add(label + " has no neighborhood id");
  };

  std::sort(views.begin(), views.end(),
            [](const StreetViewRecord& a, const StreetViewRecord& b) { return a.id < b.id; });
  Offenders bad_views("street views failing validation");
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (i > 0 && views[i].id == views[i - 1].id) {
      bad_views.add("duplicate street view id " + std::to_string(views[i].id));
    }
    if (!is_valid(views[i].geo)) {
      bad_views.add("street view " + std::to_string(views[i].id) + " coordinate " +
                    coords(views[i].geo) + " out of range");
    }
  }
  bad_views.raise_if_any();

  Offenders bad_pois("POIs failing validation");
  std::unordered_set<std::string> poi_ids;
  for (const auto& poi : pois) {
    if (!poi_ids.insert(poi.id).second) bad_pois.add("duplicate POI id " + poi.id);
    try {
      validate(poi);
    } catch (const Error& e) {
      bad_pois.add(e.what());
    }
  }
  bad_pois.raise_if_any();

  Offenders dangling("records referencing missing neighborhoods", ErrorKind::kIntegrity);
  for (auto& v : views) resolve(v.neighborhood_id, v.geo, "street view " + std::to_string(v.id), dangling);
  for (auto& poi : pois) resolve(poi.neighborhood_id, poi.geo, "POI " + poi.id, dangling);
  dangling.raise_if_any();

  require(features.values.rows() == static_cast<Eigen::Index>(features.ids.size()),
          ErrorKind::kValidation, "feature ids do not match feature rows");
  require(features.values.cols() >= 1, ErrorKind::kValidation, "feature vectors are empty");
  require(features.values.allFinite(), ErrorKind::kValidation, "feature table holds non-finite values");
  std::unordered_map<EntityId, Eigen::Index> feature_rows;
  Offenders feature_problems("feature/street-view mismatch");
  for (std::size_t r = 0; r < features.ids.size(); ++r) {
    if (!feature_rows.emplace(features.ids[r], static_cast<Eigen::Index>(r)).second) {
      feature_problems.add("duplicate feature id " + std::to_string(features.ids[r]));
    }
  }
  std::unordered_set<EntityId> view_ids;
  for (const auto& v : views) {
    view_ids.insert(v.id);
    if (!feature_rows.contains(v.id)) feature_problems.add("street view " + std::to_string(v.id) + " has no features");
  }
  for (auto id : features.ids) {
    if (!view_ids.contains(id)) feature_problems.add("feature row " + std::to_string(id) + " has no street view record");
  }
  feature_problems.raise_if_any();

  UrbanDataset dataset;
  dataset.features.ids.reserve(views.size());
  dataset.features.values.resize(static_cast<Eigen::Index>(views.size()), features.values.cols());
  for (std::size_t i = 0; i < views.size(); ++i) {
    dataset.features.ids.push_back(views[i].id);
    dataset.features.values.row(static_cast<Eigen::Index>(i)) = features.values.row(feature_rows.at(views[i].id));
  }

  std::map<EntityId, std::size_t> view_counts;
  for (const auto& v : views) ++view_counts[*v.neighborhood_id];
  for (const auto& c : centroids) {
    if (!view_counts.contains(c.id)) warn("neighborhood " + std::to_string(c.id) + " has no street views");
  }

  dataset.neighborhoods = std::move(centroids);
  dataset.street_views = std::move(views);
  dataset.pois = std::move(pois);
  return dataset;
}

}  // namespace urban2vec
