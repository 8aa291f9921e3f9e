#include "mhspna/network.hpp"

#include "mhspna/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace mhspna {

LinkMetrics compute_link_metrics(std::span<const Point> geometry) {
  return {polyline_length(geometry), polyline_curvature(geometry)};
}

double Link::weight(std::string_view field) const {
  if (field == kEverywhere) return 1.0;
  auto it = weights.find(field);
  return it == weights.end() ? 0.0 : it->second;
}

Point Link::exit_direction(End e) const {
  const std::size_t n = geometry.size();
  if (e == End::Finish) return (geometry[n - 1] - geometry[n - 2]).normalized();
  return (geometry[0] - geometry[1]).normalized();
}

Point Link::entry_direction(End e) const { return -exit_direction(e); }

Link make_link(std::string id, std::vector<Point> geometry, std::map<std::string, double, std::less<>> weights) {
  std::vector<Point> pts;
  pts.reserve(geometry.size());
  for (const auto& p : geometry) {
    if (!p.allFinite()) throw DataError("malformed geometry: link '" + id + "' has a non-finite coordinate");
    if (pts.empty() || pts.back() != p) pts.push_back(p);
  }
  if (pts.size() < 2) {
    throw DataError("malformed geometry: link '" + id + "' needs at least two distinct points");
  }
  for (const auto& [name, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw DataError("weight '" + name + "' on link '" + id + "' must be a nonnegative number");
    }
  }
  Link link;
  link.id = std::move(id);
  link.geometry = std::move(pts);
  const auto metrics = compute_link_metrics(link.geometry);
  link.length = metrics.length;
  link.angular_curvature = metrics.angular_curvature;
  link.weights = std::move(weights);
  return link;
}

namespace {

struct CellKey {
  std::int64_t x, y;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return std::hash<std::int64_t>{}(k.x * 73856093 ^ k.y * 19349663);
  }
};

}  // namespace

SpatialNetwork SpatialNetwork::build(std::vector<Link> links, double snap_tolerance) {
  if (!(snap_tolerance >= 0.0)) throw DataError("snap tolerance must be nonnegative");
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });

  SpatialNetwork net;
  net.snap_tolerance_ = snap_tolerance;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (i > 0 && links[i].id == links[i - 1].id) throw DataError("duplicate link id '" + links[i].id + "'");
    net.by_id_.emplace(links[i].id, i);
    for (const auto& [name, w] : links[i].weights) net.weight_fields_.insert(name);
  }
  net.links_ = std::move(links);
  net.link_junctions_.resize(net.links_.size());

  const double cell = std::max(snap_tolerance, 1e-9);
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  auto cell_of = [cell](const Point& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                   static_cast<std::int64_t>(std::floor(p.y() / cell))};
  };

  for (std::size_t i = 0; i < net.links_.size(); ++i) {
    for (End e : {End::Start, End::Finish}) {
      const Point& p = net.links_[i].endpoint(e);
      const CellKey c = cell_of(p);
      std::size_t best = std::numeric_limits<std::size_t>::max();
      double best_d = std::numeric_limits<double>::infinity();
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({c.x + dx, c.y + dy});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            const double d = (net.junctions_[j].position - p).norm();
            if (d <= snap_tolerance && (d < best_d || (d == best_d && j < best))) {
              best = j;
              best_d = d;
            }
          }
        }
      }
      if (best == std::numeric_limits<std::size_t>::max()) {
        best = net.junctions_.size();
        net.junctions_.push_back({p, {}});
        grid[c].push_back(best);
      }
      net.junctions_[best].incident_ends.push_back({i, e});
      net.link_junctions_[i][index_of(e)] = best;
    }
  }
  return net;
}

std::optional<std::size_t> SpatialNetwork::find(std::string_view id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t SpatialNetwork::index_of_id(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw DataError("unknown link id '" + std::string(id) + "'");
}

bool SpatialNetwork::has_weight_field(std::string_view name) const {
  return name == kEverywhere || weight_fields_.contains(name);
}

double SpatialNetwork::total_length() const {
  double total = 0.0;
  for (const auto& l : links_) total += l.length;
  return total;
}

// --- GeoJSON ---------------------------------------------------------------

namespace {

bool is_geographic_crs(const nlohmann::json& doc) {
  if (!doc.contains("crs")) return false;
  const std::string text = doc["crs"].dump();
  for (const char* tag : {"4326", "CRS84", "4258", "4269", "CRS83"}) {
    if (text.find(tag) != std::string::npos) return true;
  }
  return false;
}

std::string feature_id(const nlohmann::json& feature, std::size_t index) {
  const nlohmann::json* id = nullptr;
  if (feature.contains("properties") && feature["properties"].is_object() && feature["properties"].contains("id")) {
    id = &feature["properties"]["id"];
  } else if (feature.contains("id")) {
    id = &feature["id"];
  }
  if (id == nullptr || id->is_null()) throw DataError("feature " + std::to_string(index) + " has no id property");
  if (id->is_string()) return id->get<std::string>();
  if (id->is_number_integer()) return std::to_string(id->get<std::int64_t>());
  throw DataError("feature " + std::to_string(index) + " has a non-string id");
}

}  // namespace

SpatialNetwork network_from_geojson(const nlohmann::json& doc, const std::vector<std::string>& weight_fields,
                                    double snap_tolerance) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw DataError("network file must be a GeoJSON FeatureCollection");
  }
  if (is_geographic_crs(doc)) {
    throw DataError("network uses a geographic CRS; reproject to a planar metric CRS before loading");
  }

  std::vector<Link> links;
  Eigen::AlignedBox2d bbox;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const std::string id = feature_id(feature, index);
    const auto& geom = feature.contains("geometry") ? feature["geometry"] : nlohmann::json();
    if (!geom.is_object() || geom.value("type", "") != "LineString" || !geom.contains("coordinates") ||
        !geom["coordinates"].is_array()) {
      throw DataError("malformed geometry: feature '" + id + "' is not a LineString");
    }
    std::vector<Point> pts;
    for (const auto& c : geom["coordinates"]) {
      if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
        throw DataError("malformed geometry: feature '" + id + "' has an invalid coordinate");
      }
      pts.emplace_back(c[0].get<double>(), c[1].get<double>());
      bbox.extend(pts.back());
    }

    std::map<std::string, double, std::less<>> weights;
    const auto& props = feature.contains("properties") && feature["properties"].is_object()
                            ? feature["properties"]
                            : nlohmann::json::object();
    if (weight_fields.empty()) {
      for (const auto& [key, value] : props.items()) {
        if (key != "id" && value.is_number()) weights[key] = value.get<double>();
      }
    } else {
      for (const auto& name : weight_fields) {
        if (name == kEverywhere || !props.contains(name) || props[name].is_null()) continue;
        if (!props[name].is_number()) {
          throw DataError("weight field '" + name + "' on feature '" + id + "' is not numeric");
        }
        weights[name] = props[name].get<double>();
      }
    }
    links.push_back(make_link(id, std::move(pts), std::move(weights)));
    ++index;
  }

  if (!links.empty()) {
    const Point lo = bbox.min(), hi = bbox.max();
    const bool lonlat_range = lo.x() >= -180 && hi.x() <= 180 && lo.y() >= -90 && hi.y() <= 90;
    const Point extent = hi - lo;
    if (lonlat_range && extent.x() < 1.0 && extent.y() < 1.0) {
      throw DataError("network coordinates look geographic (degrees); reproject to a planar metric CRS");
    }
  }
  return SpatialNetwork::build(std::move(links), snap_tolerance);
}

SpatialNetwork load_network(const std::filesystem::path& path, const std::vector<std::string>& weight_fields,
                            double snap_tolerance) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse '" + path.string() + "': " + e.what());
  }
  try {
    return network_from_geojson(doc, weight_fields, snap_tolerance);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

nlohmann::json network_to_geojson(const SpatialNetwork& net, const LinkColumns& extra) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Link& l = net.link(i);
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : l.geometry) coords.push_back({p.x(), p.y()});
    nlohmann::json props = {{"id", l.id}};
    for (const auto& [name, w] : l.weights) props[name] = w;
    for (const auto& [name, column] : extra) props[name] = column.at(i);
    features.push_back({{"type", "Feature"},
                        {"properties", std::move(props)},
                        {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}}});
  }
  return {{"type", "FeatureCollection"}, {"schema_version", 1}, {"features", std::move(features)}};
}

void save_network(const std::filesystem::path& path, const SpatialNetwork& net, const LinkColumns& extra) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << network_to_geojson(net, extra).dump(1) << '\n';
}

}  // namespace mhspna
