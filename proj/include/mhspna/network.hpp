#pragma once

#include "mhspna/geometry.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mhspna {

inline constexpr double kDefaultSnapTolerance = 0.5;

/// Name of the synthetic weight field that is 1 on every link.
inline constexpr std::string_view kEverywhere = "everywhere";

enum class End : std::uint8_t { Start = 0, Finish = 1 };

constexpr End opposite(End e) { return e == End::Start ? End::Finish : End::Start; }
constexpr int index_of(End e) { return static_cast<int>(e); }

struct LinkEnd {
  std::size_t link;
  End end;
  friend bool operator==(const LinkEnd&, const LinkEnd&) = default;
};

struct LinkMetrics {
  double length;
  double angular_curvature;  // degrees
};

LinkMetrics compute_link_metrics(std::span<const Point> geometry);

struct Link {
  std::string id;
  std::vector<Point> geometry;
  double length = 0.0;
  double angular_curvature = 0.0;
  std::map<std::string, double, std::less<>> weights;

  /// Face-value weight; absent fields are 0 and `everywhere` is always 1.
  double weight(std::string_view field) const;

  const Point& endpoint(End e) const { return e == End::Start ? geometry.front() : geometry.back(); }

  /// Unit direction of travel when leaving the link through end `e`.
  Point exit_direction(End e) const;
  /// Unit direction of travel when entering the link at end `e`.
  Point entry_direction(End e) const;
};

/// Validates the geometry (drops exact consecutive repeats) and fills in the
/// derived metrics. Throws DataError("malformed geometry ...") on fewer than
/// two distinct points or non-finite coordinates.
Link make_link(std::string id, std::vector<Point> geometry,
               std::map<std::string, double, std::less<>> weights = {});

struct Junction {
  Point position;
  std::vector<LinkEnd> incident_ends;
};

/// Undirected link/junction graph. Links are stored sorted by id so that
/// link index order is lexicographic id order.
class SpatialNetwork {
 public:
  SpatialNetwork() = default;

  /// Builds the junction structure by merging endpoints that lie within
  /// `snap_tolerance` of an existing junction. Throws on duplicate ids.
  static SpatialNetwork build(std::vector<Link> links, double snap_tolerance = kDefaultSnapTolerance);

  const std::vector<Link>& links() const { return links_; }
  const std::vector<Junction>& junctions() const { return junctions_; }
  const Link& link(std::size_t i) const { return links_[i]; }
  std::size_t size() const { return links_.size(); }

  std::size_t junction_at(std::size_t link, End e) const { return link_junctions_[link][index_of(e)]; }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of_id(std::string_view id) const;  // throws DataError if unknown

  const std::set<std::string, std::less<>>& weight_field_names() const { return weight_fields_; }
  bool has_weight_field(std::string_view name) const;

  double snap_tolerance() const { return snap_tolerance_; }
  double total_length() const;

 private:
  std::vector<Link> links_;
  std::vector<Junction> junctions_;
  std::vector<std::array<std::size_t, 2>> link_junctions_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::set<std::string, std::less<>> weight_fields_;
  double snap_tolerance_ = kDefaultSnapTolerance;
};

/// Parses a GeoJSON FeatureCollection of LineStrings. When `weight_fields`
/// is empty every numeric property other than `id` is taken as a weight.
SpatialNetwork network_from_geojson(const nlohmann::json& doc, const std::vector<std::string>& weight_fields,
                                    double snap_tolerance = kDefaultSnapTolerance);

SpatialNetwork load_network(const std::filesystem::path& path, const std::vector<std::string>& weight_fields = {},
                            double snap_tolerance = kDefaultSnapTolerance);

/// Extra per-link properties written alongside the weights, keyed by column.
using LinkColumns = std::vector<std::pair<std::string, std::vector<double>>>;

nlohmann::json network_to_geojson(const SpatialNetwork& net, const LinkColumns& extra = {});

void save_network(const std::filesystem::path& path, const SpatialNetwork& net, const LinkColumns& extra = {});

// --- prepare -------------------------------------------------------------

struct PrepareOptions {
  bool keep_islands = false;
};

struct SplitRecord {
  std::string original;
  std::vector<std::string> parts;
};

struct PrepareReport {
  std::vector<std::string> duplicates_removed;
  std::vector<SplitRecord> splits;
  /// Link ids of every component other than the largest one.
  std::vector<std::vector<std::string>> components_flagged;
  bool islands_removed = false;
  double length_removed = 0.0;

  bool empty() const { return duplicates_removed.empty() && splits.empty() && components_flagged.empty(); }
};

nlohmann::json to_json(const PrepareReport& report);

struct PreparedNetwork {
  SpatialNetwork network;
  PrepareReport report;
};

PreparedNetwork prepare_network(const SpatialNetwork& net, const PrepareOptions& options = {});

}  // namespace mhspna
