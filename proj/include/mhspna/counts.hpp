#pragma once

#include "mhspna/network.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mhspna {

inline constexpr double kDefaultCountSnapTolerance = 20.0;

/// One survey location with its flows by year (years are opaque labels).
struct CountSite {
  std::string id;
  Point position;
  std::map<std::string, double> observations;
};

/// A survey location resolved onto a network link.
struct CountPoint {
  std::string id;
  Point position;
  std::string link_id;
  std::size_t link = 0;
  std::map<std::string, double> observations;

  double observation(const std::string& year) const;  // throws DataError if absent
};

/// Parses `point_id,x,y,year,flow`. Flows must be strictly positive; rows for
/// the same point must agree on position. Sites come back ordered by id.
std::vector<CountSite> parse_counts_csv(std::istream& in, const std::string& source = "<counts>");
std::vector<CountSite> read_counts_csv(const std::filesystem::path& path);

void write_counts_csv(std::ostream& out, const std::vector<CountSite>& sites);
void write_counts_csv(const std::filesystem::path& path, const std::vector<CountSite>& sites);

/// Resolves each site to the nearest link within `tolerance` metres. Throws
/// DataError listing all unresolved points, or naming a point whose two
/// nearest links are equidistant within 1e-6 m.
std::vector<CountPoint> snap_count_points(const SpatialNetwork& net, const std::vector<CountSite>& sites,
                                          double tolerance = kDefaultCountSnapTolerance);

}  // namespace mhspna
