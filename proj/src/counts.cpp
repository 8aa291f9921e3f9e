#include "mhspna/counts.hpp"

#include "mhspna/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mhspna {

double CountPoint::observation(const std::string& year) const {
  auto it = observations.find(year);
  if (it == observations.end()) throw DataError("count point '" + id + "' has no observation for year " + year);
  return it->second;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw DataError(where + ": '" + text + "' is not a number");
  }
  return value;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<CountSite> parse_counts_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty counts file");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"point_id", "x", "y", "year", "flow"}) {
    throw DataError(source + ":1: expected header point_id,x,y,year,flow");
  }
  std::map<std::string, CountSite> sites;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw DataError(where + ": expected 5 columns");
    const Point pos(parse_number(cells[1], where), parse_number(cells[2], where));
    const double flow = parse_number(cells[4], where);
    if (!(flow > 0.0)) {
      throw DataError(where + ": flow must be > 0 (observation weights y^(lambda_w-1) are undefined for y <= 0)");
    }
    auto [it, inserted] = sites.try_emplace(cells[0], CountSite{cells[0], pos, {}});
    if (!inserted && (it->second.position - pos).norm() > 1e-9) {
      throw DataError(where + ": point '" + cells[0] + "' appears at two different positions");
    }
    if (!it->second.observations.emplace(cells[3], flow).second) {
      throw DataError(where + ": duplicate row for point '" + cells[0] + "' year " + cells[3]);
    }
  }
  std::vector<CountSite> out;
  for (auto& [id, site] : sites) out.push_back(std::move(site));
  return out;
}

std::vector<CountSite> read_counts_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open counts file '" + path.string() + "'");
  return parse_counts_csv(in, path.string());
}

void write_counts_csv(std::ostream& out, const std::vector<CountSite>& sites) {
  out << "point_id,x,y,year,flow\n";
  for (const auto& s : sites) {
    for (const auto& [year, flow] : s.observations) {
      out << s.id << ',' << format_number(s.position.x()) << ',' << format_number(s.position.y()) << ',' << year
          << ',' << format_number(flow) << '\n';
    }
  }
}

void write_counts_csv(const std::filesystem::path& path, const std::vector<CountSite>& sites) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_counts_csv(out, sites);
}

std::vector<CountPoint> snap_count_points(const SpatialNetwork& net, const std::vector<CountSite>& sites,
                                          double tolerance) {
  if (!(tolerance > 0.0)) throw DataError("count snap tolerance must be > 0");
  std::vector<CountPoint> out;
  std::vector<std::string> unresolved;
  for (const auto& site : sites) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    std::size_t best_link = 0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      const double d = distance_to_polyline(site.position, net.link(i).geometry);
      if (d < best) {
        second = best;
        best = d;
        best_link = i;
      } else if (d < second) {
        second = d;
      }
    }
    if (!(best <= tolerance)) {
      unresolved.push_back(site.id);
      continue;
    }
    if (second - best <= 1e-6) {
      throw DataError("count point '" + site.id + "' is equidistant from two links; move it onto one link");
    }
    out.push_back({site.id, site.position, net.link(best_link).id, best_link, site.observations});
  }
  if (!unresolved.empty()) {
    std::string msg = "unresolved count points (no link within " + format_number(tolerance) + " m):";
    for (const auto& id : unresolved) msg += " " + id;
    throw DataError(msg);
  }
  return out;
}

}  // namespace mhspna
