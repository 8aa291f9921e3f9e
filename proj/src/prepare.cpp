#include "mhspna/network.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace mhspna {

namespace {

struct SplitPoint {
  double s;  // arc length along the link
  std::size_t segment;
  Point at;
};

/// Junctions lying on the interior of a link, by arc length.
std::vector<SplitPoint> interior_junctions(const SpatialNetwork& net, std::size_t li) {
  const Link& link = net.link(li);
  const double tol = net.snap_tolerance();
  Eigen::AlignedBox2d box;
  for (const auto& p : link.geometry) box.extend(p);
  box.min().array() -= tol;
  box.max().array() += tol;

  std::vector<SplitPoint> out;
  for (std::size_t j = 0; j < net.junctions().size(); ++j) {
    if (j == net.junction_at(li, End::Start) || j == net.junction_at(li, End::Finish)) continue;
    const Point& q = net.junctions()[j].position;
    if (!box.contains(q)) continue;
    double s0 = 0.0;
    std::optional<SplitPoint> best;
    double best_d = tol;
    for (std::size_t k = 1; k < link.geometry.size(); ++k) {
      const Point& a = link.geometry[k - 1];
      const Point& b = link.geometry[k];
      const double seg = (b - a).norm();
      const auto proj = project_onto_segment(q, a, b);
      if (proj.distance <= best_d) {
        best_d = proj.distance;
        best = SplitPoint{s0 + proj.t * seg, k - 1, a + proj.t * (b - a)};
      }
      s0 += seg;
    }
    if (best && best->s > tol && best->s < link.length - tol) out.push_back(*best);
  }
  std::sort(out.begin(), out.end(), [](const SplitPoint& a, const SplitPoint& b) { return a.s < b.s; });
  out.erase(std::unique(out.begin(), out.end(), [](const SplitPoint& a, const SplitPoint& b) { return a.s == b.s; }),
            out.end());
  return out;
}

std::vector<Link> split_link(const Link& link, const std::vector<SplitPoint>& cuts,
                             const std::set<std::string, std::less<>>& taken) {
  std::vector<std::vector<Point>> pieces(1);
  pieces.back().push_back(link.geometry.front());
  std::size_t next_cut = 0;
  for (std::size_t k = 1; k < link.geometry.size(); ++k) {
    while (next_cut < cuts.size() && cuts[next_cut].segment == k - 1) {
      pieces.back().push_back(cuts[next_cut].at);
      pieces.emplace_back();
      pieces.back().push_back(cuts[next_cut].at);
      ++next_cut;
    }
    pieces.back().push_back(link.geometry[k]);
  }

  std::vector<Link> out;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    std::string id = link.id + "_" + std::to_string(p + 1);
    while (taken.contains(id)) id += "_";
    const double fraction = polyline_length(pieces[p]) / link.length;
    auto weights = link.weights;
    for (auto& [name, w] : weights) w *= fraction;
    out.push_back(make_link(std::move(id), std::move(pieces[p]), std::move(weights)));
  }
  return out;
}

std::vector<Point> canonical_geometry(const Link& l) {
  std::vector<Point> fwd = l.geometry;
  std::vector<Point> rev(fwd.rbegin(), fwd.rend());
  auto less = [](const std::vector<Point>& a, const std::vector<Point>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](const Point& p, const Point& q) {
      return std::tie(p.x(), p.y()) < std::tie(q.x(), q.y());
    });
  };
  return less(rev, fwd) ? rev : fwd;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

nlohmann::json to_json(const PrepareReport& report) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : report.splits) splits.push_back({{"original", s.original}, {"parts", s.parts}});
  return {{"schema_version", 1},
          {"duplicates_removed", report.duplicates_removed},
          {"splits", std::move(splits)},
          {"components_flagged", report.components_flagged},
          {"islands_removed", report.islands_removed},
          {"length_removed", report.length_removed}};
}

PreparedNetwork prepare_network(const SpatialNetwork& net, const PrepareOptions& options) {
  PrepareReport report;

  // 1. Split links passing through a junction mid-geometry.
  std::set<std::string, std::less<>> taken;
  for (const auto& l : net.links()) taken.insert(l.id);
  std::vector<Link> links;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto cuts = interior_junctions(net, i);
    if (cuts.empty()) {
      links.push_back(net.link(i));
      continue;
    }
    auto parts = split_link(net.link(i), cuts, taken);
    SplitRecord record{net.link(i).id, {}};
    for (auto& p : parts) {
      taken.insert(p.id);
      record.parts.push_back(p.id);
      links.push_back(std::move(p));
    }
    report.splits.push_back(std::move(record));
  }
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });

  // 2. Exact duplicates: same geometry (either direction) and same weights.
  std::map<std::pair<std::vector<std::pair<double, double>>, std::map<std::string, double, std::less<>>>, std::string>
      seen;
  std::vector<Link> unique_links;
  for (auto& l : links) {
    std::vector<std::pair<double, double>> key;
    for (const auto& p : canonical_geometry(l)) key.emplace_back(p.x(), p.y());
    auto [it, inserted] = seen.try_emplace({std::move(key), l.weights}, l.id);
    if (inserted) {
      unique_links.push_back(std::move(l));
    } else {
      report.duplicates_removed.push_back(l.id);
      report.length_removed += l.length;
    }
  }

  SpatialNetwork rebuilt = (report.splits.empty() && report.duplicates_removed.empty())
                               ? net
                               : SpatialNetwork::build(std::move(unique_links), net.snap_tolerance());

  // 3. Connected components over junctions.
  const std::size_t nj = rebuilt.junctions().size();
  std::vector<std::size_t> parent(nj);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < rebuilt.size(); ++i) {
    const auto a = find_root(parent, rebuilt.junction_at(i, End::Start));
    const auto b = find_root(parent, rebuilt.junction_at(i, End::Finish));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < rebuilt.size(); ++i) {
    components[find_root(parent, rebuilt.junction_at(i, End::Start))].push_back(i);
  }
  if (components.size() > 1) {
    auto total = [&](const std::vector<std::size_t>& c) {
      double s = 0.0;
      for (auto i : c) s += rebuilt.link(i).length;
      return s;
    };
    // Largest by link count, then length, then smallest link id.
    const std::vector<std::size_t>* keep = nullptr;
    for (const auto& [root, members] : components) {
      if (keep == nullptr || members.size() > keep->size()) {
        keep = &members;
        continue;
      }
      if (members.size() < keep->size()) continue;
      const double a = total(members), b = total(*keep);
      if (a > b || (a == b && members.front() < keep->front())) keep = &members;
    }
    std::vector<std::vector<std::size_t>> flagged;
    for (const auto& [root, members] : components) {
      if (&members != keep) flagged.push_back(members);
    }
    std::sort(flagged.begin(), flagged.end(),
              [&](const auto& a, const auto& b) { return rebuilt.link(a[0]).id < rebuilt.link(b[0]).id; });
    for (const auto& members : flagged) {
      std::vector<std::string> ids;
      for (auto i : members) ids.push_back(rebuilt.link(i).id);
      report.components_flagged.push_back(std::move(ids));
    }
    if (!options.keep_islands) {
      report.islands_removed = true;
      std::vector<Link> kept;
      for (auto i : *keep) kept.push_back(rebuilt.link(i));
      for (const auto& members : flagged) {
        for (auto i : members) report.length_removed += rebuilt.link(i).length;
      }
      rebuilt = SpatialNetwork::build(std::move(kept), net.snap_tolerance());
    }
  }
  return {std::move(rebuilt), std::move(report)};
}

}  // namespace mhspna
