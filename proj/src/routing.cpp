#include "mhspna/routing.hpp"

#include "mhspna/error.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace mhspna {

RoutingGraph::RoutingGraph(const SpatialNetwork& net) : net_(&net) {
  const std::size_t n = net.size();
  link_keys_.resize(n);
  for (std::size_t i = 0; i < n; ++i) link_keys_[i] = element_key(net.link(i).id);

  auto end_key = [this](std::size_t link, End e) {
    return mix_keys(link_keys_[link], static_cast<std::uint64_t>(index_of(e)) + 1);
  };

  offsets_.assign(2 * n + 1, 0);
  for (std::size_t s = 0; s < 2 * n; ++s) {
    const auto [link, entry] = RoutingState::from_index(s);
    const End out = opposite(entry);
    const Junction& j = net.junctions()[net.junction_at(link, out)];
    const Point dir = net.link(link).exit_direction(out);
    const std::uint64_t out_key = end_key(link, out);
    for (const LinkEnd& next : j.incident_ends) {
      if (next.link == link && next.end == out) continue;  // U-turn
      const double angle = deflection_degrees(dir, net.link(next.link).entry_direction(next.end));
      const std::uint64_t in_key = end_key(next.link, next.end);
      const std::uint64_t turn = mix_keys(std::min(out_key, in_key), std::max(out_key, in_key));
      transitions_.push_back(
          {static_cast<std::uint32_t>(RoutingState{next.link, next.end}.index()), angle, turn});
    }
    offsets_[s + 1] = static_cast<std::uint32_t>(transitions_.size());
  }
}

// --- search -----------------------------------------------------------------

ShortestPathSearch::ShortestPathSearch(const RoutingGraph& graph)
    : graph_(&graph),
      cost_(graph.state_count(), kInfinity),
      pred_(graph.state_count()),
      settled_(graph.state_count(), 0),
      link_cost_(graph.network().size(), -1.0) {}

void ShortestPathSearch::reset() {
  for (auto s : touched_) {
    cost_[s] = kInfinity;
    pred_[s] = Predecessor{};
    settled_[s] = 0;
  }
  touched_.clear();
  for (auto l : link_cost_touched_) link_cost_[l] = -1.0;
  link_cost_touched_.clear();
  order_valid_ = false;
}

double ShortestPathSearch::link_cost(std::size_t link) const {
  double& cached = link_cost_[link];
  if (cached < 0.0) {
    const Link& l = graph_->network().link(link);
    cached = radius_mode_ ? radius_cost(l)
                          : mhspna::link_cost(l, *params_, sample_rand(*stream_, graph_->link_key(link), *params_));
    link_cost_touched_.push_back(static_cast<std::uint32_t>(link));
  }
  return cached;
}

std::pair<std::size_t, int> ShortestPathSearch::pred_key(Predecessor p) const {
  if (p.is_state()) {
    const auto st = RoutingState::from_index(p.value);
    return {st.link, index_of(st.entry)};
  }
  if (p.value == Predecessor::kOriginStart) return {origin_, 2};
  if (p.value == Predecessor::kOriginFinish) return {origin_, 3};
  return {std::numeric_limits<std::size_t>::max(), 0};
}

bool ShortestPathSearch::better_pred(Predecessor candidate, Predecessor current) const {
  return pred_key(candidate) < pred_key(current);
}

namespace {

struct RoutingMetric {
  const MetricParams& params;
  const RandStream& stream;
  double turn(const Transition& t) const {
    if (params.a == 0.0) return 0.0;
    return turn_cost(t.angle, params, sample_rand(stream, t.turn_key, params));
  }
};

struct RadiusMetric {
  double turn(const Transition&) const { return 0.0; }
};

using QueueItem = std::pair<double, std::uint32_t>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

}  // namespace

template <typename Metric>
void ShortestPathSearch::run(std::size_t origin, const Metric& metric, std::span<const std::size_t> targets,
                             double bound) {
  reset();
  origin_ = origin;
  MinQueue queue;

  auto relax = [&](std::uint32_t to, double cost, Predecessor pred) {
    if (cost < cost_[to]) {
      if (cost_[to] == kInfinity) touched_.push_back(to);
      cost_[to] = cost;
      pred_[to] = pred;
      queue.emplace(cost, to);
    } else if (cost == cost_[to] && better_pred(pred, pred_[to])) {
      pred_[to] = pred;
    }
  };

  const double half = 0.5 * link_cost(origin);
  for (End out : {End::Start, End::Finish}) {
    const Predecessor p{out == End::Start ? Predecessor::kOriginStart : Predecessor::kOriginFinish};
    for (const Transition& t : graph_->exits(origin, out)) relax(t.to, half + metric.turn(t), p);
  }

  // Target bookkeeping: stop once every target's centre cost is final.
  std::size_t remaining = 0;
  std::vector<std::size_t> live_targets;
  for (auto z : targets) {
    if (z != origin) live_targets.push_back(z);
  }
  remaining = live_targets.size();
  const bool limited = !targets.empty();
  std::vector<char> known;
  if (limited) known.assign(graph_->network().size(), 0);
  std::vector<char> is_target;
  if (limited) {
    is_target.assign(graph_->network().size(), 0);
    for (auto z : live_targets) is_target[z] = 1;
    // Duplicates in `targets` collapse here.
    remaining = 0;
    for (auto z : live_targets) {
      if (is_target[z] == 1) {
        is_target[z] = 2;
        ++remaining;
      }
    }
  }
  double horizon = -kInfinity;
  auto centre_max = [&] {
    double m = -kInfinity;
    for (auto z : live_targets) m = std::max(m, centre_cost(z));
    return m;
  };

  while (!queue.empty()) {
    const auto [c, s] = queue.top();
    if (c > cost_[s] || settled_[s]) {
      queue.pop();
      continue;
    }
    if (c > bound) break;
    if (limited && remaining == 0 && c > horizon) {
      horizon = centre_max();
      if (c > horizon) break;
    }
    queue.pop();
    settled_[s] = 1;
    const std::size_t link = s / 2;
    if (limited && is_target[link] && !known[link]) {
      known[link] = 1;
      --remaining;
      if (remaining == 0) horizon = centre_max();
    }
    const double through = c + link_cost(link);
    for (const Transition& t : graph_->successors(s)) relax(t.to, through + metric.turn(t), Predecessor{s});
  }
}

void ShortestPathSearch::route(std::size_t origin, const MetricParams& params, const RandStream& stream,
                               std::span<const std::size_t> targets) {
  radius_mode_ = false;
  params_ = &params;
  stream_ = &stream;
  run(origin, RoutingMetric{params, stream}, targets, kInfinity);
}

void ShortestPathSearch::radius(std::size_t origin, double bound) {
  radius_mode_ = true;
  params_ = nullptr;
  stream_ = nullptr;
  run(origin, RadiusMetric{}, {}, bound);
}

double ShortestPathSearch::centre_cost(std::size_t link) const {
  if (link == origin_) return 0.0;
  const double c = std::min(cost_[2 * link], cost_[2 * link + 1]);
  if (c == kInfinity) return kInfinity;
  return c + 0.5 * link_cost(link);
}

End ShortestPathSearch::centre_entry(std::size_t link) const {
  const double c0 = cost_[2 * link];
  const double c1 = cost_[2 * link + 1];
  if (c0 < c1) return End::Start;
  if (c1 < c0) return End::Finish;
  return better_pred(pred_[2 * link + 1], pred_[2 * link]) ? End::Finish : End::Start;
}

const std::vector<std::uint32_t>& ShortestPathSearch::tree_order() {
  if (order_valid_) return order_;
  order_.clear();
  // Children lists over settled states, as a CSR keyed by position in touched_.
  std::vector<std::uint32_t> settled;
  for (auto s : touched_) {
    if (settled_[s]) settled.push_back(s);
  }
  std::sort(settled.begin(), settled.end());
  auto pos = [&](std::uint32_t s) {
    return static_cast<std::size_t>(std::lower_bound(settled.begin(), settled.end(), s) - settled.begin());
  };
  std::vector<std::uint32_t> first(settled.size() + 1, 0);
  for (auto s : settled) {
    const Predecessor p = pred_[s];
    if (p.is_state() && settled_[p.value]) ++first[pos(p.value) + 1];
  }
  for (std::size_t i = 1; i < first.size(); ++i) first[i] += first[i - 1];
  std::vector<std::uint32_t> fill(first.begin(), first.end() - 1);
  std::vector<std::uint32_t> children(first.back());
  for (auto s : settled) {
    const Predecessor p = pred_[s];
    if (p.is_state() && settled_[p.value]) children[fill[pos(p.value)]++] = s;
  }
  for (auto s : settled) {
    if (pred_[s].is_origin_exit()) order_.push_back(s);
  }
  for (std::size_t head = 0; head < order_.size(); ++head) {
    const auto i = pos(order_[head]);
    for (auto k = first[i]; k < first[i + 1]; ++k) order_.push_back(children[k]);
  }
  order_valid_ = true;
  return order_;
}

// --- PathTree -----------------------------------------------------------------

RandStream origin_stream(const RoutingGraph& graph, std::size_t origin, const MetricParams& params, int iteration) {
  return RandStream(params.seed, graph.link_key(origin), static_cast<std::uint64_t>(iteration));
}

std::vector<std::size_t> PathTree::path(std::size_t link) const {
  if (!reached(link)) return {};
  if (link == origin) return {origin};
  std::vector<std::size_t> out{link};
  Predecessor p = state_pred[2 * link + static_cast<std::size_t>(centre_entry[link])];
  while (p.is_state()) {
    out.push_back(p.value / 2);
    p = state_pred[p.value];
  }
  out.push_back(origin);
  std::reverse(out.begin(), out.end());
  return out;
}

PathTree shortest_path_tree(const RoutingGraph& graph, std::size_t origin, const MetricParams& params,
                            int rand_iteration) {
  params.validate();
  const SpatialNetwork& net = graph.network();
  const std::size_t n = net.size();
  if (origin >= n) throw DataError("origin link index out of range");

  PathTree tree;
  tree.origin = origin;
  ShortestPathSearch search(graph);
  const RandStream stream = origin_stream(graph, origin, params, rand_iteration);
  search.route(origin, params, stream);
  tree.origin_half_cost = 0.5 * search.link_cost(origin);
  tree.cost.resize(n);
  tree.centre_entry.assign(n, -1);
  tree.state_cost.resize(2 * n);
  tree.state_pred.resize(2 * n);
  for (std::size_t s = 0; s < 2 * n; ++s) {
    tree.state_cost[s] = search.state_cost(s);
    tree.state_pred[s] = search.state_pred(s);
  }
  for (std::size_t z = 0; z < n; ++z) {
    tree.cost[z] = search.centre_cost(z);
    if (z != origin && tree.cost[z] < kInfinity) tree.centre_entry[z] = index_of(search.centre_entry(z));
  }

  // Network-Euclidean distance along the chosen route, parents before children.
  std::vector<double> entry_radius(2 * n, kInfinity);
  tree.route_radius.assign(n, kInfinity);
  tree.route_radius[origin] = 0.0;
  const double origin_half_length = 0.5 * net.link(origin).length;
  for (auto s : search.tree_order()) {
    const Predecessor p = tree.state_pred[s];
    entry_radius[s] = p.is_state() ? entry_radius[p.value] + net.link(p.value / 2).length : origin_half_length;
  }
  for (std::size_t z = 0; z < n; ++z) {
    if (z == origin || tree.centre_entry[z] < 0) continue;
    tree.route_radius[z] = entry_radius[2 * z + static_cast<std::size_t>(tree.centre_entry[z])] +
                           0.5 * net.link(z).length;
  }

  search.radius(origin);
  tree.shortest_radius.resize(n);
  for (std::size_t z = 0; z < n; ++z) tree.shortest_radius[z] = search.centre_cost(z);
  return tree;
}

PathTree shortest_path_tree(const SpatialNetwork& net, std::string_view origin, const MetricParams& params,
                            int rand_iteration) {
  const RoutingGraph graph(net);
  return shortest_path_tree(graph, net.index_of_id(origin), params, rand_iteration);
}

// --- radius -------------------------------------------------------------------

bool RadiusSet::contains(std::size_t link) const {
  return std::any_of(members.begin(), members.end(), [link](const RadiusMember& m) { return m.link == link; });
}

RadiusSet radius_set(const RoutingGraph& graph, std::size_t origin, double rmin, double rmax) {
  if (!(rmin >= 0.0 && rmin < rmax)) throw DataError("radius band requires 0 <= rmin < rmax");
  ShortestPathSearch search(graph);
  search.radius(origin, rmax);
  RadiusSet set{origin, rmin, rmax, {}};
  for (std::size_t z = 0; z < graph.network().size(); ++z) {
    const double d = search.centre_cost(z);
    if (within_band(d, rmin, rmax)) set.members.push_back({z, d});
  }
  return set;
}

RadiusSet radius_set(const SpatialNetwork& net, std::string_view origin, double rmin, double rmax) {
  const RoutingGraph graph(net);
  return radius_set(graph, net.index_of_id(origin), rmin, rmax);
}

double length_within(double r, double length, double d_start, double d_finish) {
  if (!(r > 0.0)) return 0.0;
  const double from_start = std::clamp(r - d_start, 0.0, length);
  const double from_finish = std::clamp(r - d_finish, 0.0, length);
  return std::min(length, from_start + from_finish);
}

double origin_length_within(double r, double length) {
  if (!(r > 0.0)) return 0.0;
  return std::min(length, 2.0 * r);
}

double fraction_within_radius(const ShortestPathSearch& search, std::size_t target, double rmin, double rmax) {
  const double length = search.graph().network().link(target).length;
  if (target == search.origin()) {
    return (origin_length_within(rmax, length) - origin_length_within(rmin, length)) / length;
  }
  const double d0 = search.state_cost(2 * target);
  const double d1 = search.state_cost(2 * target + 1);
  return (length_within(rmax, length, d0, d1) - length_within(rmin, length, d0, d1)) / length;
}

double fraction_within_radius(const SpatialNetwork& net, std::string_view origin, std::string_view target,
                              double rmax) {
  const RoutingGraph graph(net);
  ShortestPathSearch search(graph);
  search.radius(net.index_of_id(origin), rmax);
  return fraction_within_radius(search, net.index_of_id(target), 0.0, rmax);
}

}  // namespace mhspna
