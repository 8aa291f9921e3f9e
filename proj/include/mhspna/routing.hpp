#pragma once

#include "mhspna/metric.hpp"
#include "mhspna/network.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace mhspna {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// A directed traversal of a link: the link entered at `entry`, leaving
/// through the opposite end. Every link has exactly two states.
struct RoutingState {
  std::size_t link;
  End entry;

  std::size_t index() const { return 2 * link + static_cast<std::size_t>(index_of(entry)); }
  static RoutingState from_index(std::size_t s) { return {s / 2, static_cast<End>(s % 2)}; }
};

/// Moving from one state into the next across a junction.
struct Transition {
  std::uint32_t to;        // successor state index
  double angle;            // deflection in degrees, [0, 180]
  std::uint64_t turn_key;  // random-stream key, symmetric in the two link ends
};

/// Edge-based (dual) adjacency of a network. U-turns back onto the link just
/// left are excluded.
class RoutingGraph {
 public:
  explicit RoutingGraph(const SpatialNetwork& net);

  const SpatialNetwork& network() const { return *net_; }
  std::size_t state_count() const { return 2 * net_->size(); }

  /// Transitions available after traversing `state`.
  std::span<const Transition> successors(std::size_t state) const {
    return {transitions_.data() + offsets_[state], transitions_.data() + offsets_[state + 1]};
  }
  /// Transitions available when leaving `link`'s centre through `exit_end`.
  std::span<const Transition> exits(std::size_t link, End exit_end) const {
    return successors(RoutingState{link, opposite(exit_end)}.index());
  }

  std::uint64_t link_key(std::size_t link) const { return link_keys_[link]; }

 private:
  const SpatialNetwork* net_;
  std::vector<std::uint32_t> offsets_;
  std::vector<Transition> transitions_;
  std::vector<std::uint64_t> link_keys_;
};

/// Predecessor of a routing state in a shortest-path tree: another state,
/// the origin's centre leaving through one of its ends, or nothing.
struct Predecessor {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  static constexpr std::uint32_t kOriginStart = kNone - 1;   // origin left via End::Start
  static constexpr std::uint32_t kOriginFinish = kNone - 2;  // origin left via End::Finish

  std::uint32_t value = kNone;

  bool is_state() const { return value < kOriginFinish; }
  bool is_origin_exit() const { return value == kOriginStart || value == kOriginFinish; }
  bool is_none() const { return value == kNone; }
};

/// Reusable single-source search over routing states. Not thread-safe; use
/// one per worker.
///
/// Ties between equal-cost predecessors are broken towards the predecessor
/// with the smaller (link index, end) key, where link index order is
/// lexicographic id order. An origin exit through end e ranks as (origin, 2+e).
class ShortestPathSearch {
 public:
  explicit ShortestPathSearch(const RoutingGraph& graph);

  /// Hybrid randomized metric. With `targets` non-empty the search stops once
  /// the centre cost and predecessor chain of every reachable target is final.
  void route(std::size_t origin, const MetricParams& params, const RandStream& stream,
             std::span<const std::size_t> targets = {});

  /// Network-Euclidean metric, settling every state whose entry distance is
  /// at most `bound`.
  void radius(std::size_t origin, double bound = kInfinity);

  std::size_t origin() const { return origin_; }
  double state_cost(std::size_t s) const { return cost_[s]; }
  Predecessor state_pred(std::size_t s) const { return pred_[s]; }
  bool settled(std::size_t s) const { return settled_[s]; }

  /// Full cost of traversing `link` under the metric of the last run.
  double link_cost(std::size_t link) const;

  /// Centre-to-centre cost from the origin; 0 for the origin itself and
  /// infinity when not reached.
  double centre_cost(std::size_t link) const;
  /// Entry end whose state carries the path to `link`'s centre.
  End centre_entry(std::size_t link) const;

  /// Settled states, parents before children.
  const std::vector<std::uint32_t>& tree_order();

  const RoutingGraph& graph() const { return *graph_; }

 private:
  template <typename Metric>
  void run(std::size_t origin, const Metric& metric, std::span<const std::size_t> targets, double bound);
  void reset();
  bool better_pred(Predecessor candidate, Predecessor current) const;
  std::pair<std::size_t, int> pred_key(Predecessor p) const;

  const RoutingGraph* graph_;
  std::size_t origin_ = 0;
  std::vector<double> cost_;
  std::vector<Predecessor> pred_;
  std::vector<char> settled_;
  std::vector<std::uint32_t> touched_;
  mutable std::vector<double> link_cost_;
  mutable std::vector<std::uint32_t> link_cost_touched_;
  std::vector<std::uint32_t> order_;
  bool order_valid_ = false;
  const MetricParams* params_ = nullptr;
  const RandStream* stream_ = nullptr;
  bool radius_mode_ = false;
};

/// Single-source shortest-path structure from one origin link's centre.
struct PathTree {
  std::size_t origin = 0;
  /// Half the origin link's own routing cost: the offset from its centre to
  /// either of its ends, included in every other link's cost.
  double origin_half_cost = 0.0;
  std::vector<double> cost;             // centre-to-centre routing cost per link
  std::vector<double> route_radius;     // network-Euclidean metres along the chosen route
  std::vector<double> shortest_radius;  // true shortest network-Euclidean distance
  std::vector<double> state_cost;       // cost on entering each routing state
  std::vector<Predecessor> state_pred;
  std::vector<int> centre_entry;        // -1 when unreached or for the origin

  bool reached(std::size_t link) const { return cost[link] < kInfinity; }
  /// Link sequence origin, ..., link. Empty when unreached.
  std::vector<std::size_t> path(std::size_t link) const;
};

PathTree shortest_path_tree(const SpatialNetwork& net, std::string_view origin, const MetricParams& params,
                            int rand_iteration);
PathTree shortest_path_tree(const RoutingGraph& graph, std::size_t origin, const MetricParams& params,
                            int rand_iteration);

/// The stream used for one (origin, oversample iteration).
RandStream origin_stream(const RoutingGraph& graph, std::size_t origin, const MetricParams& params, int iteration);

struct RadiusMember {
  std::size_t link;
  double distance;  // centre-to-centre network-Euclidean metres
};

struct RadiusSet {
  std::size_t origin = 0;
  double rmin = 0.0;
  double rmax = kInfinity;
  std::vector<RadiusMember> members;  // ordered by link index

  bool contains(std::size_t link) const;
};

/// Membership test shared by every radius-constrained computation: the
/// origin (distance 0) belongs when rmin == 0, everything else needs
/// rmin < d <= rmax.
inline bool within_band(double distance, double rmin, double rmax) {
  if (!(distance <= rmax)) return false;
  return rmin == 0.0 ? true : distance > rmin;
}

RadiusSet radius_set(const SpatialNetwork& net, std::string_view origin, double rmin, double rmax);
RadiusSet radius_set(const RoutingGraph& graph, std::size_t origin, double rmin, double rmax);

/// Fraction of a link's length lying within `r` of the origin centre when
/// entered from its ends at network distances d_start/d_finish.
double length_within(double r, double length, double d_start, double d_finish);
/// Same for the origin link itself, measured from its own centre.
double origin_length_within(double r, double length);

/// Fraction of `target`'s length whose network-Euclidean distance from the
/// origin centre lies in (rmin, rmax]; interpolates linearly from each end.
double fraction_within_radius(const ShortestPathSearch& radius_search, std::size_t target, double rmin,
                              double rmax);
double fraction_within_radius(const SpatialNetwork& net, std::string_view origin, std::string_view target,
                              double rmax);

}  // namespace mhspna
