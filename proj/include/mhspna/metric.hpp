#pragma once

#include "mhspna/network.hpp"

#include <cstdint>
#include <string_view>

namespace mhspna {

/// Parameters of the hybrid angular/Euclidean routing metric with a clamped
/// normal random factor.
struct MetricParams {
  double a = 0.5;          // 0 = pure Euclidean, 1 = pure angular
  double sigma = 1.0;      // std. dev. of the random factor (mean 1)
  double clamp_lo = 0.1;
  double clamp_hi = 10.0;
  int oversample = 50;     // randomized runs averaged per analysis
  std::uint64_t seed = 1;

  void validate() const;  // throws DataError
  friend bool operator==(const MetricParams&, const MetricParams&) = default;
};

nlohmann::json to_json(const MetricParams& params);
/// Strict: unknown keys are rejected. Missing keys keep their defaults.
MetricParams metric_params_from_json(const nlohmann::json& j);

/// Stable 64-bit key for a string id (FNV-1a), used to key random draws so
/// that unchanged links keep their factors across network edits.
std::uint64_t element_key(std::string_view id);

std::uint64_t mix_keys(std::uint64_t h, std::uint64_t v);

/// Counter-based random stream for one (origin, oversample iteration).
/// draw(k) depends only on (seed, origin key, iteration, k), never on call
/// order, so any parallel schedule reproduces the same factors.
class RandStream {
 public:
  RandStream(std::uint64_t seed, std::uint64_t origin_key, std::uint64_t iteration);

  /// Standard normal deviate for element `key`.
  double standard_normal(std::uint64_t key) const;

 private:
  std::uint64_t base_;
};

double clamp_rand(double raw, const MetricParams& params);

/// Clamped N(1, sigma) factor for element `key`; exactly 1 when sigma == 0.
double sample_rand(const RandStream& stream, std::uint64_t key, const MetricParams& params);

double link_cost(const Link& link, const MetricParams& params, double rand);
double turn_cost(double angle_degrees, const MetricParams& params, double rand);

/// Network-Euclidean cost used for radius membership: the link length,
/// never randomized. Junctions contribute nothing.
inline double radius_cost(const Link& link) { return link.length; }

}  // namespace mhspna
