#include "mhspna/metric.hpp"

#include "mhspna/error.hpp"

#include <algorithm>
#include <cmath>

namespace mhspna {

void MetricParams::validate() const {
  if (!(a >= 0.0 && a <= 1.0)) throw DataError("metric: a must lie in [0, 1]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DataError("metric: sigma must be >= 0");
  if (!(clamp_lo > 0.0 && clamp_lo <= 1.0 && clamp_hi >= 1.0 && std::isfinite(clamp_hi))) {
    throw DataError("metric: clamp bounds must satisfy 0 < lo <= 1 <= hi");
  }
  if (oversample < 1) throw DataError("metric: oversample must be a positive integer");
}

nlohmann::json to_json(const MetricParams& p) {
  return {{"a", p.a},
          {"sigma", p.sigma},
          {"clamp", {p.clamp_lo, p.clamp_hi}},
          {"oversample", p.oversample},
          {"seed", p.seed}};
}

MetricParams metric_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("metric: expected an object");
  MetricParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "a") {
      p.a = value.get<double>();
    } else if (key == "sigma") {
      p.sigma = value.get<double>();
    } else if (key == "clamp") {
      if (!value.is_array() || value.size() != 2) throw DataError("metric: clamp must be [lo, hi]");
      p.clamp_lo = value[0].get<double>();
      p.clamp_hi = value[1].get<double>();
    } else if (key == "oversample") {
      p.oversample = value.get<int>();
    } else if (key == "seed") {
      p.seed = value.get<std::uint64_t>();
    } else {
      throw DataError("metric: unknown key '" + key + "'");
    }
  }
  p.validate();
  return p;
}

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t element_key(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix_keys(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

RandStream::RandStream(std::uint64_t seed, std::uint64_t origin_key, std::uint64_t iteration)
    : base_(mix_keys(mix_keys(splitmix64(seed), origin_key), iteration)) {}

double RandStream::standard_normal(std::uint64_t key) const {
  const std::uint64_t h1 = mix_keys(base_, key);
  const std::uint64_t h2 = splitmix64(h1);
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = static_cast<double>((h1 >> 11) + 1) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(h2 >> 11) * kScale;        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double clamp_rand(double raw, const MetricParams& params) {
  return std::clamp(raw, params.clamp_lo, params.clamp_hi);
}

double sample_rand(const RandStream& stream, std::uint64_t key, const MetricParams& params) {
  if (params.sigma == 0.0) return 1.0;
  return clamp_rand(1.0 + params.sigma * stream.standard_normal(key), params);
}

double link_cost(const Link& link, const MetricParams& params, double rand) {
  return (params.a * link.angular_curvature + (1.0 - params.a) * link.length) * rand;
}

double turn_cost(double angle_degrees, const MetricParams& params, double rand) {
  return params.a * angle_degrees * rand;
}

}  // namespace mhspna
