#pragma once

#include "mhspna/betweenness.hpp"
#include "mhspna/counts.hpp"
#include "mhspna/network.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mhspna {

struct GridSpec {
  int nx = 10;  // junctions along x
  int ny = 10;  // junctions along y
  double spacing = 100.0;
};

/// Sprinkles the weight fields used by the default battery over a grid.
struct WeightPlan {
  double retail_fraction = 0.4;
  double retail_min = 50.0;
  double retail_max = 1000.0;
  int carparks = 3;
  int north_parking = 4;
  bool stations = true;
};

/// nx by ny junctions joined by straight links: nx(ny-1) + ny(nx-1) links.
/// Horizontal links are named h<row>_<col>, vertical ones v<col>_<row>.
SpatialNetwork synth_grid(const GridSpec& grid, const WeightPlan* plan, std::uint64_t seed);

/// Uniform [0, 1) value depending only on (seed, tag, index).
double synth_uniform(std::uint64_t seed, std::string_view tag, std::uint64_t index);

struct PlantedModel {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;  // column -> raw coefficient
};

nlohmann::json to_json(const PlantedModel& model);
PlantedModel planted_model_from_json(const nlohmann::json& j);

/// `count` distinct links in a seeded pseudo-random order.
std::vector<std::size_t> choose_count_links(const SpatialNetwork& net, std::size_t count, std::uint64_t seed);

/// Counts at the midpoints of `links`: intercept + sum of coefficient x field,
/// times (1 + noise z) with z standard normal. Throws if a flow is not positive.
std::vector<CountSite> plant_counts(const SpatialNetwork& net, const std::vector<FlowField>& fields,
                                    const PlantedModel& model, const std::vector<std::size_t>& links,
                                    const std::string& year, double noise, std::uint64_t seed);

}  // namespace mhspna
