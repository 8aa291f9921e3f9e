#include "mhspna/synth.hpp"

#include "mhspna/error.hpp"
#include "mhspna/metric.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace mhspna {

double synth_uniform(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  const std::uint64_t h = mix_keys(mix_keys(seed, element_key(tag)), index);
  return static_cast<double>(h >> 11) * 0x1p-53;
}

namespace {

std::string grid_id(char kind, int a, int b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%03d_%03d", kind, a, b);
  return buf;
}

std::size_t nearest_link(const std::vector<Link>& links, const Point& target) {
  std::size_t best = 0;
  double best_d = kInfinity;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double d = distance_to_polyline(target, links[i].geometry);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

SpatialNetwork synth_grid(const GridSpec& grid, const WeightPlan* plan, std::uint64_t seed) {
  if (grid.nx < 2 || grid.ny < 2) throw DataError("synth: grid needs at least 2 x 2 junctions");
  if (!(grid.spacing > 0.0)) throw DataError("synth: spacing must be positive");
  std::vector<Link> links;
  const double s = grid.spacing;
  for (int row = 0; row < grid.ny; ++row) {
    for (int col = 0; col + 1 < grid.nx; ++col) {
      links.push_back(make_link(grid_id('h', row, col), {Point(col * s, row * s), Point((col + 1) * s, row * s)}));
    }
  }
  for (int col = 0; col < grid.nx; ++col) {
    for (int row = 0; row + 1 < grid.ny; ++row) {
      links.push_back(make_link(grid_id('v', col, row), {Point(col * s, row * s), Point(col * s, (row + 1) * s)}));
    }
  }
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });

  if (plan != nullptr) {
    const double width = (grid.nx - 1) * s;
    const double height = (grid.ny - 1) * s;
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (synth_uniform(seed, "retail", 2 * i) < plan->retail_fraction) {
        links[i].weights["retail_m2"] =
            plan->retail_min + (plan->retail_max - plan->retail_min) * synth_uniform(seed, "retail", 2 * i + 1);
      }
    }
    auto sprinkle = [&](const char* field, int count, double y_min) {
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < links.size(); ++i) {
        if (point_along(links[i].geometry, 0.5 * links[i].length).y() >= y_min) eligible.push_back(i);
      }
      std::vector<std::uint64_t> keys(eligible.size());
      for (std::size_t k = 0; k < eligible.size(); ++k) keys[k] = mix_keys(mix_keys(seed, element_key(field)), k);
      std::vector<std::size_t> order(eligible.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
      for (int k = 0; k < count && static_cast<std::size_t>(k) < order.size(); ++k) {
        links[eligible[order[static_cast<std::size_t>(k)]]].weights[field] =
            100.0 + 400.0 * synth_uniform(seed, field, static_cast<std::uint64_t>(k));
      }
    };
    sprinkle("carpark", plan->carparks, -kInfinity);
    sprinkle("north_parking", plan->north_parking, 2.0 * height / 3.0);
    if (plan->stations) {
      links[nearest_link(links, Point(width, 0.5 * height + 0.25 * s))].weights["station_queen"] = 1.0;
      links[nearest_link(links, Point(0.5 * width + 0.25 * s, 0.0))].weights["station_central"] = 1.0;
    }
  }
  return SpatialNetwork::build(std::move(links));
}

nlohmann::json to_json(const PlantedModel& model) {
  return {{"intercept", model.intercept}, {"coefficients", model.coefficients}};
}

PlantedModel planted_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("planted model: expected an object");
  PlantedModel m;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "intercept") {
        m.intercept = value.get<double>();
      } else if (key == "coefficients") {
        m.coefficients = value.get<std::map<std::string, double>>();
      } else if (key != "schema_version") {
        throw DataError("planted model: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("planted model: ") + e.what());
  }
  return m;
}

std::vector<std::size_t> choose_count_links(const SpatialNetwork& net, std::size_t count, std::uint64_t seed) {
  if (count > net.size()) throw DataError("synth: more count points requested than links");
  std::vector<std::uint64_t> keys(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) keys[i] = mix_keys(mix_keys(seed, element_key("counts")), element_key(net.link(i).id));
  std::vector<std::size_t> order(net.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<CountSite> plant_counts(const SpatialNetwork& net, const std::vector<FlowField>& fields,
                                    const PlantedModel& model, const std::vector<std::size_t>& links,
                                    const std::string& year, double noise, std::uint64_t seed) {
  if (!(noise >= 0.0)) throw DataError("synth: noise must be >= 0");
  std::vector<std::pair<const FlowField*, double>> terms;
  for (const auto& [column, beta] : model.coefficients) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const FlowField& f) { return f.column == column; });
    if (it == fields.end()) throw DataError("synth: planted coefficient for unknown column '" + column + "'");
    terms.emplace_back(&*it, beta);
  }
  const RandStream stream(seed, element_key("planted-noise"), 0);
  std::vector<CountSite> sites;
  for (auto li : links) {
    const Link& link = net.link(li);
    double flow = model.intercept;
    for (const auto& [field, beta] : terms) flow += beta * field->values[static_cast<Eigen::Index>(li)];
    if (noise > 0.0) flow *= 1.0 + noise * stream.standard_normal(element_key(link.id));
    if (!(flow > 0.0)) throw DataError("synth: planted flow on '" + link.id + "' is not positive");
    CountSite site;
    site.id = "P" + link.id;
    site.position = point_along(link.geometry, 0.5 * link.length);
    site.observations[year] = flow;
    sites.push_back(std::move(site));
  }
  std::sort(sites.begin(), sites.end(), [](const CountSite& a, const CountSite& b) { return a.id < b.id; });
  return sites;
}

}  // namespace mhspna
