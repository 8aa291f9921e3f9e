#pragma once

// Brute-force reference implementations used only by the tests.

#include "mhspna/betweenness.hpp"
#include "mhspna/metric.hpp"
#include "mhspna/network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using mhspna::MetricParams;
using mhspna::SpatialNetwork;

/// Exhaustive routes from one origin centre.
struct Routes {
  std::vector<double> entry_cost;                 // per state 2*link+end
  std::vector<double> centre_cost;                // per link
  std::vector<std::vector<std::size_t>> path;     // link sequence origin..z, empty if unreached
};

/// Label-correcting enumeration over every walk of routing states. With
/// `radius_metric` the cost is plain length and there are no turn costs.
Routes brute_routes(const SpatialNetwork& net, std::size_t origin, const MetricParams& params, int iteration,
                    bool radius_metric);

/// Share of link z within (rmin, rmax] of the origin centre, by integrating
/// the piecewise-linear distance along the link.
double brute_fraction(const SpatialNetwork& net, const Routes& radius, std::size_t origin, std::size_t z,
                      double rmin, double rmax);

/// Betweenness of every link for one (analysis, band), summing each OD pair's
/// contribution along its reconstructed path.
Eigen::VectorXd brute_betweenness(const SpatialNetwork& net, const mhspna::AnalysisSpec& spec,
                                  const mhspna::RadiusBand& band, const MetricParams& params);

/// Closed-form weighted ridge via an augmented least-squares system solved
/// by QR. Returns {intercept, raw coefficients}.
struct RidgeReference {
  double intercept;
  Eigen::VectorXd coefficients;
};
RidgeReference ridge_reference(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                               double lambda_r);

/// Random lattice network of at most `max_links` links, some of them bent,
/// with random retail/origin weights.
SpatialNetwork random_lattice(std::mt19937_64& rng, int max_links);

}  // namespace oracle
