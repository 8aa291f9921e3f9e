#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <span>

namespace mhspna {

using Point = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;

template <typename Scalar>
constexpr Scalar to_degrees(Scalar radians) {
  return radians * Scalar(180) / Scalar(kPi);
}

/// Unsigned angle between two direction vectors, in degrees, in [0, 180].
/// Zero means the second direction continues straight on from the first.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar deflection_degrees(const Eigen::MatrixBase<DerivedA>& from,
                                             const Eigen::MatrixBase<DerivedB>& to) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar cross = from.x() * to.y() - from.y() * to.x();
  const Scalar dot = from.dot(to);
  return to_degrees(std::abs(std::atan2(cross, dot)));
}

double polyline_length(std::span<const Point> pts);

/// Sum of absolute bearing changes at interior vertices, degrees.
double polyline_curvature(std::span<const Point> pts);

/// Distance from p to the segment [a, b], and the parameter t in [0, 1] of
/// the closest point.
struct SegmentProjection {
  double distance;
  double t;
};
SegmentProjection project_onto_segment(const Point& p, const Point& a, const Point& b);

double distance_to_polyline(const Point& p, std::span<const Point> pts);

/// Point at arc-length `s` along the polyline (clamped to its ends).
Point point_along(std::span<const Point> pts, double s);

}  // namespace mhspna
