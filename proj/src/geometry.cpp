#include "mhspna/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mhspna {

double polyline_length(std::span<const Point> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
  return total;
}

double polyline_curvature(std::span<const Point> pts) {
  double total = 0.0;
  for (std::size_t i = 2; i < pts.size(); ++i) {
    total += deflection_degrees(pts[i - 1] - pts[i - 2], pts[i] - pts[i - 1]);
  }
  return total;
}

SegmentProjection project_onto_segment(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return {(a + t * ab - p).norm(), t};
}

double distance_to_polyline(const Point& p, std::span<const Point> pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    best = std::min(best, project_onto_segment(p, pts[i - 1], pts[i]).distance);
  }
  return best;
}

Point point_along(std::span<const Point> pts, double s) {
  if (s <= 0.0) return pts.front();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = (pts[i] - pts[i - 1]).norm();
    if (s <= seg) return pts[i - 1] + (pts[i] - pts[i - 1]) * (s / seg);
    s -= seg;
  }
  return pts.back();
}

}  // namespace mhspna
