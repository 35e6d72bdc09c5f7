#ifndef CLPOSE_TESTS_TEST_UTIL_HPP
#define CLPOSE_TESTS_TEST_UTIL_HPP

#include <cmath>
#include <vector>

#include "clpose/core.hpp"

namespace clpose::testing {

inline PoseInstance pose_of(std::initializer_list<Point2> points) {
  PoseInstance p;
  for (const auto& q : points) p.keypoints.push_back({q.x, q.y, Visibility::kVisible});
  return p;
}

inline double max_coord_error(const DecodedPose& d, const PoseInstance& p) {
  double e = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!p.keypoints[k].labeled()) continue;
    e = std::max({e, std::abs(d.coords[k].x - p.keypoints[k].x), std::abs(d.coords[k].y - p.keypoints[k].y)});
  }
  return e;
}

// Oracle: count cells whose center satisfies the heatmap threshold, evaluated
// directly from the kernel definition without the encoder.
inline std::size_t brute_force_region(std::size_t gw, std::size_t gh, double stride, Point2 g, double sigma,
                                      double tau, bool squared) {
  std::size_t n = 0;
  for (std::size_t y = 0; y < gh; ++y) {
    for (std::size_t x = 0; x < gw; ++x) {
      const double cx = (static_cast<double>(x) + 0.5) * stride;
      const double cy = (static_cast<double>(y) + 0.5) * stride;
      const double d2 = (cx - g.x) * (cx - g.x) + (cy - g.y) * (cy - g.y);
      const double d = squared ? d2 : std::sqrt(d2);
      if (std::exp(-d / (2 * sigma * sigma)) >= tau) ++n;
    }
  }
  return n;
}

}  // namespace clpose::testing

#endif  // CLPOSE_TESTS_TEST_UTIL_HPP
