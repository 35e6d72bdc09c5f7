#ifndef CLPOSE_CODEC_HPP
#define CLPOSE_CODEC_HPP

// Encoding of keypoints into sparse heatmaps + short-distance offset maps,
// and the two decoders (thresholded weighted-offset decode and a heatmap-only
// argmax baseline).

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "clpose/core.hpp"

namespace clpose {

namespace detail {

inline void require_in_image(const Keypoint& kp, const GridSpec& grid, std::size_t index) {
  if (!kp.labeled()) return;
  const bool inside = kp.x >= 0.0 && kp.y >= 0.0 && kp.x < static_cast<double>(grid.width()) &&
                      kp.y < static_cast<double>(grid.height());
  if (!inside || !std::isfinite(kp.x) || !std::isfinite(kp.y)) {
    throw ContractError("keypoint " + std::to_string(index) + " at (" + std::to_string(kp.x) + ", " +
                        std::to_string(kp.y) + ") lies outside the " + std::to_string(grid.width()) +
                        "x" + std::to_string(grid.height()) + " image");
  }
}

}  // namespace detail

/// Heatmap kernel for a cell whose patch center lies `dx`, `dy` pixels from the keypoint.
inline double heatmap_value(double dx, double dy, double sigma, NormMode mode) {
  const double squared = dx * dx + dy * dy;
  const double d = mode == NormMode::kSquaredDistance ? squared : std::sqrt(squared);
  return std::exp(-d / (2.0 * sigma * sigma));
}

/// One plane per keypoint. Unlabeled keypoints get an all-zero plane.
inline std::vector<Plane> encode_heatmaps(const PoseInstance& pose, const GridSpec& grid,
                                          const CodecConfig& config) {
  config.validate();
  std::vector<Plane> planes;
  planes.reserve(pose.size());
  for (std::size_t k = 0; k < pose.size(); ++k) {
    const auto& kp = pose.keypoints[k];
    detail::require_in_image(kp, grid, k);
    Plane plane(grid.grid_width(), grid.grid_height());
    if (kp.labeled()) {
      for (std::size_t y = 0; y < plane.height; ++y) {
        for (std::size_t x = 0; x < plane.width; ++x) {
          const Point2 c = grid.patch_center({x, y});
          plane.at(x, y) = heatmap_value(c.x - kp.x, c.y - kp.y, config.sigma, config.norm_mode);
        }
      }
    }
    planes.push_back(std::move(plane));
  }
  return planes;
}

struct OffsetPlanes {
  std::vector<Plane> y;
  std::vector<Plane> x;
};

/// Stride-normalized displacement from every patch center to the keypoint.
inline OffsetPlanes encode_offsetmaps(const PoseInstance& pose, const GridSpec& grid) {
  OffsetPlanes out;
  out.y.reserve(pose.size());
  out.x.reserve(pose.size());
  const auto s = static_cast<double>(grid.stride());
  for (std::size_t k = 0; k < pose.size(); ++k) {
    const auto& kp = pose.keypoints[k];
    detail::require_in_image(kp, grid, k);
    Plane py(grid.grid_width(), grid.grid_height());
    Plane px(grid.grid_width(), grid.grid_height());
    if (kp.labeled()) {
      for (std::size_t y = 0; y < py.height; ++y) {
        for (std::size_t x = 0; x < py.width; ++x) {
          const Point2 c = grid.patch_center({x, y});
          py.at(x, y) = (kp.y - c.y) / s;
          px.at(x, y) = (kp.x - c.x) / s;
        }
      }
    }
    out.y.push_back(std::move(py));
    out.x.push_back(std::move(px));
  }
  return out;
}

inline TargetMaps encode(const PoseInstance& pose, const GridSpec& grid, const CodecConfig& config) {
  if (pose.keypoints.empty()) throw ContractError("pose has no keypoints");
  TargetMaps maps;
  maps.grid = grid;
  maps.norm_mode = config.norm_mode;
  maps.heatmaps = encode_heatmaps(pose, grid, config);
  auto offsets = encode_offsetmaps(pose, grid);
  maps.y_offsets = std::move(offsets.y);
  maps.x_offsets = std::move(offsets.x);
  maps.valid.resize(pose.size());
  for (std::size_t k = 0; k < pose.size(); ++k) maps.valid[k] = pose.keypoints[k].labeled();
  return maps;
}

/// First cell holding the plane maximum in row-major (y, x) order.
inline Cell argmax_cell(const Plane& plane) {
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plane.values.size(); ++i) {
    // NaN never wins; an all-NaN plane falls back to cell 0.
    if (plane.values[i] > best_value) {
      best_value = plane.values[i];
      best = i;
    }
  }
  return {best % plane.width, best / plane.width};
}

namespace detail {

inline Point2 propose(const TargetMaps& maps, std::size_t k, Cell c) {
  const Point2 center = maps.grid.patch_center(c);
  const auto s = static_cast<double>(maps.grid.stride());
  return {center.x + maps.x_offsets[k].at(c) * s, center.y + maps.y_offsets[k].at(c) * s};
}

}  // namespace detail

/// Three-step decode: select cells with activation >= tau, let each propose
/// center + offset * S, and take the activation-weighted mean of the proposals.
/// Keypoints without any qualifying cell use the global argmax cell instead.
inline DecodedPose decode(const TargetMaps& maps, const CodecConfig& config) {
  config.validate();
  if (!maps.well_formed()) throw ContractError("malformed map stack");
  DecodedPose out;
  const auto K = maps.keypoints();
  out.coords.resize(K);
  out.confidence.resize(K);
  out.diagnostics.resize(K);

  for (std::size_t k = 0; k < K; ++k) {
    const Plane& heat = maps.heatmaps[k];
    double weight = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < heat.height; ++y) {
      for (std::size_t x = 0; x < heat.width; ++x) {
        const double a = heat.at(x, y);
        if (!(a >= config.tau)) continue;
        const Point2 p = detail::propose(maps, k, {x, y});
        sx += a * p.x;
        sy += a * p.y;
        weight += a;
        ++n;
      }
    }
    if (n > 0) {
      out.coords[k] = {sx / weight, sy / weight};
      out.confidence[k] = weight / static_cast<double>(n);
      out.diagnostics[k] = {n, false};
      continue;
    }
    const Cell c = argmax_cell(heat);
    Point2 p = detail::propose(maps, k, c);
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) p = maps.grid.patch_center(c);
    const double a = heat.at(c);
    out.coords[k] = p;
    out.confidence[k] = std::isfinite(a) ? a : 0.0;
    out.diagnostics[k] = {0, true};
  }
  return out;
}

/// Heatmap-only baseline: the patch center of each plane's argmax cell.
inline DecodedPose argmax_decode(const TargetMaps& maps) {
  if (!maps.well_formed()) throw ContractError("malformed map stack");
  DecodedPose out;
  for (std::size_t k = 0; k < maps.keypoints(); ++k) {
    const Cell c = argmax_cell(maps.heatmaps[k]);
    out.coords.push_back(maps.grid.patch_center(c));
    const double a = maps.heatmaps[k].at(c);
    out.confidence.push_back(std::isfinite(a) ? a : 0.0);
    out.diagnostics.push_back({1, false});
  }
  return out;
}

}  // namespace clpose

#endif  // CLPOSE_CODEC_HPP
