#ifndef CLPOSE_LOSS_HPP
#define CLPOSE_LOSS_HPP

// Composite training loss over predicted map stacks:
//   L = w_h * L_h + w_o * (L_oy + L_ox)
// with L_h the per-keypoint heatmap MSE and L_oy / L_ox smooth-L1 offset
// losses restricted to the thresholded region. Also provides the analytic
// gradient, a central-difference verifier and two comparison losses
// (peak-cell offset MSE and disk-classification + offsets).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "clpose/codec.hpp"
#include "clpose/core.hpp"

namespace clpose {

struct LossConfig {
  double omega_h = 0.5;
  double omega_o = 2.0;
  double beta = 1.0;
  RegionSource region_source = RegionSource::kGroundTruth;
  double tau = 0.6;

  void validate() const {
    if (!(omega_h >= 0.0) || !(omega_o >= 0.0)) throw ConfigError("loss weights must be non-negative");
    if (!(beta > 0.0)) throw ConfigError("smooth-L1 beta must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  }
};

/// Per-keypoint cell membership; n_omega[k] is the popcount of inside[k].
struct RegionMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::vector<char>> inside;
  std::vector<std::size_t> n_omega;

  bool contains(std::size_t k, std::size_t cell_index) const { return inside[k][cell_index] != 0; }
  bool contains(std::size_t k, Cell c) const { return contains(k, c.y * width + c.x); }
};

struct LossReport {
  double l_h = 0.0;
  double l_oy = 0.0;
  double l_ox = 0.0;
  double total = 0.0;
  std::vector<std::size_t> n_omega;
  std::optional<TargetMaps> gradient;
};

inline double smooth_l1(double residual, double beta) {
  const double a = std::abs(residual);
  return a < beta ? 0.5 * residual * residual / beta : a - 0.5 * beta;
}

inline double smooth_l1_grad(double residual, double beta) {
  if (std::abs(residual) < beta) return residual / beta;
  return residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
}

/// Mean squared difference over all cells; 0 when the keypoint is not valid.
inline double mse_plane(const Plane& target, const Plane& predicted, bool valid = true) {
  if (target.width != predicted.width || target.height != predicted.height ||
      target.values.size() != predicted.values.size()) {
    throw ContractError("plane dimension mismatch");
  }
  if (!valid || target.values.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    const double d = predicted.values[i] - target.values[i];
    s += d * d;
  }
  return s / static_cast<double>(target.values.size());
}

/// Threshold the heatmaps of a single stack. Invalid keypoints get an empty region.
inline RegionMask region_mask(const TargetMaps& maps, double tau) {
  if (!maps.well_formed()) throw ContractError("malformed map stack");
  RegionMask mask;
  mask.width = maps.grid.grid_width();
  mask.height = maps.grid.grid_height();
  for (std::size_t k = 0; k < maps.keypoints(); ++k) {
    std::vector<char> in(mask.width * mask.height, 0);
    std::size_t n = 0;
    if (maps.valid[k]) {
      const auto& v = maps.heatmaps[k].values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= tau) {
          in[i] = 1;
          ++n;
        }
      }
    }
    mask.inside.push_back(std::move(in));
    mask.n_omega.push_back(n);
  }
  return mask;
}

/// Region designated by `source`: ground-truth heatmap, predicted heatmap, or
/// their elementwise maximum. Keypoints invalid in the target are never scored.
inline RegionMask region_mask(const TargetMaps& target, const TargetMaps& predicted, double tau,
                              RegionSource source) {
  require_compatible(target, predicted);
  if (source == RegionSource::kGroundTruth) return region_mask(target, tau);
  TargetMaps designated = predicted;
  designated.valid = target.valid;
  if (source == RegionSource::kUnion) {
    for (std::size_t k = 0; k < target.keypoints(); ++k) {
      auto& v = designated.heatmaps[k].values;
      const auto& t = target.heatmaps[k].values;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], t[i]);
    }
  }
  return region_mask(designated, tau);
}

namespace detail {

inline TargetMaps zero_like(const TargetMaps& maps) {
  TargetMaps z(maps.grid, maps.keypoints());
  z.norm_mode = maps.norm_mode;
  z.valid = maps.valid;
  return z;
}

inline std::size_t count_valid(const TargetMaps& maps) {
  return static_cast<std::size_t>(std::count(maps.valid.begin(), maps.valid.end(), true));
}

inline double heatmap_term(const TargetMaps& target, const TargetMaps& predicted, TargetMaps* grad,
                           double omega_h) {
  const std::size_t n_valid = count_valid(target);
  if (n_valid == 0) return 0.0;
  double sum = 0.0;
  const auto cells = static_cast<double>(target.grid.cell_count());
  for (std::size_t k = 0; k < target.keypoints(); ++k) {
    if (!target.valid[k]) continue;
    sum += mse_plane(target.heatmaps[k], predicted.heatmaps[k]);
    if (grad != nullptr) {
      const double scale = omega_h * 2.0 / (static_cast<double>(n_valid) * cells);
      auto& g = grad->heatmaps[k].values;
      const auto& t = target.heatmaps[k].values;
      const auto& p = predicted.heatmaps[k].values;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (p[i] - t[i]);
    }
  }
  return sum / static_cast<double>(n_valid);
}

// Smooth-L1 offset losses averaged over region cells, then over keypoints with a
// non-empty region.
inline void offset_terms(const TargetMaps& target, const TargetMaps& predicted, const RegionMask& region,
                         const LossConfig& config, TargetMaps* grad, double& l_oy, double& l_ox) {
  l_oy = 0.0;
  l_ox = 0.0;
  std::size_t scored = 0;
  for (std::size_t k = 0; k < target.keypoints(); ++k) scored += region.n_omega[k] > 0 ? 1 : 0;
  if (scored == 0) return;
  for (std::size_t k = 0; k < target.keypoints(); ++k) {
    const std::size_t n = region.n_omega[k];
    if (n == 0) continue;
    const auto& ty = target.y_offsets[k].values;
    const auto& tx = target.x_offsets[k].values;
    const auto& py = predicted.y_offsets[k].values;
    const auto& px = predicted.x_offsets[k].values;
    const double gscale = config.omega_o / (static_cast<double>(scored) * static_cast<double>(n));
    double sy = 0.0;
    double sx = 0.0;
    for (std::size_t i = 0; i < ty.size(); ++i) {
      if (!region.contains(k, i)) continue;
      const double ry = py[i] - ty[i];
      const double rx = px[i] - tx[i];
      sy += smooth_l1(ry, config.beta);
      sx += smooth_l1(rx, config.beta);
      if (grad != nullptr) {
        grad->y_offsets[k].values[i] = gscale * smooth_l1_grad(ry, config.beta);
        grad->x_offsets[k].values[i] = gscale * smooth_l1_grad(rx, config.beta);
      }
    }
    l_oy += sy / static_cast<double>(n);
    l_ox += sx / static_cast<double>(n);
  }
  l_oy /= static_cast<double>(scored);
  l_ox /= static_cast<double>(scored);
}

inline LossReport assemble(double l_h, double l_oy, double l_ox, const LossConfig& config,
                           std::vector<std::size_t> n_omega) {
  LossReport r;
  r.l_h = l_h;
  r.l_oy = l_oy;
  r.l_ox = l_ox;
  r.total = config.omega_h * l_h + config.omega_o * (l_oy + l_ox);
  r.n_omega = std::move(n_omega);
  return r;
}

}  // namespace detail

/// Composite loss with an explicitly supplied region. The region is a constant
/// of the loss: no gradient flows through how it was chosen.
inline LossReport composite_loss_with_region(const TargetMaps& target, const TargetMaps& predicted,
                                             const RegionMask& region, const LossConfig& config,
                                             bool with_gradient = false) {
  config.validate();
  require_compatible(target, predicted);
  if (region.n_omega.size() != target.keypoints()) throw ContractError("region keypoint count mismatch");
  std::optional<TargetMaps> grad;
  if (with_gradient) grad = detail::zero_like(target);
  TargetMaps* g = grad ? &*grad : nullptr;
  const double l_h = detail::heatmap_term(target, predicted, g, config.omega_h);
  double l_oy = 0.0;
  double l_ox = 0.0;
  detail::offset_terms(target, predicted, region, config, g, l_oy, l_ox);
  auto report = detail::assemble(l_h, l_oy, l_ox, config, region.n_omega);
  report.gradient = std::move(grad);
  return report;
}

inline LossReport composite_loss(const TargetMaps& target, const TargetMaps& predicted,
                                 const LossConfig& config, bool with_gradient = false) {
  config.validate();
  const auto region = region_mask(target, predicted, config.tau, config.region_source);
  return composite_loss_with_region(target, predicted, region, config, with_gradient);
}

/// d(total)/d(every predicted plane value), same layout as the inputs.
inline TargetMaps composite_loss_grad(const TargetMaps& target, const TargetMaps& predicted,
                                      const LossConfig& config) {
  return std::move(*composite_loss(target, predicted, config, true).gradient);
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t compared = 0;
  std::size_t excluded = 0;
};

/// Compares the analytic gradient with central differences of step `step` on
/// every predicted value. Relative error is |a - f| / max(1, |a|, |f|).
/// Region cells whose offset residual lies within 10 * step of the smooth-L1
/// transition are skipped. The region is frozen at the unperturbed prediction.
inline GradCheckResult finite_diff_check(const TargetMaps& target, const TargetMaps& predicted,
                                         const LossConfig& config, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  config.validate();
  const auto region = region_mask(target, predicted, config.tau, config.region_source);
  const auto analytic = *composite_loss_with_region(target, predicted, region, config, true).gradient;

  GradCheckResult result;
  TargetMaps probe = predicted;
  const std::size_t K = target.keypoints();
  for (std::size_t pi = 0; pi < probe.plane_count(); ++pi) {
    const bool is_offset = pi >= K;
    const std::size_t k = pi % K;
    auto& values = probe.plane(pi).values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (is_offset && region.contains(k, i)) {
        const double r = values[i] - target.plane(pi).values[i];
        if (std::abs(std::abs(r) - config.beta) < 10.0 * step) {
          ++result.excluded;
          continue;
        }
      }
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = composite_loss_with_region(target, probe, region, config).total;
      values[i] = saved - step;
      const double minus = composite_loss_with_region(target, probe, region, config).total;
      values[i] = saved;
      const double fd = (plus - minus) / (2.0 * step);
      const double a = analytic.plane(pi).values[i];
      const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      result.max_relative_error = std::max(result.max_relative_error, rel);
      ++result.compared;
    }
  }
  return result;
}

/// Comparison loss: heatmap MSE as in the composite loss, offsets scored by plain
/// squared error at the ground-truth heatmap's peak cell only.
inline LossReport peak_mse_loss(const TargetMaps& target, const TargetMaps& predicted,
                                const LossConfig& config) {
  config.validate();
  require_compatible(target, predicted);
  const double l_h = detail::heatmap_term(target, predicted, nullptr, config.omega_h);
  const std::size_t n_valid = detail::count_valid(target);
  double l_oy = 0.0;
  double l_ox = 0.0;
  std::vector<std::size_t> n_omega(target.keypoints(), 0);
  for (std::size_t k = 0; k < target.keypoints(); ++k) {
    if (!target.valid[k]) continue;
    const Cell c = argmax_cell(target.heatmaps[k]);
    const double dy = predicted.y_offsets[k].at(c) - target.y_offsets[k].at(c);
    const double dx = predicted.x_offsets[k].at(c) - target.x_offsets[k].at(c);
    l_oy += dy * dy;
    l_ox += dx * dx;
    n_omega[k] = 1;
  }
  if (n_valid > 0) {
    l_oy /= static_cast<double>(n_valid);
    l_ox /= static_cast<double>(n_valid);
  }
  return detail::assemble(l_h, l_oy, l_ox, config, std::move(n_omega));
}

/// Cells whose patch center lies within `radius` pixels (inclusive) of the
/// keypoint recovered from the target offsets.
inline RegionMask disk_mask(const TargetMaps& target, double radius) {
  if (!target.well_formed()) throw ContractError("malformed map stack");
  RegionMask mask;
  mask.width = target.grid.grid_width();
  mask.height = target.grid.grid_height();
  for (std::size_t k = 0; k < target.keypoints(); ++k) {
    std::vector<char> in(mask.width * mask.height, 0);
    std::size_t n = 0;
    if (target.valid[k]) {
      const Point2 g = detail::propose(target, k, argmax_cell(target.heatmaps[k]));
      for (std::size_t y = 0; y < mask.height; ++y) {
        for (std::size_t x = 0; x < mask.width; ++x) {
          if (distance(target.grid.patch_center({x, y}), g) <= radius) {
            in[y * mask.width + x] = 1;
            ++n;
          }
        }
      }
    }
    mask.inside.push_back(std::move(in));
    mask.n_omega.push_back(n);
  }
  return mask;
}

namespace detail {

// log(1 + exp(z)) without overflow; softplus(-inf) == 0.
inline double softplus(double z) {
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace detail

/// Comparison loss: predicted heatmaps are logits of a per-cell disk
/// classification scored by mean binary cross-entropy; offsets are scored with
/// smooth-L1 at positive cells. `disk_radius` defaults to one stride.
inline LossReport grmi_loss(const TargetMaps& target, const TargetMaps& predicted, const LossConfig& config,
                            std::optional<double> disk_radius = std::nullopt) {
  config.validate();
  require_compatible(target, predicted);
  const double radius = disk_radius.value_or(static_cast<double>(target.grid.stride()));
  if (!(radius > 0.0)) throw ConfigError("disk radius must be positive");
  const auto positives = disk_mask(target, radius);

  const std::size_t n_valid = detail::count_valid(target);
  double l_h = 0.0;
  for (std::size_t k = 0; k < target.keypoints(); ++k) {
    if (!target.valid[k]) continue;
    const auto& z = predicted.heatmaps[k].values;
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      s += positives.contains(k, i) ? detail::softplus(-z[i]) : detail::softplus(z[i]);
    }
    l_h += s / static_cast<double>(z.size());
  }
  if (n_valid > 0) l_h /= static_cast<double>(n_valid);

  double l_oy = 0.0;
  double l_ox = 0.0;
  detail::offset_terms(target, predicted, positives, config, nullptr, l_oy, l_ox);
  return detail::assemble(l_h, l_oy, l_ox, config, positives.n_omega);
}

}  // namespace clpose

#endif  // CLPOSE_LOSS_HPP
