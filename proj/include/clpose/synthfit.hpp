#ifndef CLPOSE_SYNTHFIT_HPP
#define CLPOSE_SYNTHFIT_HPP

// Desk-scale experiment harness: seeded synthetic poses, map perturbation,
// direct gradient-descent fitting of map stacks and the stride sweep.
//
// Random streams come from std::mt19937_64 seeded through std::seed_seq, both
// of which have a fully specified output sequence. Uniform and normal variates
// are derived from the raw engine output here rather than through the
// <random> distributions, whose algorithms vary between standard libraries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "clpose/codec.hpp"
#include "clpose/core.hpp"
#include "clpose/loss.hpp"

namespace clpose {

class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Keypoints uniform over the area covered by whole cells, all visible. Each
/// instance draws from its own stream keyed by (seed, index).
inline std::vector<PoseInstance> gen_dataset(std::uint64_t seed, std::size_t n_instances, std::size_t K,
                                             const GridSpec& grid) {
  if (n_instances == 0) throw ConfigError("dataset needs at least one instance");
  if (K == 0) throw ConfigError("dataset needs at least one keypoint");
  const double w = grid.covered_width();
  const double h = grid.covered_height();
  std::vector<PoseInstance> out;
  out.reserve(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) {
    SeededStream rng(seed, i);
    PoseInstance pose;
    for (std::size_t k = 0; k < K; ++k) {
      const double x = rng.uniform() * w;
      const double y = rng.uniform() * h;
      pose.keypoints.push_back({x, y, Visibility::kVisible});
    }
    const double side = std::max(w, h) / 8.0;
    const auto& head = pose.keypoints.front();
    pose.norm_meta.head_box = Box{head.x - side / 2, head.y - side / 2, head.x + side / 2, head.y + side / 2};
    if (K >= 2) pose.norm_meta.torso_endpoints = std::pair<std::size_t, std::size_t>{0, K - 1};
    pose.norm_meta.area = w * h;
    out.push_back(std::move(pose));
  }
  return out;
}

enum class NoiseKind { kGaussianAdditive, kActivationScaling, kOffsetJitter };
/// Offset jitter magnitude in stride units, or in pixels (divided by S per grid).
enum class NoiseUnits { kStride, kPixels };
/// Offset jitter drawn independently per cell, or once per plane (a systematic shift).
enum class NoiseScope { kCell, kPlane };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kGaussianAdditive;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
  NoiseUnits units = NoiseUnits::kStride;
  NoiseScope scope = NoiseScope::kCell;
};

inline TargetMaps perturb(const TargetMaps& maps, const NoiseModel& noise, std::uint64_t stream = 0) {
  if (!(noise.magnitude >= 0.0)) throw ConfigError("noise magnitude must be non-negative");
  if (!maps.well_formed()) throw ContractError("malformed map stack");
  TargetMaps out = maps;
  if (noise.magnitude == 0.0) return out;
  SeededStream rng(noise.seed, stream);
  const double m = noise.magnitude;
  switch (noise.kind) {
    case NoiseKind::kGaussianAdditive:
      for (auto& p : out.heatmaps) {
        for (auto& v : p.values) v = std::max(0.0, v + m * rng.normal());
      }
      break;
    case NoiseKind::kActivationScaling:
      for (auto& p : out.heatmaps) {
        for (auto& v : p.values) v *= 1.0 + m * rng.uniform(-1.0, 1.0);
      }
      break;
    case NoiseKind::kOffsetJitter: {
      const double scale = noise.units == NoiseUnits::kPixels ? m / static_cast<double>(maps.grid.stride()) : m;
      const std::size_t K = out.keypoints();
      for (std::size_t pi = K; pi < out.plane_count(); ++pi) {
        auto& values = out.plane(pi).values;
        if (noise.scope == NoiseScope::kPlane) {
          const double shift = scale * rng.normal();
          for (auto& v : values) v += shift;
        } else {
          for (auto& v : values) v += scale * rng.normal();
        }
      }
      break;
    }
  }
  return out;
}

/// A plausible imperfect prediction for `target`: heatmaps with N(0, 0.3^2)
/// noise and offsets with N(0, 1) noise, drawn from stream (seed, 1).
inline TargetMaps random_prediction(const TargetMaps& target, std::uint64_t seed) {
  TargetMaps out = target;
  SeededStream rng(seed, 1);
  for (std::size_t pi = 0; pi < out.plane_count(); ++pi) {
    const double scale = pi < out.keypoints() ? 0.3 : 1.0;
    for (auto& v : out.plane(pi).values) v += scale * rng.normal();
  }
  return out;
}

enum class FitInit { kZeros, kNoise };

struct FitConfig {
  double step_size = 0.1;
  std::size_t max_iters = 5000;
  double stop_loss = 1e-6;
  FitInit init = FitInit::kZeros;
  double init_noise = 0.1;  // std-dev of the kNoise initialization
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
    if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  }
};

struct FitResult {
  TargetMaps fitted;
  /// Total loss before each update; trace.back() is the loss of `fitted`.
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool converged = false;
  bool diverged = false;
};

/// Fixed-step gradient descent on the predicted planes, starting from `initial`.
/// Stops below `stop_loss`, after `max_iters` updates, or after ten consecutive
/// loss increases (reported as diverged).
inline FitResult fit_maps(const TargetMaps& target, const TargetMaps& initial, const LossConfig& loss_config,
                          const FitConfig& fit_config) {
  fit_config.validate();
  require_compatible(target, initial);
  FitResult result;
  result.fitted = initial;
  std::size_t rising = 0;
  for (std::size_t it = 0;; ++it) {
    auto report = composite_loss(target, result.fitted, loss_config, true);
    if (!result.trace.empty() && report.total > result.trace.back()) {
      ++rising;
    } else {
      rising = 0;
    }
    result.trace.push_back(report.total);
    result.iterations = it;
    if (report.total < fit_config.stop_loss) {
      result.converged = true;
      break;
    }
    if (rising >= 10 || !std::isfinite(report.total)) {
      result.diverged = true;
      break;
    }
    if (it == fit_config.max_iters) break;
    const auto& grad = *report.gradient;
    for (std::size_t pi = 0; pi < result.fitted.plane_count(); ++pi) {
      auto& v = result.fitted.plane(pi).values;
      const auto& g = grad.plane(pi).values;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= fit_config.step_size * g[i];
    }
  }
  return result;
}

inline FitResult fit_maps(const TargetMaps& target, const LossConfig& loss_config, const FitConfig& fit_config) {
  TargetMaps initial(target.grid, target.keypoints());
  initial.norm_mode = target.norm_mode;
  if (fit_config.init == FitInit::kNoise) {
    SeededStream rng(fit_config.seed, 0);
    for (std::size_t pi = 0; pi < initial.plane_count(); ++pi) {
      for (auto& v : initial.plane(pi).values) v = fit_config.init_noise * rng.normal();
    }
  }
  return fit_maps(target, initial, loss_config, fit_config);
}

struct SweepRow {
  std::size_t stride = 0;
  std::size_t grid_width = 0;
  std::size_t grid_height = 0;
  double composite_mean_error = 0.0;
  double argmax_mean_error = 0.0;
  double n_omega_mean = 0.0;
  std::size_t plane_count = 0;  // per keypoint

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

/// For each stride: encode every instance on a W x H image, perturb (stream =
/// instance index), decode with both decoders, and average the pixel errors
/// over labeled keypoints. N_omega is measured on the clean targets.
inline std::vector<SweepRow> stride_sweep(std::span<const PoseInstance> dataset, std::size_t width,
                                          std::size_t height, std::span<const std::size_t> strides,
                                          const NoiseModel& noise, const CodecConfig& config) {
  config.validate();
  std::vector<SweepRow> rows;
  for (std::size_t s : strides) {
    const GridSpec grid(width, height, s);
    SweepRow row;
    row.stride = s;
    row.grid_width = grid.grid_width();
    row.grid_height = grid.grid_height();
    row.plane_count = 3;
    double composite = 0.0;
    double argmax = 0.0;
    double omega = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& pose = dataset[i];
      const auto target = encode(pose, grid, config);
      const auto region = region_mask(target, config.tau);
      const auto noisy = perturb(target, noise, i);
      const auto dec = decode(noisy, config);
      const auto arg = argmax_decode(noisy);
      for (std::size_t k = 0; k < pose.size(); ++k) {
        if (!pose.keypoints[k].labeled()) continue;
        const Point2 g = pose.keypoints[k].position();
        composite += distance(dec.coords[k], g);
        argmax += distance(arg.coords[k], g);
        omega += static_cast<double>(region.n_omega[k]);
        ++n;
      }
    }
    if (n > 0) {
      row.composite_mean_error = composite / static_cast<double>(n);
      row.argmax_mean_error = argmax / static_cast<double>(n);
      row.n_omega_mean = omega / static_cast<double>(n);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace clpose

#endif  // CLPOSE_SYNTHFIT_HPP
