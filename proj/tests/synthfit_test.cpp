#include <gtest/gtest.h>

#include <cmath>

#include "clpose/codec.hpp"
#include "clpose/synthfit.hpp"
#include "test_util.hpp"

namespace clpose {
namespace {

const GridSpec kGrid = derive_grid(256, 256, 16);

TEST(GenDataset, Deterministic) {
  EXPECT_EQ(gen_dataset(0, 1, 1, kGrid), gen_dataset(0, 1, 1, kGrid));
  EXPECT_EQ(gen_dataset(3, 50, 17, kGrid), gen_dataset(3, 50, 17, kGrid));
}

TEST(GenDataset, SeedsDiffer) {
  EXPECT_NE(gen_dataset(0, 10, 3, kGrid), gen_dataset(1, 10, 3, kGrid));
}

TEST(GenDataset, PrefixStable) {
  // Per-instance streams: a longer dataset extends a shorter one.
  const auto shortset = gen_dataset(9, 3, 2, kGrid);
  const auto longset = gen_dataset(9, 10, 2, kGrid);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(shortset[i], longset[i]);
}

TEST(GenDataset, InsideCoveredArea) {
  const auto grid = derive_grid(100, 60, 16);
  for (const auto& pose : gen_dataset(4, 200, 3, grid)) {
    for (const auto& kp : pose.keypoints) {
      EXPECT_GE(kp.x, 0.0);
      EXPECT_LT(kp.x, 96.0);
      EXPECT_GE(kp.y, 0.0);
      EXPECT_LT(kp.y, 48.0);
      EXPECT_TRUE(kp.labeled());
    }
    EXPECT_TRUE(pose.norm_meta.area.has_value());
    EXPECT_TRUE(pose.norm_meta.head_box.has_value());
  }
  EXPECT_THROW(gen_dataset(0, 0, 1, grid), ConfigError);
}

TEST(SeededStream, NormalMoments) {
  SeededStream rng(1, 0);
  double s = 0.0;
  double s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Perturb, ZeroMagnitudeIsIdentity) {
  auto maps = encode(gen_dataset(0, 1, 2, kGrid).front(), kGrid, {});
  maps.heatmaps[0].values[3] = -0.5;
  for (NoiseKind kind : {NoiseKind::kGaussianAdditive, NoiseKind::kActivationScaling, NoiseKind::kOffsetJitter}) {
    EXPECT_EQ(perturb(maps, {kind, 0.0, 5}), maps);
  }
}

TEST(Perturb, DeterministicPerSeed) {
  const auto maps = encode(gen_dataset(0, 1, 2, kGrid).front(), kGrid, {});
  for (NoiseKind kind : {NoiseKind::kGaussianAdditive, NoiseKind::kActivationScaling, NoiseKind::kOffsetJitter}) {
    const NoiseModel n{kind, 0.3, 17};
    EXPECT_EQ(perturb(maps, n), perturb(maps, n));
    EXPECT_NE(perturb(maps, n), perturb(maps, {kind, 0.3, 18}));
  }
}

TEST(Perturb, KindsTouchOnlyTheirPlanes) {
  const auto maps = encode(gen_dataset(2, 1, 2, kGrid).front(), kGrid, {});
  const auto g = perturb(maps, {NoiseKind::kGaussianAdditive, 0.5, 1});
  EXPECT_EQ(g.y_offsets, maps.y_offsets);
  EXPECT_EQ(g.x_offsets, maps.x_offsets);
  for (const auto& p : g.heatmaps) {
    for (double v : p.values) EXPECT_GE(v, 0.0);
  }
  const auto a = perturb(maps, {NoiseKind::kActivationScaling, 0.5, 1});
  EXPECT_EQ(a.x_offsets, maps.x_offsets);
  for (std::size_t i = 0; i < maps.heatmaps[0].size(); ++i) {
    const double ratio = a.heatmaps[0].values[i] / maps.heatmaps[0].values[i];
    EXPECT_GE(ratio, 0.5 - 1e-12);
    EXPECT_LE(ratio, 1.5 + 1e-12);
  }
  const auto j = perturb(maps, {NoiseKind::kOffsetJitter, 0.5, 1});
  EXPECT_EQ(j.heatmaps, maps.heatmaps);
  EXPECT_NE(j.x_offsets, maps.x_offsets);
}

TEST(Perturb, PlaneScopePixelJitterIsAUniformShift) {
  const auto maps = encode(testing::pose_of({{100.0, 100.0}}), kGrid, {});
  NoiseModel n{NoiseKind::kOffsetJitter, 4.0, 3, NoiseUnits::kPixels, NoiseScope::kPlane};
  const auto j = perturb(maps, n);
  const double shift = j.x_offsets[0].values[0] - maps.x_offsets[0].values[0];
  for (std::size_t i = 0; i < maps.x_offsets[0].size(); ++i) {
    EXPECT_NEAR(j.x_offsets[0].values[i] - maps.x_offsets[0].values[i], shift, 1e-12);
  }
  const auto d = decode(j, {});
  EXPECT_NEAR(d.coords[0].x - 100.0, shift * 16.0, 1e-9);
}

TEST(Perturb, CompositeErrorUnderJitterStaysWithinOneCellScale) {
  for (std::size_t s : {4u, 8u, 16u, 32u}) {
    const auto grid = derive_grid(256, 256, s);
    const auto poses = gen_dataset(s, 300, 1, grid);
    for (double m : {0.05, 0.2}) {
      double ex = 0.0;
      double ey = 0.0;
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const auto noisy = perturb(encode(poses[i], grid, {}), {NoiseKind::kOffsetJitter, m, 1}, i);
        const auto d = decode(noisy, {});
        ex += std::abs(d.coords[0].x - poses[i].keypoints[0].x);
        ey += std::abs(d.coords[0].y - poses[i].keypoints[0].y);
      }
      const double bound = m * static_cast<double>(s);
      EXPECT_LE(ex / poses.size(), bound) << "stride " << s;
      EXPECT_LE(ey / poses.size(), bound) << "stride " << s;
    }
  }
}

TEST(FitMaps, StartingAtTargetConvergesImmediately) {
  const auto t = encode(gen_dataset(0, 1, 1, kGrid).front(), kGrid, {});
  const auto r = fit_maps(t, t, {}, {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(FitMaps, ZerosInitDecodesWithinHalfPixel) {
  const auto pose = gen_dataset(0, 1, 1, kGrid).front();
  const auto t = encode(pose, kGrid, {});
  const auto r = fit_maps(t, {}, {});
  EXPECT_FALSE(r.diverged);
  const auto d = decode(r.fitted, {});
  EXPECT_LT(distance(d.coords[0], pose.keypoints[0].position()), 0.5);
}

TEST(FitMaps, TraceMonotoneOverSeeds) {
  FitConfig fc;
  fc.max_iters = 1500;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = encode(gen_dataset(seed, 1, 1, kGrid).front(), kGrid, {});
    const auto r = fit_maps(t, {}, fc);
    for (std::size_t i = 1; i < r.trace.size(); ++i) ASSERT_LE(r.trace[i], r.trace[i - 1]) << "seed " << seed;
  }
}

TEST(FitMaps, OversizedStepIsReportedAsDivergence) {
  const auto t = encode(gen_dataset(0, 1, 1, kGrid).front(), kGrid, {});
  FitConfig fc;
  fc.step_size = 2000.0;
  const auto r = fit_maps(t, {}, fc);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.converged);
}

TEST(FitMaps, NoiseInitIsSeeded) {
  const auto t = encode(gen_dataset(0, 1, 1, kGrid).front(), kGrid, {});
  FitConfig fc;
  fc.init = FitInit::kNoise;
  fc.max_iters = 5;
  EXPECT_EQ(fit_maps(t, {}, fc).trace, fit_maps(t, {}, fc).trace);
}

TEST(StrideSweep, ZeroNoise) {
  const auto poses = gen_dataset(0, 200, 2, derive_grid(256, 256, 32));
  const std::vector<std::size_t> strides{4, 8, 16, 32};
  const auto rows = stride_sweep(poses, 256, 256, strides, {}, {});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_LT(r.composite_mean_error, 1e-6);
    EXPECT_EQ(r.plane_count, 3u);
    EXPECT_EQ(r.grid_width, 256 / r.stride);
  }
  const double ratio = rows[3].argmax_mean_error / rows[0].argmax_mean_error;
  EXPECT_GE(ratio, 6.0);
  EXPECT_LE(ratio, 10.0);
  EXPECT_EQ(rows, stride_sweep(poses, 256, 256, strides, {}, {}));
}

TEST(StrideSweep, SystematicPixelShiftIsStrideIndependent) {
  const auto poses = gen_dataset(1, 300, 1, derive_grid(256, 256, 32));
  const std::vector<std::size_t> strides{4, 8, 16, 32};
  const NoiseModel n{NoiseKind::kOffsetJitter, 2.0, 5, NoiseUnits::kPixels, NoiseScope::kPlane};
  const auto rows = stride_sweep(poses, 256, 256, strides, n, {});
  double lo = 1e300;
  double hi = 0.0;
  double alo = 1e300;
  double ahi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.composite_mean_error);
    hi = std::max(hi, r.composite_mean_error);
    alo = std::min(alo, r.argmax_mean_error);
    ahi = std::max(ahi, r.argmax_mean_error);
  }
  EXPECT_LT(hi / lo, 2.0);
  EXPECT_GE(ahi / alo, 4.0);
}

TEST(StrideSweep, IndependentPixelJitterIsAveragedDownAtFineStrides) {
  // With per-cell jitter, finer grids pool more proposals, so composite error
  // falls with S rather than staying flat; it never exceeds the argmax error.
  const auto poses = gen_dataset(2, 300, 1, derive_grid(256, 256, 32));
  const std::vector<std::size_t> strides{4, 8, 16, 32};
  const NoiseModel n{NoiseKind::kOffsetJitter, 2.0, 5, NoiseUnits::kPixels, NoiseScope::kCell};
  const auto rows = stride_sweep(poses, 256, 256, strides, n, {});
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    EXPECT_LT(rows[i].composite_mean_error, rows[i + 1].composite_mean_error);
    EXPECT_GT(rows[i].n_omega_mean, rows[i + 1].n_omega_mean);
  }
  EXPECT_LT(rows[3].composite_mean_error, rows[3].argmax_mean_error);
}

}  // namespace
}  // namespace clpose
