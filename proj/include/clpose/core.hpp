#ifndef CLPOSE_CORE_HPP
#define CLPOSE_CORE_HPP

// Geometry, configuration and the value types shared by every clpose module.
//
// Coordinate convention: keypoints are continuous image coordinates in pixels.
// Grid cells are 0-based, and cell (i, j) covers the pixel patch
// [i*S, (i+1)*S) x [j*S, (j+1)*S), so its patch center is ((i + C) * S, (j + C) * S)
// with the deviation constant C = 0.5.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clpose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (stride, sigma, tau, weights ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition (mismatched dimensions, out-of-grid cell).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot be evaluated (missing metadata, non-positive normalizer).
class DataError : public Error {
 public:
  using Error::Error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Cell {
  std::size_t x = 0;
  std::size_t y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

class GridSpec {
 public:
  static constexpr double kDefaultDeviation = 0.5;

  GridSpec() = default;

  /// Throws ConfigError unless 1 <= stride <= min(width, height).
  GridSpec(std::size_t width, std::size_t height, std::size_t stride,
           double deviation = kDefaultDeviation)
      : width_(width), height_(height), stride_(stride), deviation_(deviation) {
    if (stride == 0) throw ConfigError("stride must be at least 1");
    if (width < stride || height < stride) {
      throw ConfigError("stride " + std::to_string(stride) + " exceeds image size " +
                        std::to_string(width) + "x" + std::to_string(height));
    }
    if (!std::isfinite(deviation)) throw ConfigError("deviation constant must be finite");
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t stride() const { return stride_; }
  double deviation() const { return deviation_; }
  std::size_t grid_width() const { return stride_ == 0 ? 0 : width_ / stride_; }
  std::size_t grid_height() const { return stride_ == 0 ? 0 : height_ / stride_; }
  std::size_t cell_count() const { return grid_width() * grid_height(); }

  /// Extent of the pixel area covered by whole cells.
  double covered_width() const { return static_cast<double>(grid_width() * stride_); }
  double covered_height() const { return static_cast<double>(grid_height() * stride_); }

  bool contains(Cell c) const { return c.x < grid_width() && c.y < grid_height(); }

  Point2 patch_center(Cell c) const {
    if (!contains(c)) {
      throw ContractError("cell (" + std::to_string(c.x) + ", " + std::to_string(c.y) +
                          ") outside " + std::to_string(grid_width()) + "x" +
                          std::to_string(grid_height()) + " grid");
    }
    const auto s = static_cast<double>(stride_);
    return {(static_cast<double>(c.x) + deviation_) * s, (static_cast<double>(c.y) + deviation_) * s};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t stride_ = 0;
  double deviation_ = kDefaultDeviation;
};

inline GridSpec derive_grid(std::size_t width, std::size_t height, std::size_t stride) {
  return GridSpec(width, height, stride);
}

enum class Visibility { kUnlabeled = 0, kOccluded = 1, kVisible = 2 };

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  Visibility visibility = Visibility::kVisible;

  bool labeled() const { return visibility != Visibility::kUnlabeled; }
  Point2 position() const { return {x, y}; }

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// Axis-aligned box, corners in pixels.
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diagonal() const { return std::hypot(width(), height()); }

  friend bool operator==(const Box&, const Box&) = default;
};

struct NormMeta {
  std::optional<Box> head_box;
  std::optional<std::pair<std::size_t, std::size_t>> torso_endpoints;
  std::optional<double> area;

  friend bool operator==(const NormMeta&, const NormMeta&) = default;
};

struct PoseInstance {
  std::vector<Keypoint> keypoints;
  NormMeta norm_meta;
  /// Detection confidence; only meaningful for predictions fed to OKS evaluation.
  std::optional<double> score;

  std::size_t size() const { return keypoints.size(); }
  std::size_t labeled_count() const {
    std::size_t n = 0;
    for (const auto& kp : keypoints) n += kp.labeled() ? 1 : 0;
    return n;
  }

  friend bool operator==(const PoseInstance&, const PoseInstance&) = default;
};

enum class NormMode { kSquaredDistance = 0, kLiteralL2 = 1 };
enum class RegionSource { kGroundTruth, kPredicted, kUnion };

struct CodecConfig {
  double sigma = 16.0;
  double tau = 0.6;
  NormMode norm_mode = NormMode::kSquaredDistance;
  RegionSource region_source = RegionSource::kGroundTruth;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  }
};

/// One W' x H' plane, row-major with y as the outer index.
struct Plane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), values(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
  double& at(Cell c) { return at(c.x, c.y); }
  double at(Cell c) const { return at(c.x, c.y); }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

/// K heatmaps, K y-offset maps and K x-offset maps over one grid.
/// Offsets are in stride units. `valid[k]` is false for keypoints that were
/// unlabeled at encoding time; loss and metrics skip them.
struct TargetMaps {
  GridSpec grid;
  NormMode norm_mode = NormMode::kSquaredDistance;
  std::vector<Plane> heatmaps;
  std::vector<Plane> y_offsets;
  std::vector<Plane> x_offsets;
  std::vector<bool> valid;

  TargetMaps() = default;
  TargetMaps(const GridSpec& g, std::size_t keypoints)
      : grid(g),
        heatmaps(keypoints, Plane(g.grid_width(), g.grid_height())),
        y_offsets(keypoints, Plane(g.grid_width(), g.grid_height())),
        x_offsets(keypoints, Plane(g.grid_width(), g.grid_height())),
        valid(keypoints, true) {}

  std::size_t keypoints() const { return heatmaps.size(); }
  std::size_t plane_count() const { return 3 * keypoints(); }

  /// Plane by stack index: heatmaps, then y-offsets, then x-offsets.
  Plane& plane(std::size_t i) {
    const auto k = keypoints();
    if (i < k) return heatmaps[i];
    if (i < 2 * k) return y_offsets[i - k];
    return x_offsets.at(i - 2 * k);
  }
  const Plane& plane(std::size_t i) const { return const_cast<TargetMaps*>(this)->plane(i); }

  bool well_formed() const {
    const auto k = keypoints();
    if (y_offsets.size() != k || x_offsets.size() != k || valid.size() != k) return false;
    for (std::size_t i = 0; i < plane_count(); ++i) {
      const auto& p = plane(i);
      if (p.width != grid.grid_width() || p.height != grid.grid_height() ||
          p.values.size() != p.width * p.height) {
        return false;
      }
    }
    return true;
  }

  friend bool operator==(const TargetMaps&, const TargetMaps&) = default;
};

inline void require_compatible(const TargetMaps& a, const TargetMaps& b) {
  if (!a.well_formed() || !b.well_formed()) throw ContractError("malformed map stack");
  if (a.keypoints() != b.keypoints()) {
    throw ContractError("keypoint count mismatch: " + std::to_string(a.keypoints()) + " vs " +
                        std::to_string(b.keypoints()));
  }
  if (a.grid.grid_width() != b.grid.grid_width() || a.grid.grid_height() != b.grid.grid_height() ||
      a.grid.stride() != b.grid.stride()) {
    throw ContractError("grid mismatch between map stacks");
  }
}

struct DecodeDiagnostics {
  std::size_t n_cells = 0;
  bool used_fallback = false;
};

struct DecodedPose {
  std::vector<Point2> coords;
  std::vector<double> confidence;
  std::vector<DecodeDiagnostics> diagnostics;

  std::size_t size() const { return coords.size(); }

  /// Mean keypoint confidence, used as the instance score when none is given.
  double mean_confidence() const {
    if (confidence.empty()) return 0.0;
    double s = 0.0;
    for (double c : confidence) s += c;
    return s / static_cast<double>(confidence.size());
  }
};

}  // namespace clpose

#endif  // CLPOSE_CORE_HPP
