#ifndef CLPOSE_METRICS_HPP
#define CLPOSE_METRICS_HPP

// PCK / PCKh for single-person evaluation and OKS-based AP / AR.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "clpose/core.hpp"

namespace clpose {

enum class NormalizerKind { kTorso, kHead, kExplicit };

struct NormalizerSpec {
  /// MPII head size: this fraction of the head-box diagonal.
  static constexpr double kHeadFraction = 0.6;

  NormalizerKind kind = NormalizerKind::kTorso;
  double value = 0.0;  // only for kExplicit
};

inline double resolve_normalizer(const PoseInstance& instance, const NormalizerSpec& spec) {
  switch (spec.kind) {
    case NormalizerKind::kExplicit:
      return spec.value;
    case NormalizerKind::kHead:
      if (!instance.norm_meta.head_box) throw DataError("instance has no head box");
      return NormalizerSpec::kHeadFraction * instance.norm_meta.head_box->diagonal();
    case NormalizerKind::kTorso: {
      if (!instance.norm_meta.torso_endpoints) throw DataError("instance has no torso endpoints");
      const auto [a, b] = *instance.norm_meta.torso_endpoints;
      if (a >= instance.size() || b >= instance.size()) throw DataError("torso endpoint index out of range");
      const auto& ka = instance.keypoints[a];
      const auto& kb = instance.keypoints[b];
      if (!ka.labeled() || !kb.labeled()) throw DataError("torso endpoint keypoint is unlabeled");
      return distance(ka.position(), kb.position());
    }
  }
  throw DataError("unknown normalizer kind");
}

struct PckReport {
  double overall = 0.0;
  /// Empty where no instance labels that keypoint.
  std::vector<std::optional<double>> per_keypoint;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// A keypoint counts as correct iff its error is <= alpha * normalizer.
inline PckReport pck(std::span<const DecodedPose> predictions, std::span<const PoseInstance> ground_truths,
                     std::span<const double> normalizers, double alpha) {
  if (predictions.size() != ground_truths.size() || normalizers.size() != ground_truths.size()) {
    throw ContractError("pck: predictions, ground truths and normalizers differ in length");
  }
  std::size_t K = 0;
  for (const auto& gt : ground_truths) K = std::max(K, gt.size());
  std::vector<std::size_t> hit(K, 0);
  std::vector<std::size_t> seen(K, 0);
  PckReport report;
  for (std::size_t i = 0; i < ground_truths.size(); ++i) {
    const auto& gt = ground_truths[i];
    const auto& pred = predictions[i];
    if (pred.size() != gt.size()) {
      throw ContractError("pck: instance " + std::to_string(i) + " keypoint count mismatch");
    }
    if (!(normalizers[i] > 0.0) || !std::isfinite(normalizers[i])) {
      throw DataError("pck: instance " + std::to_string(i) + " has non-positive normalizer " +
                      std::to_string(normalizers[i]));
    }
    const double threshold = alpha * normalizers[i];
    for (std::size_t k = 0; k < gt.size(); ++k) {
      if (!gt.keypoints[k].labeled()) continue;
      const double err = distance(pred.coords[k], gt.keypoints[k].position());
      const bool ok = err <= threshold;
      ++seen[k];
      ++report.total;
      if (ok) {
        ++hit[k];
        ++report.correct;
      }
    }
  }
  report.overall = report.total == 0 ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(report.total);
  for (std::size_t k = 0; k < K; ++k) {
    report.per_keypoint.push_back(seen[k] == 0 ? std::nullopt
                                               : std::optional<double>(static_cast<double>(hit[k]) /
                                                                       static_cast<double>(seen[k])));
  }
  return report;
}

/// Per-keypoint OKS falloff constants. The kernel is exp(-d^2 / (2 s^2 kappa^2)).
struct OksConstants {
  std::vector<double> kappas;

  void validate(std::size_t K) const {
    if (kappas.size() != K) {
      throw ContractError("OKS constants cover " + std::to_string(kappas.size()) + " keypoints, expected " +
                          std::to_string(K));
    }
    for (double k : kappas) {
      if (!(k > 0.0)) throw ConfigError("OKS constants must be positive");
    }
  }
};

inline double oks(const DecodedPose& prediction, const PoseInstance& gt, const OksConstants& constants) {
  constants.validate(gt.size());
  if (prediction.size() != gt.size()) throw ContractError("oks: keypoint count mismatch");
  if (!gt.norm_meta.area || !(*gt.norm_meta.area > 0.0)) throw DataError("oks: ground truth needs a positive area");
  const double s2 = *gt.norm_meta.area;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (!gt.keypoints[k].labeled()) continue;
    const double dx = prediction.coords[k].x - gt.keypoints[k].x;
    const double dy = prediction.coords[k].y - gt.keypoints[k].y;
    const double kappa = constants.kappas[k];
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * s2 * kappa * kappa));
    ++n;
  }
  if (n == 0) throw DataError("oks: ground truth has no labeled keypoints");
  return sum / static_cast<double>(n);
}

struct ScoredPose {
  DecodedPose pose;
  double score = 0.0;
};

inline std::vector<double> default_oks_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return t;
}

struct OksApReport {
  double ap = 0.0;
  std::optional<double> ap50;
  std::optional<double> ap75;
  double ar = 0.0;
  std::vector<double> thresholds;
  std::vector<double> ap_per_threshold;
  std::vector<double> recall_per_threshold;
};

/// Area under the 101-point interpolated precision/recall curve for a ranked
/// list of true/false positive flags.
inline double interpolated_ap(const std::vector<char>& ranked_tp, std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  const std::size_t n = ranked_tp.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int j = 0; j <= 100; ++j) {
    const double r = static_cast<double>(j) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

namespace detail {

// Ordering key making the ranking independent of input order: score
// descending, then coordinates lexicographically.
inline bool ranks_before(const ScoredPose& a, const ScoredPose& b) {
  if (a.score != b.score) return a.score > b.score;
  for (std::size_t k = 0; k < std::min(a.pose.size(), b.pose.size()); ++k) {
    if (a.pose.coords[k].x != b.pose.coords[k].x) return a.pose.coords[k].x < b.pose.coords[k].x;
    if (a.pose.coords[k].y != b.pose.coords[k].y) return a.pose.coords[k].y < b.pose.coords[k].y;
  }
  return a.pose.size() < b.pose.size();
}

}  // namespace detail

/// COCO-style evaluation: per image, detections in descending score order are
/// greedily matched to the unmatched ground truth of highest OKS >= threshold.
/// Ground truths without labeled keypoints are ignored.
inline OksApReport oks_ap(const std::vector<std::vector<ScoredPose>>& detections,
                          const std::vector<std::vector<PoseInstance>>& ground_truths,
                          const OksConstants& constants,
                          const std::vector<double>& thresholds = default_oks_thresholds()) {
  if (detections.size() != ground_truths.size()) throw ContractError("oks_ap: image count mismatch");
  if (thresholds.empty()) throw ConfigError("oks_ap: no thresholds");

  struct Ranked {
    double score;
    std::size_t image;
    std::size_t rank;
  };
  std::vector<std::vector<ScoredPose>> sorted(detections.size());
  std::vector<std::vector<std::vector<double>>> similarity(detections.size());
  std::vector<Ranked> global;
  std::size_t n_gt = 0;

  for (std::size_t img = 0; img < detections.size(); ++img) {
    sorted[img] = detections[img];
    std::stable_sort(sorted[img].begin(), sorted[img].end(), detail::ranks_before);
    std::vector<const PoseInstance*> gts;
    for (const auto& g : ground_truths[img]) {
      if (g.labeled_count() > 0) gts.push_back(&g);
    }
    n_gt += gts.size();
    auto& sim = similarity[img];
    for (std::size_t d = 0; d < sorted[img].size(); ++d) {
      std::vector<double> row;
      for (const auto* g : gts) row.push_back(oks(sorted[img][d].pose, *g, constants));
      sim.push_back(std::move(row));
      global.push_back({sorted[img][d].score, img, d});
    }
  }
  std::stable_sort(global.begin(), global.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.image, a.rank) < std::tie(b.image, b.rank);
  });

  OksApReport report;
  report.thresholds = thresholds;
  for (double threshold : thresholds) {
    std::vector<std::vector<char>> is_tp(detections.size());
    std::size_t tp_total = 0;
    for (std::size_t img = 0; img < detections.size(); ++img) {
      const auto& sim = similarity[img];
      is_tp[img].assign(sim.size(), 0);
      std::vector<char> taken(sim.empty() ? 0 : sim.front().size(), 0);
      for (std::size_t d = 0; d < sim.size(); ++d) {
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < sim[d].size(); ++g) {
          if (taken[g] || !(sim[d][g] >= threshold)) continue;
          if (!best || sim[d][g] > sim[d][*best]) best = g;
        }
        if (best) {
          taken[*best] = 1;
          is_tp[img][d] = 1;
          ++tp_total;
        }
      }
    }
    std::vector<char> ranked;
    ranked.reserve(global.size());
    for (const auto& r : global) ranked.push_back(is_tp[r.image][r.rank]);
    report.ap_per_threshold.push_back(interpolated_ap(ranked, n_gt));
    report.recall_per_threshold.push_back(n_gt == 0 ? 0.0
                                                    : static_cast<double>(tp_total) / static_cast<double>(n_gt));
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  report.ap = mean(report.ap_per_threshold);
  report.ar = mean(report.recall_per_threshold);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - 0.50) < 1e-9) report.ap50 = report.ap_per_threshold[i];
    if (std::abs(thresholds[i] - 0.75) < 1e-9) report.ap75 = report.ap_per_threshold[i];
  }
  return report;
}

}  // namespace clpose

#endif  // CLPOSE_METRICS_HPP
