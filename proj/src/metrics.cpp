#include "fuselab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fuselab/errors.hpp"
#include "fuselab/parallel.hpp"
#include "fuselab/simd/kernels.hpp"

namespace fuselab {
namespace {

using VR = ValidationError::Reason;

void require_label_grid(const VolumeGrid& g, const char* what) {
  if (g.kind() == VoxelKind::kIntensity) {
    throw ValidationError(VR::kUnsupportedKind, std::string(what) + " must be a label grid");
  }
  g.validate();
}

void require_same_dims(const VolumeGrid& a, const VolumeGrid& b) {
  if (!(a.dims() == b.dims())) {
    throw ValidationError(VR::kDimensionMismatch,
                          "dims " + to_string(a.dims()) + " and " + to_string(b.dims()) + " differ");
  }
}

}  // namespace

double soft_dice(const VolumeGrid& truth, const VolumeGrid& pred, std::size_t threads) {
  require_same_dims(truth, pred);
  require_label_grid(truth, "truth");
  require_label_grid(pred, "prediction");
  const auto& k = simd::kernels();
  const std::size_t n = truth.size();
  const double* t = truth.values().data();
  const double* p = pred.values().data();
  // Σ T·P is symmetric bitwise; Σ T + Σ P is ordered so swapping arguments
  // cannot change the result.
  const double overlap =
      reduce_ranges(n, threads, [&](Range r) { return k.dot(t + r.begin, p + r.begin, r.size()); });
  const double sum_t = reduce_ranges(n, threads, [&](Range r) { return k.sum(t + r.begin, r.size()); });
  const double sum_p = reduce_ranges(n, threads, [&](Range r) { return k.sum(p + r.begin, r.size()); });
  const double lo = std::min(sum_t, sum_p);
  const double hi = std::max(sum_t, sum_p);
  const double score = (overlap + kDiceEpsilon) / (0.5 * lo + 0.5 * hi + kDiceEpsilon);
  return std::min(1.0, std::max(0.0, score));
}

EvalReport precision_recall(const VolumeGrid& truth, const VolumeGrid& pred, double threshold,
                            bool binarize_truth) {
  require_same_dims(truth, pred);
  require_label_grid(truth, "truth");
  require_label_grid(pred, "prediction");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError(VR::kBadConfig, "threshold must lie in (0,1)");
  }
  const bool truth_is_binary = truth.kind() == VoxelKind::kBinaryLabel;
  if (!truth_is_binary && !binarize_truth) {
    throw ValidationError(VR::kUnsupportedKind,
                          "truth is not binary; pass the binarize-truth option to threshold it");
  }

  std::vector<double> hard_truth(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    hard_truth[t] = truth_is_binary ? truth[t] : (truth[t] > threshold ? 1.0 : 0.0);
  }
  const VolumeGrid truth_grid(truth.dims(), VoxelKind::kBinaryLabel, std::move(hard_truth));

  EvalReport report;
  report.dice = soft_dice(truth_grid, pred);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const bool tv = truth_grid[t] == 1.0;
    const bool pv = pred[t] > threshold;
    if (tv && pv) report.tp += 1.0;
    if (!tv && pv) report.fp += 1.0;
    if (tv && !pv) report.fn += 1.0;
  }
  if (report.tp + report.fp > 0.0) report.precision = report.tp / (report.tp + report.fp);
  if (report.tp + report.fn > 0.0) report.recall = report.tp / (report.tp + report.fn);
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["dice"] = report.dice;
  j["precision"] = report.precision ? nlohmann::json(*report.precision) : nlohmann::json(nullptr);
  j["recall"] = report.recall ? nlohmann::json(*report.recall) : nlohmann::json(nullptr);
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["fn"] = report.fn;
  return j;
}

RecoveryError param_recovery_error(const RaterParams& estimated, const RaterParams& truth) {
  if (estimated.size() != truth.size()) {
    throw ValidationError(VR::kSizeMismatch, "rater count mismatch in recovery error");
  }
  double direct = 0.0, swapped = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& e = estimated[i];
    const auto& g = truth[i];
    direct = std::max({direct, std::abs(e.sensitivity - g.sensitivity),
                       std::abs(e.specificity - g.specificity)});
    swapped = std::max({swapped, std::abs(e.sensitivity - (1.0 - g.specificity)),
                        std::abs(e.specificity - (1.0 - g.sensitivity))});
  }
  if (swapped < direct) return {swapped, true};
  return {direct, false};
}

std::size_t support_size(const VolumeGrid& grid, double floor) {
  return static_cast<std::size_t>(
      std::count_if(grid.values().begin(), grid.values().end(), [&](double v) { return v > floor; }));
}

}  // namespace fuselab
