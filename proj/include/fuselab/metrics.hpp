#pragma once

#include <cstddef>
#include <optional>

#include "fuselab/fusion.hpp"
#include "fuselab/volume.hpp"
#include "json.hpp"

namespace fuselab {

inline constexpr double kDiceEpsilon = 1e-7;

/// (Σ T·P + ε) / (0.5 Σ P + 0.5 Σ T + ε). Two empty masks score 1.
double soft_dice(const VolumeGrid& truth, const VolumeGrid& pred, std::size_t threads = 1);

inline double dice_loss(const VolumeGrid& truth, const VolumeGrid& pred) {
  return -soft_dice(truth, pred);
}

/// Voxel-wise evaluation. `dice` is the soft Dice of the raw prediction;
/// tp/fp/fn and precision/recall use the prediction binarized at the
/// threshold (ties to 0). An empty denominator leaves the ratio unset.
struct EvalReport {
  double dice = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
};

/// Soft truth is rejected unless binarize_truth is set, in which case it is
/// binarized with the same rule as the prediction.
EvalReport precision_recall(const VolumeGrid& truth, const VolumeGrid& pred, double threshold = 0.5,
                            bool binarize_truth = false);

/// {"dice":..,"precision":..|null,"recall":..|null,"tp":..,"fp":..,"fn":..}
nlohmann::json to_json(const EvalReport& report);

struct RecoveryError {
  double error = 0.0;
  bool swapped = false;
};

/// max_i max(|Δsens_i|, |Δspec_i|), also scored against the label-swapped
/// solution (sens' = 1 - spec, spec' = 1 - sens); the smaller wins.
RecoveryError param_recovery_error(const RaterParams& estimated, const RaterParams& truth);

/// Voxels with value strictly above `floor`.
std::size_t support_size(const VolumeGrid& grid, double floor = 0.0);

}  // namespace fuselab
