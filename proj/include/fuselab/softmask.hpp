#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fuselab/volume.hpp"

namespace fuselab {

/// Unit neighborhood offsets for 6-, 18- or 26-connectivity (origin excluded).
struct StructuringElement {
  std::vector<std::array<int, 3>> offsets;

  static StructuringElement from_connectivity(int connectivity);
};

struct ThresholdMode {
  enum class Kind { kFixedValue, kLesionPercentile };
  Kind kind = Kind::kLesionPercentile;
  double value = 10.0;  ///< FLAIR level, or percentile in [0, 100]

  static ThresholdMode fixed(double level) { return {Kind::kFixedValue, level}; }
  static ThresholdMode percentile(double p) { return {Kind::kLesionPercentile, p}; }
};

struct SoftMaskConfig {
  double gamma = 0.3;
  double target_volume_ratio = 1.2;
  ThresholdMode threshold = ThresholdMode::percentile(10.0);
  int connectivity = 26;
  int max_dilation_iters = 10;

  void validate() const;
};

struct ComponentMap {
  std::vector<std::int32_t> labels;  ///< 0 = background, else component id (1-based)
  std::vector<std::vector<std::size_t>> components;  ///< voxel indices, ascending, by id - 1
};

ComponentMap connected_components(const VolumeGrid& mask, int connectivity);

/// Iterated unit dilation, clipped at the grid bounds.
VolumeGrid dilate(const VolumeGrid& mask, const StructuringElement& se, int iters);

/// What happened to one lesion while building its ring.
struct ComponentReport {
  std::size_t original_voxels = 0;
  int dilation_iters = 0;
  std::size_t dilated_voxels = 0;  ///< component plus all added layers
  double threshold = 0.0;
  std::size_t ring_included = 0;
  std::size_t ring_excluded = 0;
};

struct SoftMask {
  VolumeGrid mask;  ///< values in {0, gamma, 1}
  std::vector<ComponentReport> components;
};

/// Per lesion: grow until the dilated volume reaches target_volume_ratio times
/// the lesion volume (or max_dilation_iters), keep ring voxels whose FLAIR is
/// at least the lesion's threshold at gamma, leave annotated voxels at 1.
SoftMask build_soft_mask_report(const VolumeGrid& binary, const VolumeGrid& flair,
                                const SoftMaskConfig& cfg);
VolumeGrid build_soft_mask(const VolumeGrid& binary, const VolumeGrid& flair,
                           const SoftMaskConfig& cfg);

/// build_soft_mask applied to each expert; ids and order preserved.
ExpertStack build_soft_stack(const ExpertStack& stack, const VolumeGrid& flair,
                             const SoftMaskConfig& cfg);

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value (rank >= 1).
double nearest_rank_percentile(std::vector<double> values, double p);

}  // namespace fuselab
