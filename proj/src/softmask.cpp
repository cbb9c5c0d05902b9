#include "fuselab/softmask.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "fuselab/errors.hpp"

namespace fuselab {
namespace {

using VR = ValidationError::Reason;

/// Calls fn(neighbor index) for every in-bounds offset of voxel t.
template <class Fn>
void for_each_neighbor(std::size_t t, const Dim3& dims, const StructuringElement& se, Fn&& fn) {
  const Coord3 c = coords_of(t, dims);
  for (const auto& o : se.offsets) {
    const long x = static_cast<long>(c.x) + o[0];
    const long y = static_cast<long>(c.y) + o[1];
    const long z = static_cast<long>(c.z) + o[2];
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(dims.nx) ||
        y >= static_cast<long>(dims.ny) || z >= static_cast<long>(dims.nz)) {
      continue;
    }
    fn(static_cast<std::size_t>(x) +
       dims.nx * (static_cast<std::size_t>(y) + dims.ny * static_cast<std::size_t>(z)));
  }
}

void require_binary(const VolumeGrid& g, const char* what) {
  if (g.kind() != VoxelKind::kBinaryLabel) {
    throw ValidationError(VR::kUnsupportedKind, std::string(what) + " must be a binary grid");
  }
  g.validate();
}

}  // namespace

StructuringElement StructuringElement::from_connectivity(int connectivity) {
  int max_manhattan = 0;
  switch (connectivity) {
    case 6:
      max_manhattan = 1;
      break;
    case 18:
      max_manhattan = 2;
      break;
    case 26:
      max_manhattan = 3;
      break;
    default:
      throw ValidationError(VR::kBadConfig,
                            "connectivity must be 6, 18 or 26, got " + std::to_string(connectivity));
  }
  StructuringElement se;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int d = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (d > 0 && d <= max_manhattan) se.offsets.push_back({dx, dy, dz});
      }
    }
  }
  return se;
}

void SoftMaskConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError(VR::kBadConfig, "gamma must lie in the open interval (0,1)");
  }
  if (!(target_volume_ratio >= 1.0) || !std::isfinite(target_volume_ratio)) {
    throw ValidationError(VR::kBadConfig, "target volume ratio must be at least 1");
  }
  if (threshold.kind == ThresholdMode::Kind::kLesionPercentile &&
      !(threshold.value >= 0.0 && threshold.value <= 100.0)) {
    throw ValidationError(VR::kBadConfig, "threshold percentile must lie in [0,100]");
  }
  if (threshold.kind == ThresholdMode::Kind::kFixedValue && !std::isfinite(threshold.value)) {
    throw ValidationError(VR::kBadConfig, "fixed threshold must be finite");
  }
  StructuringElement::from_connectivity(connectivity);
  if (max_dilation_iters < 1) {
    throw ValidationError(VR::kBadConfig, "max_dilation_iters must be positive");
  }
}

ComponentMap connected_components(const VolumeGrid& mask, int connectivity) {
  require_binary(mask, "component mask");
  const auto se = StructuringElement::from_connectivity(connectivity);
  const Dim3& dims = mask.dims();
  ComponentMap out;
  out.labels.assign(mask.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (mask[seed] != 1.0 || out.labels[seed] != 0) continue;
    const auto id = static_cast<std::int32_t>(out.components.size() + 1);
    std::vector<std::size_t> members;
    out.labels[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t t = queue.front();
      queue.pop_front();
      members.push_back(t);
      for_each_neighbor(t, dims, se, [&](std::size_t nb) {
        if (mask[nb] == 1.0 && out.labels[nb] == 0) {
          out.labels[nb] = id;
          queue.push_back(nb);
        }
      });
    }
    std::sort(members.begin(), members.end());
    out.components.push_back(std::move(members));
  }
  return out;
}

VolumeGrid dilate(const VolumeGrid& mask, const StructuringElement& se, int iters) {
  require_binary(mask, "dilation input");
  if (iters < 0) throw ValidationError(VR::kBadConfig, "dilation iterations must be >= 0");
  std::vector<double> out(mask.values().begin(), mask.values().end());
  std::vector<std::size_t> frontier;
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t] == 1.0) frontier.push_back(t);
  }
  for (int it = 0; it < iters && !frontier.empty(); ++it) {
    std::vector<std::size_t> next;
    for (std::size_t t : frontier) {
      for_each_neighbor(t, mask.dims(), se, [&](std::size_t nb) {
        if (out[nb] != 1.0) {
          out[nb] = 1.0;
          next.push_back(nb);
        }
      });
    }
    frontier = std::move(next);
  }
  return VolumeGrid(mask.dims(), VoxelKind::kBinaryLabel, std::move(out));
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

SoftMask build_soft_mask_report(const VolumeGrid& binary, const VolumeGrid& flair,
                                const SoftMaskConfig& cfg) {
  cfg.validate();
  require_binary(binary, "annotation");
  if (!(binary.dims() == flair.dims())) {
    throw ValidationError(VR::kDimensionMismatch, "annotation dims " + to_string(binary.dims()) +
                                                      " differ from FLAIR dims " +
                                                      to_string(flair.dims()));
  }
  if (flair.kind() != VoxelKind::kIntensity) {
    throw ValidationError(VR::kUnsupportedKind, "FLAIR grid must have kind intensity");
  }
  flair.validate();

  const Dim3& dims = binary.dims();
  const auto se = StructuringElement::from_connectivity(cfg.connectivity);
  const ComponentMap cc = connected_components(binary, cfg.connectivity);

  SoftMask result;
  std::vector<double> out(binary.values().begin(), binary.values().end());
  // stamp[t] == id + 1 marks voxel t as inside the current component's grown set.
  std::vector<std::uint32_t> stamp(binary.size(), 0);

  for (std::size_t c = 0; c < cc.components.size(); ++c) {
    const auto& members = cc.components[c];
    const auto id = static_cast<std::uint32_t>(c + 1);
    ComponentReport report;
    report.original_voxels = members.size();

    for (std::size_t t : members) stamp[t] = id;
    std::vector<std::size_t> frontier = members;
    std::vector<std::size_t> ring;
    const double target = cfg.target_volume_ratio * static_cast<double>(members.size());
    std::size_t grown = members.size();
    while (static_cast<double>(grown) < target && report.dilation_iters < cfg.max_dilation_iters) {
      std::vector<std::size_t> next;
      for (std::size_t t : frontier) {
        for_each_neighbor(t, dims, se, [&](std::size_t nb) {
          if (stamp[nb] != id) {
            stamp[nb] = id;
            next.push_back(nb);
          }
        });
      }
      if (next.empty()) break;
      grown += next.size();
      ring.insert(ring.end(), next.begin(), next.end());
      frontier = std::move(next);
      ++report.dilation_iters;
    }
    report.dilated_voxels = grown;

    if (cfg.threshold.kind == ThresholdMode::Kind::kFixedValue) {
      report.threshold = cfg.threshold.value;
    } else {
      std::vector<double> levels;
      levels.reserve(members.size());
      for (std::size_t t : members) levels.push_back(flair[t]);
      report.threshold = nearest_rank_percentile(std::move(levels), cfg.threshold.value);
    }

    for (std::size_t t : ring) {
      if (binary[t] == 1.0) continue;  // annotated by another lesion: stays 1
      if (flair[t] >= report.threshold) {
        out[t] = cfg.gamma;
        ++report.ring_included;
      } else {
        ++report.ring_excluded;
      }
    }
    result.components.push_back(report);
  }

  result.mask = VolumeGrid(dims, VoxelKind::kSoftLabel, std::move(out));
  return result;
}

VolumeGrid build_soft_mask(const VolumeGrid& binary, const VolumeGrid& flair,
                           const SoftMaskConfig& cfg) {
  return build_soft_mask_report(binary, flair, cfg).mask;
}

ExpertStack build_soft_stack(const ExpertStack& stack, const VolumeGrid& flair,
                             const SoftMaskConfig& cfg) {
  validate_stack(stack);
  if (stack.kind() != VoxelKind::kBinaryLabel) {
    throw ValidationError(VR::kUnsupportedKind, "soft masks are built from binary annotations");
  }
  ExpertStack out;
  out.expert_ids = stack.expert_ids;
  out.experts.reserve(stack.size());
  for (const auto& g : stack.experts) out.experts.push_back(build_soft_mask(g, flair, cfg));
  return out;
}

}  // namespace fuselab
