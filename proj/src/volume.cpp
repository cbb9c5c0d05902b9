#include "fuselab/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace fuselab {

std::size_t Dim3::count() const {
  if (nx == 0 || ny == 0 || nz == 0) {
    throw ValidationError(ValidationError::Reason::kBadDims,
                          "dims must be positive, got " + to_string(*this));
  }
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  if (nx > kMax / ny || nx * ny > kMax / nz) {
    throw ValidationError(ValidationError::Reason::kBadDims,
                          "dims product overflows: " + to_string(*this));
  }
  return nx * ny * nz;
}

std::string to_string(const Dim3& dims) {
  return "(" + std::to_string(dims.nx) + "," + std::to_string(dims.ny) + "," +
         std::to_string(dims.nz) + ")";
}

std::string_view kind_name(VoxelKind kind) {
  switch (kind) {
    case VoxelKind::kIntensity:
      return "intensity";
    case VoxelKind::kBinaryLabel:
      return "binary";
    case VoxelKind::kSoftLabel:
      return "soft";
    case VoxelKind::kPosterior:
      return "posterior";
  }
  return "unknown";
}

VoxelKind parse_kind(std::string_view name) {
  if (name == "intensity") return VoxelKind::kIntensity;
  if (name == "binary") return VoxelKind::kBinaryLabel;
  if (name == "soft") return VoxelKind::kSoftLabel;
  if (name == "posterior") return VoxelKind::kPosterior;
  throw ValidationError(ValidationError::Reason::kUnsupportedKind,
                        "unknown voxel kind '" + std::string(name) + "'");
}

std::size_t linear_index(std::size_t ix, std::size_t iy, std::size_t iz, const Dim3& dims) {
  if (ix >= dims.nx || iy >= dims.ny || iz >= dims.nz) {
    throw IndexError("voxel (" + std::to_string(ix) + "," + std::to_string(iy) + "," +
                     std::to_string(iz) + ") outside grid " + to_string(dims));
  }
  return ix + dims.nx * (iy + dims.ny * iz);
}

Coord3 coords_of(std::size_t t, const Dim3& dims) {
  const std::size_t x = t % dims.nx;
  const std::size_t rest = t / dims.nx;
  return {x, rest % dims.ny, rest / dims.ny};
}

VolumeGrid::VolumeGrid(Dim3 dims, VoxelKind kind, std::vector<double> data)
    : dims_(dims), kind_(kind), data_(std::move(data)) {
  if (data_.size() != dims_.count()) {
    throw ValidationError(ValidationError::Reason::kSizeMismatch,
                          "payload has " + std::to_string(data_.size()) +
                              " values, dims " + to_string(dims_) + " need " +
                              std::to_string(dims_.count()));
  }
}

VolumeGrid VolumeGrid::filled(Dim3 dims, VoxelKind kind, double value) {
  return VolumeGrid(dims, kind, std::vector<double>(dims.count(), value));
}

void VolumeGrid::validate() const {
  if (data_.size() != dims_.count()) {
    throw ValidationError(ValidationError::Reason::kSizeMismatch, "payload/dims mismatch");
  }
  for (std::size_t t = 0; t < data_.size(); ++t) {
    const double v = data_[t];
    bool ok = true;
    switch (kind_) {
      case VoxelKind::kIntensity:
        if (!std::isfinite(v)) {
          throw ValidationError(ValidationError::Reason::kNonFinite,
                                "non-finite intensity at voxel " + std::to_string(t));
        }
        break;
      case VoxelKind::kBinaryLabel:
        ok = (v == 0.0 || v == 1.0);
        break;
      case VoxelKind::kSoftLabel:
      case VoxelKind::kPosterior:
        ok = (v >= 0.0 && v <= 1.0);  // false for NaN
        break;
    }
    if (!ok) {
      throw ValidationError(ValidationError::Reason::kRangeViolation,
                            std::string(kind_name(kind_)) + " grid has value " +
                                std::to_string(v) + " at voxel " + std::to_string(t));
    }
  }
}

void validate_stack(const ExpertStack& stack) {
  using R = ValidationError::Reason;
  if (stack.experts.empty()) throw ValidationError(R::kEmptyStack, "expert stack is empty");
  if (stack.expert_ids.size() != stack.experts.size()) {
    throw ValidationError(R::kSizeMismatch, "expert id count does not match grid count");
  }
  const VolumeGrid& first = stack.experts.front();
  if (first.kind() != VoxelKind::kBinaryLabel && first.kind() != VoxelKind::kSoftLabel) {
    throw ValidationError(R::kUnsupportedKind, "expert grids must be binary or soft, got " +
                                                   std::string(kind_name(first.kind())));
  }
  for (std::size_t i = 0; i < stack.experts.size(); ++i) {
    const VolumeGrid& g = stack.experts[i];
    if (!(g.dims() == first.dims())) {
      throw ValidationError(R::kDimensionMismatch,
                            "expert '" + stack.expert_ids[i] + "' has dims " +
                                to_string(g.dims()) + ", expected " + to_string(first.dims()));
    }
    if (g.kind() != first.kind()) {
      throw ValidationError(R::kMixedKinds, "expert '" + stack.expert_ids[i] +
                                                "' kind differs from the first expert");
    }
  }
  std::set<std::string> seen;
  for (const auto& id : stack.expert_ids) {
    if (!seen.insert(id).second) {
      throw ValidationError(R::kDuplicateId, "duplicate expert id '" + id + "'");
    }
  }
  for (const auto& g : stack.experts) g.validate();
}

std::vector<std::size_t> expert_order(const ExpertStack& stack) {
  std::vector<std::size_t> order(stack.experts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (stack.expert_ids.size() == order.size()) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return stack.expert_ids[a] < stack.expert_ids[b];
    });
  }
  return order;
}

std::vector<std::string> default_ids(std::size_t m) {
  std::vector<std::string> ids;
  ids.reserve(m);
  for (std::size_t i = 0; i < m; ++i) ids.push_back("e" + std::to_string(i + 1));
  return ids;
}

}  // namespace fuselab
