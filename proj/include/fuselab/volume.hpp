#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuselab/errors.hpp"

namespace fuselab {

struct Dim3 {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  /// Voxel count. Throws ValidationError on a zero axis or on overflow.
  std::size_t count() const;

  friend bool operator==(const Dim3&, const Dim3&) = default;
};

std::string to_string(const Dim3& dims);

enum class VoxelKind { kIntensity, kBinaryLabel, kSoftLabel, kPosterior };

/// SVOL header spelling: "intensity", "binary", "soft", "posterior".
std::string_view kind_name(VoxelKind kind);
VoxelKind parse_kind(std::string_view name);

/// x-fastest linearization: t = ix + nx * (iy + ny * iz).
std::size_t linear_index(std::size_t ix, std::size_t iy, std::size_t iz, const Dim3& dims);

struct Coord3 {
  std::size_t x, y, z;
};
Coord3 coords_of(std::size_t t, const Dim3& dims);

/// Dense 3D grid of doubles. Construction only checks that the payload length
/// matches the dims; the per-kind value invariants are checked by validate(),
/// which every I/O and algorithm entry point calls.
class VolumeGrid {
 public:
  VolumeGrid() = default;
  VolumeGrid(Dim3 dims, VoxelKind kind, std::vector<double> data);

  static VolumeGrid filled(Dim3 dims, VoxelKind kind, double value);

  const Dim3& dims() const noexcept { return dims_; }
  VoxelKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  double operator[](std::size_t t) const noexcept { return data_[t]; }
  double& operator[](std::size_t t) noexcept { return data_[t]; }

  double at(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return data_[linear_index(ix, iy, iz, dims_)];
  }

  /// Throws ValidationError if any kind invariant is violated.
  void validate() const;

  friend bool operator==(const VolumeGrid&, const VolumeGrid&) = default;

 private:
  Dim3 dims_;
  VoxelKind kind_ = VoxelKind::kIntensity;
  std::vector<double> data_;
};

/// m aligned annotations of one case, all binary or all soft.
struct ExpertStack {
  std::vector<VolumeGrid> experts;
  std::vector<std::string> expert_ids;

  std::size_t size() const noexcept { return experts.size(); }
  const Dim3& dims() const { return experts.front().dims(); }
  VoxelKind kind() const { return experts.front().kind(); }
  std::size_t voxel_count() const { return experts.front().size(); }
};

/// Checks every ExpertStack invariant, including each member's kind invariants.
void validate_stack(const ExpertStack& stack);

/// Expert indices ordered by id. Every per-voxel accumulation over experts
/// walks this order so results are invariant to how the stack was assembled.
std::vector<std::size_t> expert_order(const ExpertStack& stack);

/// Ids "e1", "e2", ... for m experts.
std::vector<std::string> default_ids(std::size_t m);

}  // namespace fuselab
