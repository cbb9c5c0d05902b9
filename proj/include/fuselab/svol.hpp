#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fuselab/volume.hpp"

namespace fuselab {

// SVOL layout, little-endian:
//   "SVOL1\0" | u32 header length H | H bytes of JSON {"dims":[nx,ny,nz],"kind":...}
//   | nx*ny*nz f64 values, x-fastest. Nothing follows the payload.

std::vector<std::uint8_t> encode_svol(const VolumeGrid& grid);
VolumeGrid decode_svol(std::span<const std::uint8_t> bytes);

VolumeGrid read_svol(const std::filesystem::path& path);
void write_svol(const VolumeGrid& grid, const std::filesystem::path& path);

}  // namespace fuselab
