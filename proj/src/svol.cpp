#include "fuselab/svol.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

namespace fuselab {
namespace {

constexpr std::array<std::uint8_t, 6> kMagic = {'S', 'V', 'O', 'L', '1', '\0'};
constexpr std::size_t kPrefix = kMagic.size() + 4;

using FR = FormatError::Reason;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f64(std::uint8_t* dst, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) dst[b] = static_cast<std::uint8_t>(bits >> (8 * b));
}

std::uint32_t get_u32(const std::uint8_t* src) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{src[b]} << (8 * b);
  return v;
}

double get_f64(const std::uint8_t* src) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t{src[b]} << (8 * b);
  return std::bit_cast<double>(bits);
}

Dim3 parse_dims(const nlohmann::json& header) {
  if (!header.contains("dims")) throw FormatError(FR::kBadHeader, "SVOL header lacks 'dims'");
  const auto& d = header["dims"];
  if (!d.is_array() || d.size() != 3) {
    throw FormatError(FR::kBadHeader, "SVOL 'dims' must be an array of 3 integers");
  }
  std::array<std::size_t, 3> n{};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!d[a].is_number_unsigned() || d[a].get<std::uint64_t>() == 0) {
      throw FormatError(FR::kBadHeader, "SVOL 'dims' entries must be positive integers");
    }
    n[a] = d[a].get<std::size_t>();
  }
  return {n[0], n[1], n[2]};
}

VoxelKind parse_header_kind(const nlohmann::json& header) {
  if (!header.contains("kind") || !header["kind"].is_string()) {
    throw FormatError(FR::kBadHeader, "SVOL header lacks string 'kind'");
  }
  try {
    return parse_kind(header["kind"].get<std::string>());
  } catch (const ValidationError& e) {
    throw FormatError(FR::kBadHeader, e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_svol(const VolumeGrid& grid) {
  grid.validate();
  nlohmann::json header;
  header["dims"] = {grid.dims().nx, grid.dims().ny, grid.dims().nz};
  header["kind"] = std::string(kind_name(grid.kind()));
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(kPrefix + text.size() + 8 * grid.size());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const std::size_t payload = out.size();
  out.resize(payload + 8 * grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) put_f64(out.data() + payload + 8 * t, grid[t]);
  return out;
}

VolumeGrid decode_svol(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(FR::kBadMagic, "not an SVOL file (bad magic)");
  }
  if (bytes.size() < kPrefix) throw FormatError(FR::kTruncated, "SVOL file truncated in prefix");
  const std::size_t header_len = get_u32(bytes.data() + kMagic.size());
  if (bytes.size() < kPrefix + header_len) {
    throw FormatError(FR::kTruncated, "SVOL file truncated in header");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FR::kBadHeader, std::string("SVOL header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) throw FormatError(FR::kBadHeader, "SVOL header must be a JSON object");
  const Dim3 dims = parse_dims(header);
  const VoxelKind kind = parse_header_kind(header);

  std::size_t n = 0;
  try {
    n = dims.count();
  } catch (const ValidationError& e) {
    throw FormatError(FR::kHeaderMismatch, e.what());
  }
  const std::size_t available = bytes.size() - kPrefix - header_len;
  if (available / 8 < n) {
    throw FormatError(FR::kTruncated, "SVOL payload truncated: dims " + to_string(dims) +
                                          " need " + std::to_string(n) + " values");
  }
  if (available != 8 * n) {
    throw FormatError(FR::kTrailingBytes, "SVOL payload has " +
                                              std::to_string(available - 8 * n) +
                                              " trailing bytes");
  }

  std::vector<double> data(n);
  const std::uint8_t* payload = bytes.data() + kPrefix + header_len;
  for (std::size_t t = 0; t < n; ++t) data[t] = get_f64(payload + 8 * t);
  VolumeGrid grid(dims, kind, std::move(data));
  try {
    grid.validate();
  } catch (const ValidationError& e) {
    throw FormatError(FR::kRangeViolation, e.what());
  }
  return grid;
}

VolumeGrid read_svol(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FR::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_svol(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.reason(), path.string() + ": " + e.what());
  }
}

void write_svol(const VolumeGrid& grid, const std::filesystem::path& path) {
  const auto bytes = encode_svol(grid);  // validates before touching the file
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FR::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FR::kIo, "write failed for " + path.string());
}

}  // namespace fuselab
