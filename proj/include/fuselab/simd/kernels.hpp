#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace fuselab::simd {

// Data-parallel inner loops of the fusion and metric code.
//
// Every implementation reduces in the same order: four interleaved lanes
// (element i goes to lane i % 4 of the vectorized prefix), lanes combined as
// (l0 + l1) + (l2 + l3), then the scalar tail added left to right. Products
// and sums are never fused. Together these make all ISAs bit-identical, so the
// choice of ISA never changes a fusion result.

struct KernelTable {
  std::string_view name;
  /// sum x[i]
  double (*sum)(const double* x, std::size_t n);
  /// sum x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// sum (1 - y[i]) * w[i]
  double (*dot_complement)(const double* y, const double* w, std::size_t n);
  /// acc[i] += (labels[i] == 1) ? if_one : if_zero
  void (*add_select)(double* acc, const double* labels, double if_one, double if_zero,
                     std::size_t n);
  /// acc[i] += x[i]
  void (*add)(double* acc, const double* x, std::size_t n);
  /// out[i] = q[i] * hi + (1 - q[i]) * lo
  void (*mix)(double* out, const double* q, double hi, double lo, std::size_t n);
  /// out[i] = a[i] * b[i]
  void (*mul)(double* out, const double* a, const double* b, std::size_t n);
  /// out[i] = 1 - x[i]
  void (*complement)(double* out, const double* x, std::size_t n);
};

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);
/// Accepts "scalar", "avx2", "neon" and "auto" (the best supported one).
Isa parse_isa(std::string_view name);

bool isa_supported(Isa isa);
Isa best_isa();

const KernelTable& table_for(Isa isa);

/// The process-wide kernel table; defaults to best_isa().
const KernelTable& kernels();
Isa active_isa();
/// Throws std::invalid_argument when the ISA is not available on this CPU/build.
void set_isa(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(FUSELAB_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(FUSELAB_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace fuselab::simd
