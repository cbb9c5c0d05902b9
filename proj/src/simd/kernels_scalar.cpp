// Portable reference kernels. The reductions keep four lane accumulators so
// they reproduce the vector kernels bit for bit.

#include "fuselab/simd/kernels.hpp"

namespace fuselab::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double combine(const double (&acc)[kLanes], double tail) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
}

double sum(const double* x, std::size_t n) {
  double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += x[i + l];
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) tail += x[i];
  return combine(acc, tail);
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double p = x[i + l] * y[i + l];
      acc[l] += p;
    }
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) {
    const double p = x[i] * y[i];
    tail += p;
  }
  return combine(acc, tail);
}

double dot_complement(const double* y, const double* w, std::size_t n) {
  double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double c = 1.0 - y[i + l];
      const double p = c * w[i + l];
      acc[l] += p;
    }
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) {
    const double c = 1.0 - y[i];
    const double p = c * w[i];
    tail += p;
  }
  return combine(acc, tail);
}

void add_select(double* acc, const double* labels, double if_one, double if_zero, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += (labels[i] == 1.0) ? if_one : if_zero;
}

void add(double* acc, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

void mix(double* out, const double* q, double hi, double lo, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = q[i] * hi;
    const double b = (1.0 - q[i]) * lo;
    out[i] = a + b;
  }
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void complement(double* out, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 - x[i];
}

}  // namespace

const KernelTable kScalarTable = {
    "scalar", sum, dot, dot_complement, add_select, add, mix, mul, complement,
};

}  // namespace fuselab::simd::detail
