// AVX2 kernels. Compiled with -mavx2 (no -mfma); only reached after a runtime
// CPU check in dispatch.cpp.

#include <immintrin.h>

#include "fuselab/simd/kernels.hpp"

namespace fuselab::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double combine(__m256d acc, double tail) {
  alignas(32) double lane[kLanes];
  _mm256_store_pd(lane, acc);
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + tail;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) tail += x[i];
  return combine(acc, tail);
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, p);
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) {
    const double p = x[i] * y[i];
    tail += p;
  }
  return combine(acc, tail);
}

double dot_complement(const double* y, const double* w, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d c = _mm256_sub_pd(one, _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(c, _mm256_loadu_pd(w + i)));
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
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d v_one = _mm256_set1_pd(if_one);
  const __m256d v_zero = _mm256_set1_pd(if_zero);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d is_one = _mm256_cmp_pd(_mm256_loadu_pd(labels + i), one, _CMP_EQ_OQ);
    const __m256d pick = _mm256_blendv_pd(v_zero, v_one, is_one);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), pick));
  }
  for (std::size_t i = body; i < n; ++i) acc[i] += (labels[i] == 1.0) ? if_one : if_zero;
}

void add(double* acc, const double* x, std::size_t n) {
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  }
  for (std::size_t i = body; i < n; ++i) acc[i] += x[i];
}

void mix(double* out, const double* q, double hi, double lo, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d v_hi = _mm256_set1_pd(hi);
  const __m256d v_lo = _mm256_set1_pd(lo);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    const __m256d vq = _mm256_loadu_pd(q + i);
    const __m256d a = _mm256_mul_pd(vq, v_hi);
    const __m256d b = _mm256_mul_pd(_mm256_sub_pd(one, vq), v_lo);
    _mm256_storeu_pd(out + i, _mm256_add_pd(a, b));
  }
  for (std::size_t i = body; i < n; ++i) {
    const double a = q[i] * hi;
    const double b = (1.0 - q[i]) * lo;
    out[i] = a + b;
  }
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (std::size_t i = body; i < n; ++i) out[i] = a[i] * b[i];
}

void complement(double* out, const double* x, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(one, _mm256_loadu_pd(x + i)));
  }
  for (std::size_t i = body; i < n; ++i) out[i] = 1.0 - x[i];
}

}  // namespace

const KernelTable kAvx2Table = {
    "avx2", sum, dot, dot_complement, add_select, add, mix, mul, complement,
};

}  // namespace fuselab::simd::detail
