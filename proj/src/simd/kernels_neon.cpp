// AArch64 NEON kernels. A pair of float64x2 registers stands in for the four
// reduction lanes (lo = lanes 0,1; hi = lanes 2,3).

#include <arm_neon.h>

#include "fuselab/simd/kernels.hpp"

namespace fuselab::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double combine(float64x2_t lo, float64x2_t hi, double tail) {
  const double l0 = vgetq_lane_f64(lo, 0);
  const double l1 = vgetq_lane_f64(lo, 1);
  const double l2 = vgetq_lane_f64(hi, 0);
  const double l3 = vgetq_lane_f64(hi, 1);
  return ((l0 + l1) + (l2 + l3)) + tail;
}

double sum(const double* x, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) tail += x[i];
  return combine(lo, hi, tail);
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) {
    const double p = x[i] * y[i];
    tail += p;
  }
  return combine(lo, hi, tail);
}

double dot_complement(const double* y, const double* w, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    lo = vaddq_f64(lo, vmulq_f64(vsubq_f64(one, vld1q_f64(y + i)), vld1q_f64(w + i)));
    hi = vaddq_f64(hi, vmulq_f64(vsubq_f64(one, vld1q_f64(y + i + 2)), vld1q_f64(w + i + 2)));
  }
  double tail = 0.0;
  for (std::size_t i = body; i < n; ++i) {
    const double c = 1.0 - y[i];
    const double p = c * w[i];
    tail += p;
  }
  return combine(lo, hi, tail);
}

void add_select(double* acc, const double* labels, double if_one, double if_zero, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t v_one = vdupq_n_f64(if_one);
  const float64x2_t v_zero = vdupq_n_f64(if_zero);
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    const uint64x2_t is_one = vceqq_f64(vld1q_f64(labels + i), one);
    const float64x2_t pick = vbslq_f64(is_one, v_one, v_zero);
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), pick));
  }
  for (std::size_t i = body; i < n; ++i) acc[i] += (labels[i] == 1.0) ? if_one : if_zero;
}

void add(double* acc, const double* x, std::size_t n) {
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vld1q_f64(x + i)));
  }
  for (std::size_t i = body; i < n; ++i) acc[i] += x[i];
}

void mix(double* out, const double* q, double hi, double lo, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t v_hi = vdupq_n_f64(hi);
  const float64x2_t v_lo = vdupq_n_f64(lo);
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    const float64x2_t vq = vld1q_f64(q + i);
    const float64x2_t a = vmulq_f64(vq, v_hi);
    const float64x2_t b = vmulq_f64(vsubq_f64(one, vq), v_lo);
    vst1q_f64(out + i, vaddq_f64(a, b));
  }
  for (std::size_t i = body; i < n; ++i) {
    const double a = q[i] * hi;
    const double b = (1.0 - q[i]) * lo;
    out[i] = a + b;
  }
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (std::size_t i = body; i < n; ++i) out[i] = a[i] * b[i];
}

void complement(double* out, const double* x, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) vst1q_f64(out + i, vsubq_f64(one, vld1q_f64(x + i)));
  for (std::size_t i = body; i < n; ++i) out[i] = 1.0 - x[i];
}

}  // namespace

const KernelTable kNeonTable = {
    "neon", sum, dot, dot_complement, add_select, add, mix, mul, complement,
};

}  // namespace fuselab::simd::detail
