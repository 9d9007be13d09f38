// AVX2 variants of the scalar reference kernels. Compiled with -mavx2 and
// only reached after a runtime cpuid check (see kernels_dispatch.cpp).
#include "fovsim/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace fovsim::kernels::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double acc = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

MaxResult max_argmax(const double* x, std::size_t n) {
  std::size_t i = 0;
  MaxResult r{x[0], 0};
  if (n >= 8) {
    __m256d best = _mm256_loadu_pd(x);
    __m256d best_idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    __m256d idx = best_idx;
    const __m256d four = _mm256_set1_pd(4.0);
    for (i = 4; i + 4 <= n; i += 4) {
      idx = _mm256_add_pd(idx, four);
      const __m256d v = _mm256_loadu_pd(x + i);
      const __m256d gt = _mm256_cmp_pd(v, best, _CMP_GT_OQ);
      best = _mm256_blendv_pd(best, v, gt);
      best_idx = _mm256_blendv_pd(best_idx, idx, gt);
    }
    alignas(32) double vals[4], idxs[4];
    _mm256_store_pd(vals, best);
    _mm256_store_pd(idxs, best_idx);
    r = {vals[0], static_cast<std::size_t>(idxs[0])};
    for (int k = 1; k < 4; ++k) {
      const auto ki = static_cast<std::size_t>(idxs[k]);
      if (vals[k] > r.value || (vals[k] == r.value && ki < r.index)) r = {vals[k], ki};
    }
  }
  for (; i < n; ++i) {
    if (x[i] > r.value) r = {x[i], i};
  }
  return r;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) s += x[i];
  return s;
}

void max_shift_into(const double* x, double shift, double* y, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_add_pd(_mm256_loadu_pd(x + i), vs);
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i), v));
  }
  for (; i < n; ++i) {
    const double v = x[i] + shift;
    if (v > y[i]) y[i] = v;
  }
}

void cmul_conj_acc(const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* out, std::size_t n) {
  // Interleaved (re, im) pairs; two complex values per 256-bit vector.
  const auto* pa = reinterpret_cast<const double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  auto* po = reinterpret_cast<double*>(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    const __m256d ar = _mm256_movedup_pd(va);                    // [ar0 ar0 ar1 ar1]
    const __m256d ai = _mm256_permute_pd(va, 0xF);               // [ai0 ai0 ai1 ai1]
    const __m256d b_swap = _mm256_permute_pd(vb, 0x5);           // [bi0 br0 bi1 br1]
    // a·conj(b) = (ar·br + ai·bi) + i(ai·br − ar·bi).
    // fmsubadd gives [ar·br + ai·bi, ar·bi − ai·br]; negating the odd lanes
    // fixes the imaginary sign.
    const __m256d t = _mm256_mul_pd(ai, b_swap);                 // [ai·bi, ai·br]
    const __m256d conj_prod = _mm256_fmsubadd_pd(ar, vb, t);
    const __m256d sign = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);
    const __m256d fixed = _mm256_xor_pd(conj_prod, sign);
    _mm256_storeu_pd(po + 2 * i, _mm256_add_pd(_mm256_loadu_pd(po + 2 * i), fixed));
  }
  for (; i < n; ++i) {
    const double ar = a[i].real(), aimag = a[i].imag();
    const double br = b[i].real(), bimag = b[i].imag();
    out[i] += std::complex<double>(ar * br + aimag * bimag, aimag * br - ar * bimag);
  }
}

}  // namespace fovsim::kernels::avx2
#endif  // x86_64
