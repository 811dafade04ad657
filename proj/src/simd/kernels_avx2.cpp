// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and must only
// be entered after a runtime CPU check (see dispatch.cpp).

#include <immintrin.h>

#include <cmath>
#include <iterator>

#include "bysgnn/simd.hpp"

namespace bysgnn::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Shared 4×8 register tile for the nn and tn layouts. `a_at(r, p)` returns
// the scalar A-operand for output row r and reduction index p.
template <typename AAt>
inline void tile_4x8(std::size_t n, std::size_t k, std::size_t i, std::size_t j, AAt a_at, const double* b,
                     double* c) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
    __m256d a = _mm256_set1_pd(a_at(i + 0, p));
    c00 = _mm256_fmadd_pd(a, b0, c00);
    c01 = _mm256_fmadd_pd(a, b1, c01);
    a = _mm256_set1_pd(a_at(i + 1, p));
    c10 = _mm256_fmadd_pd(a, b0, c10);
    c11 = _mm256_fmadd_pd(a, b1, c11);
    a = _mm256_set1_pd(a_at(i + 2, p));
    c20 = _mm256_fmadd_pd(a, b0, c20);
    c21 = _mm256_fmadd_pd(a, b1, c21);
    a = _mm256_set1_pd(a_at(i + 3, p));
    c30 = _mm256_fmadd_pd(a, b0, c30);
    c31 = _mm256_fmadd_pd(a, b1, c31);
  }
  auto store = [&](std::size_t r, __m256d lo, __m256d hi) {
    double* row = c + (i + r) * n + j;
    _mm256_storeu_pd(row, _mm256_add_pd(_mm256_loadu_pd(row), lo));
    _mm256_storeu_pd(row + 4, _mm256_add_pd(_mm256_loadu_pd(row + 4), hi));
  };
  store(0, c00, c01);
  store(1, c10, c11);
  store(2, c20, c21);
  store(3, c30, c31);
}

// Single output row, vectorized over columns; used for the row/column tails.
template <typename AAt>
inline void row_generic(std::size_t n, std::size_t k, std::size_t i, std::size_t j0, AAt a_at, const double* b,
                        double* c) {
  double* ci = c + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a_at(i, p);
    const __m256d a = _mm256_set1_pd(aip);
    const double* bp = b + p * n;
    std::size_t j = j0;
    for (; j + 4 <= n; j += 4) {
      _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(bp + j), _mm256_loadu_pd(ci + j)));
    }
    for (; j < n; ++j) ci[j] += aip * bp[j];
  }
}

template <typename AAt>
inline void gemm_tiled(std::size_t m, std::size_t n, std::size_t k, AAt a_at, const double* b, double* c) {
  const std::size_t m4 = m - m % 4;
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) tile_4x8(n, k, i, j, a_at, b, c);
    if (n8 < n) {
      for (std::size_t r = 0; r < 4; ++r) row_generic(n, k, i + r, n8, a_at, b, c);
    }
  }
  for (std::size_t i = m4; i < m; ++i) row_generic(n, k, i, 0, a_at, b, c);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_tiled(m, n, k, [a, k](std::size_t r, std::size_t p) { return a[r * k + p]; }, b, c);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_tiled(m, n, k, [a, m](std::size_t r, std::size_t p) { return a[p * m + r]; }, b, c);
}

double dot(std::size_t n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const std::size_t k4 = k - k % 4;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + (j + 0) * k;
      const double* b1 = b + (j + 1) * k;
      const double* b2 = b + (j + 2) * k;
      const double* b3 = b + (j + 3) * k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k4; p += 4) {
        const __m256d av = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (std::size_t p = k4; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      double* ci = c + i * n + j;
      ci[0] += r0;
      ci[1] += r1;
      ci[2] += r2;
      ci[3] += r3;
    }
    for (; j < n; ++j) c[i * n + j] += dot(k, ai, b + j * k);
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) out[i] += a[i] * b[i];
}

void add(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

double sum(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

// exp: x = k ln2 + r, |r| <= ln2/2, degree-13 Taylor in r, then scale by
// 2^k through the exponent bits. Results that would be subnormal flush to 0;
// overflow gives +inf.
inline __m256d exp_pd(__m256d x_in) {
  const __m256d x = _mm256_min_pd(_mm256_max_pd(x_in, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(1.90821492927058770002e-10), r);
  static constexpr double kInvFact[] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
                                        1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
                                        1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
                                        1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (std::size_t i = 1; i < std::size(kInvFact); ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  const __m256i ki = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, magic)), _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
  __m256d y = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), _mm256_cmp_pd(x_in, _mm256_set1_pd(-708.3964185322641), _CMP_LT_OQ));
  return _mm256_blendv_pd(y, _mm256_set1_pd(HUGE_VAL), _mm256_cmp_pd(x_in, _mm256_set1_pd(709.782712893384), _CMP_GT_OQ));
}

// expm1 with full relative accuracy near 0: Taylor series for |x| < 0.35,
// exp(x) - 1 elsewhere.
inline __m256d expm1_pd(__m256d x) {
  static constexpr double kInvFact[] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
                                        1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
                                        1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
                                        1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (std::size_t i = 1; i < std::size(kInvFact); ++i) p = _mm256_fmadd_pd(p, x, _mm256_set1_pd(kInvFact[i]));
  const __m256d small = _mm256_mul_pd(p, x);
  const __m256d large = _mm256_sub_pd(exp_pd(x), _mm256_set1_pd(1.0));
  const __m256d absx = _mm256_andnot_pd(_mm256_set1_pd(-0.0), x);
  return _mm256_blendv_pd(large, small, _mm256_cmp_pd(absx, _mm256_set1_pd(0.35), _CMP_LT_OQ));
}

// Keeps NaN inputs NaN (the clamp in exp_pd would otherwise swallow them).
inline __m256d keep_nan(__m256d result, __m256d x) {
  return _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

void sigmoid(std::size_t n, const double* x, double* out) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), xv));
    _mm256_storeu_pd(out + i, keep_nan(_mm256_div_pd(one, _mm256_add_pd(one, e)), xv));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    if (xi >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-xi));
    } else {
      const double e = std::exp(xi);
      out[i] = e / (1.0 + e);
    }
  }
}

// tanh(x) = expm1(2x) / (expm1(2x) + 2)
void tanh_k(std::size_t n, const double* x, double* out) {
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    // tanh(±20) already rounds to ±1.
    const __m256d xc = _mm256_min_pd(_mm256_max_pd(xv, _mm256_set1_pd(-20.0)), _mm256_set1_pd(20.0));
    const __m256d e = expm1_pd(_mm256_mul_pd(two, xc));
    _mm256_storeu_pd(out + i, keep_nan(_mm256_div_pd(e, _mm256_add_pd(e, two)), xv));
  }
  for (; i < n; ++i) out[i] = std::tanh(x[i]);
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{Backend::avx2, "avx2", gemm_nn, gemm_nt, gemm_tn, dot,   axpy,
                             mul,           mul_acc, add,    sum,     sigmoid, tanh_k};

}  // namespace bysgnn::simd
