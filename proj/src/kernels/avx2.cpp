#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "abidnn/kernels.hpp"

namespace abidnn {

namespace {

// exp(x) for x in [-745, 0]: x = n ln2 + r with |r| <= ln2 / 2, Taylor series
// of degree 13 for exp(r), then scaling by 2^n through the exponent field.
inline __m256d exp_neg(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double inv_fact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          1.0 / 2.0,         1.0,              1.0};
  __m256d p = _mm256_set1_pd(inv_fact[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[i]));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(ni);
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(e));
}

inline __m256d tanh_pd(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d ax = _mm256_andnot_pd(sign_mask, x);
  const __m256d sign = _mm256_and_pd(sign_mask, x);

  // Small arguments: rational approximation x + x z P(z) / Q(z), z = x^2.
  const __m256d z = _mm256_mul_pd(x, x);
  __m256d pz = _mm256_set1_pd(-9.64399179425052238628e-1);
  pz = _mm256_fmadd_pd(pz, z, _mm256_set1_pd(-9.92877231001918586564e1));
  pz = _mm256_fmadd_pd(pz, z, _mm256_set1_pd(-1.61468768441708447952e3));
  __m256d qz = _mm256_add_pd(z, _mm256_set1_pd(1.12811678491632931402e2));
  qz = _mm256_fmadd_pd(qz, z, _mm256_set1_pd(2.23548839060100448583e3));
  qz = _mm256_fmadd_pd(qz, z, _mm256_set1_pd(4.84406305325125486048e3));
  const __m256d small = _mm256_fmadd_pd(_mm256_mul_pd(x, z), _mm256_div_pd(pz, qz), x);

  // Large arguments: (1 - e) / (1 + e), e = exp(-2|x|), |x| clamped at 20.
  const __m256d axc = _mm256_min_pd(ax, _mm256_set1_pd(20.0));
  const __m256d e = exp_neg(_mm256_mul_pd(_mm256_set1_pd(-2.0), axc));
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d large = _mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e));
  large = _mm256_or_pd(large, sign);

  const __m256d use_small = _mm256_cmp_pd(ax, _mm256_set1_pd(0.625), _CMP_LT_OQ);
  __m256d y = _mm256_blendv_pd(large, small, use_small);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  return _mm256_blendv_pd(y, x, nan);
}

void tanh_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, tanh_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    double in[4] = {0.0, 0.0, 0.0, 0.0};
    double out[4];
    for (std::size_t j = i; j < n; ++j) in[j - i] = x[j];
    _mm256_storeu_pd(out, tanh_pd(_mm256_loadu_pd(in)));
    for (std::size_t j = i; j < n; ++j) y[j] = out[j - i];
  }
}

// Every output entry is a fused multiply-add chain over p = 0..k-1 starting at
// zero, whichever blocking path computes it.
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  auto store = [&](double* dst, __m256d v) {
    if (accumulate) v = _mm256_add_pd(_mm256_loadu_pd(dst), v);
    _mm256_storeu_pd(dst, v);
  };
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * lda;
    const double* a1 = a0 + lda;
    const double* a2 = a1 + lda;
    const double* a3 = a2 + lda;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * ldb + j;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      double* cr = c + i * ldc + j;
      store(cr, c00);
      store(cr + 4, c01);
      store(cr + ldc, c10);
      store(cr + ldc + 4, c11);
      store(cr + 2 * ldc, c20);
      store(cr + 2 * ldc + 4, c21);
      store(cr + 3 * ldc, c30);
      store(cr + 3 * ldc + 4, c31);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
      __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
        c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a0 + p), bv, c0);
        c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a1 + p), bv, c1);
        c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a2 + p), bv, c2);
        c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a3 + p), bv, c3);
      }
      double* cr = c + i * ldc + j;
      store(cr, c0);
      store(cr + ldc, c1);
      store(cr + 2 * ldc, c2);
      store(cr + 3 * ldc, c3);
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        const double* ar = a + (i + r) * lda;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s = std::fma(ar[p], b[p * ldb + j], s);
        double& dst = c[(i + r) * ldc + j];
        dst = accumulate ? dst + s : s;
      }
    }
  }
  for (; i < m; ++i) {
    const double* ar = a + i * lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) acc = _mm256_fmadd_pd(_mm256_broadcast_sd(ar + p), _mm256_loadu_pd(b + p * ldb + j), acc);
      store(c + i * ldc + j, acc);
    }
    for (; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s = std::fma(ar[p], b[p * ldb + j], s);
      double& dst = c[i * ldc + j];
      dst = accumulate ? dst + s : s;
    }
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Dot product with four lanes over p = 4q + lane, reduced in a fixed order.
inline double dot(const double* x, const double* y, std::size_t k) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + p), _mm256_loadu_pd(y + p), acc);
  double s = hsum(acc);
  for (; p < k; ++p) s = std::fma(x[p], y[p], s);
  return s;
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * lda;
    const double* a1 = a0 + lda;
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d x0 = _mm256_loadu_pd(a0 + p);
        const __m256d x1 = _mm256_loadu_pd(a1 + p);
        const __m256d y0 = _mm256_loadu_pd(b0 + p);
        const __m256d y1 = _mm256_loadu_pd(b1 + p);
        s00 = _mm256_fmadd_pd(x0, y0, s00);
        s01 = _mm256_fmadd_pd(x0, y1, s01);
        s10 = _mm256_fmadd_pd(x1, y0, s10);
        s11 = _mm256_fmadd_pd(x1, y1, s11);
      }
      double r00 = hsum(s00), r01 = hsum(s01), r10 = hsum(s10), r11 = hsum(s11);
      for (; p < k; ++p) {
        r00 = std::fma(a0[p], b0[p], r00);
        r01 = std::fma(a0[p], b1[p], r01);
        r10 = std::fma(a1[p], b0[p], r10);
        r11 = std::fma(a1[p], b1[p], r11);
      }
      double* cr = c + i * ldc + j;
      if (accumulate) {
        cr[0] += r00;
        cr[1] += r01;
        cr[ldc] += r10;
        cr[ldc + 1] += r11;
      } else {
        cr[0] = r00;
        cr[1] = r01;
        cr[ldc] = r10;
        cr[ldc + 1] = r11;
      }
    }
    for (; j < n; ++j) {
      const double r0 = dot(a0, b + j * ldb, k);
      const double r1 = dot(a1, b + j * ldb, k);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + r0 : r0;
      c[(i + 1) * ldc + j] = accumulate ? c[(i + 1) * ldc + j] + r1 : r1;
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double r = dot(a + i * lda, b + j * ldb, k);
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + r : r;
    }
  }
}

struct SlopesV {
  __m256d s1, s2, s3;
};

inline SlopesV slopes_tanh(__m256d y) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d y2 = _mm256_mul_pd(y, y);
  const __m256d s1 = _mm256_sub_pd(one, y2);
  const __m256d s2 = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), y), s1);
  // -2 s1^2 + 4 y^2 s1
  const __m256d s3 = _mm256_mul_pd(s1, _mm256_fmadd_pd(_mm256_set1_pd(4.0), y2, _mm256_mul_pd(_mm256_set1_pd(-2.0), s1)));
  return {s1, s2, s3};
}

inline SlopesV slopes_v(Activation act, __m256d z, __m256d y) {
  if (act == Activation::tanh) return slopes_tanh(y);
  if (act == Activation::relu) {
    const __m256d on = _mm256_and_pd(_mm256_cmp_pd(z, _mm256_setzero_pd(), _CMP_GT_OQ), _mm256_set1_pd(1.0));
    return {on, _mm256_setzero_pd(), _mm256_setzero_pd()};
  }
  return {_mm256_set1_pd(1.0), _mm256_setzero_pd(), _mm256_setzero_pd()};
}

// Scalar tail matching the vector formulas.
inline void slopes_s(Activation act, double z, double y, double& s1, double& s2, double& s3) {
  if (act == Activation::tanh) {
    const double y2 = y * y;
    s1 = 1.0 - y2;
    s2 = (-2.0 * y) * s1;
    s3 = s1 * std::fma(4.0, y2, -2.0 * s1);
  } else if (act == Activation::relu) {
    s1 = z > 0.0 ? 1.0 : 0.0;
    s2 = s3 = 0.0;
  } else {
    s1 = 1.0;
    s2 = s3 = 0.0;
  }
}

void jet_act_forward_avx2(Activation act, const double* z, double* y, std::size_t C, std::size_t K) {
  if (act == Activation::tanh) {
    tanh_avx2(z, y, C);
  } else {
    for (std::size_t p = 0; p < C; ++p) y[p] = act == Activation::relu ? (z[p] > 0.0 ? z[p] : 0.0) : z[p];
  }
  if (K == 0) return;
  std::size_t p = 0;
  for (; p + 4 <= C; p += 4) {
    const SlopesV s = slopes_v(act, _mm256_loadu_pd(z + p), _mm256_loadu_pd(y + p));
    for (std::size_t k = 0; k < K; ++k) {
      const __m256d zd = _mm256_loadu_pd(z + (1 + k) * C + p);
      const __m256d zdd = _mm256_loadu_pd(z + (1 + K + k) * C + p);
      _mm256_storeu_pd(y + (1 + k) * C + p, _mm256_mul_pd(s.s1, zd));
      _mm256_storeu_pd(y + (1 + K + k) * C + p, _mm256_fmadd_pd(_mm256_mul_pd(s.s2, zd), zd, _mm256_mul_pd(s.s1, zdd)));
    }
  }
  for (; p < C; ++p) {
    double s1, s2, s3;
    slopes_s(act, z[p], y[p], s1, s2, s3);
    for (std::size_t k = 0; k < K; ++k) {
      const double zd = z[(1 + k) * C + p];
      const double zdd = z[(1 + K + k) * C + p];
      y[(1 + k) * C + p] = s1 * zd;
      y[(1 + K + k) * C + p] = std::fma(s2 * zd, zd, s1 * zdd);
    }
  }
}

void jet_act_backward_avx2(Activation act, const double* z, const double* y, const double* ybar, double* zbar,
                           std::size_t C, std::size_t K) {
  std::size_t p = 0;
  const __m256d two = _mm256_set1_pd(2.0);
  for (; p + 4 <= C; p += 4) {
    const SlopesV s = slopes_v(act, _mm256_loadu_pd(z + p), _mm256_loadu_pd(y + p));
    __m256d v = _mm256_mul_pd(_mm256_loadu_pd(ybar + p), s.s1);
    for (std::size_t k = 0; k < K; ++k) {
      const __m256d zd = _mm256_loadu_pd(z + (1 + k) * C + p);
      const __m256d zdd = _mm256_loadu_pd(z + (1 + K + k) * C + p);
      const __m256d bd = _mm256_loadu_pd(ybar + (1 + k) * C + p);
      const __m256d bdd = _mm256_loadu_pd(ybar + (1 + K + k) * C + p);
      v = _mm256_fmadd_pd(_mm256_mul_pd(bd, s.s2), zd, v);
      const __m256d inner = _mm256_fmadd_pd(_mm256_mul_pd(s.s3, zd), zd, _mm256_mul_pd(s.s2, zdd));
      v = _mm256_fmadd_pd(bdd, inner, v);
      _mm256_storeu_pd(zbar + (1 + k) * C + p,
                       _mm256_fmadd_pd(_mm256_mul_pd(two, bdd), _mm256_mul_pd(s.s2, zd), _mm256_mul_pd(bd, s.s1)));
      _mm256_storeu_pd(zbar + (1 + K + k) * C + p, _mm256_mul_pd(bdd, s.s1));
    }
    _mm256_storeu_pd(zbar + p, v);
  }
  for (; p < C; ++p) {
    double s1, s2, s3;
    slopes_s(act, z[p], y[p], s1, s2, s3);
    double v = ybar[p] * s1;
    for (std::size_t k = 0; k < K; ++k) {
      const double zd = z[(1 + k) * C + p];
      const double zdd = z[(1 + K + k) * C + p];
      const double bd = ybar[(1 + k) * C + p];
      const double bdd = ybar[(1 + K + k) * C + p];
      v = std::fma(bd * s2, zd, v);
      v = std::fma(bdd, std::fma(s3 * zd, zd, s2 * zdd), v);
      zbar[(1 + k) * C + p] = std::fma(2.0 * bdd, s2 * zd, bd * s1);
      zbar[(1 + K + k) * C + p] = bdd * s1;
    }
    zbar[p] = v;
  }
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
  static const KernelTable table{"avx2", tanh_avx2, gemm_nn_avx2, gemm_nt_avx2, jet_act_forward_avx2,
                                 jet_act_backward_avx2};
  return &table;
}

}  // namespace abidnn
