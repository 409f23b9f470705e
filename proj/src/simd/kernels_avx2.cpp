// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "nasrl/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>

namespace nasrl::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// One row of A against four rows of B per pass.
void gemm_nt_avx2(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d va = _mm256_loadu_pd(ar + p);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += ar[p] * b0[p];
        r1 += ar[p] * b1[p];
        r2 += ar[p] * b2[p];
        r3 += ar[p] * b3[p];
      }
      double* cr = c + i * n + j;
      cr[0] = r0;
      cr[1] = r1;
      cr[2] = r2;
      cr[3] = r3;
    }
    for (; j < n; ++j) c[i * n + j] = dot_avx2(ar, b + j * k, k);
  }
}

// c_row[0..n) += sum_p coef(p) * b[p, 0..n), register-blocked over 16 columns.
// Rows of b are `ldb` apart.
template <class Coef>
inline void accumulate_row(Coef coef, const double* b, double* cr, std::size_t n,
                           std::size_t k, std::size_t ldb) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_loadu_pd(cr + j);
    __m256d c1 = _mm256_loadu_pd(cr + j + 4);
    __m256d c2 = _mm256_loadu_pd(cr + j + 8);
    __m256d c3 = _mm256_loadu_pd(cr + j + 12);
    for (std::size_t p = 0; p < k; ++p) {
      const double s = coef(p);
      if (s == 0.0) continue;
      const __m256d vs = _mm256_set1_pd(s);
      const double* br = b + p * ldb + j;
      c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(br), c0);
      c1 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(br + 4), c1);
      c2 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(br + 8), c2);
      c3 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(br + 12), c3);
    }
    _mm256_storeu_pd(cr + j, c0);
    _mm256_storeu_pd(cr + j + 4, c1);
    _mm256_storeu_pd(cr + j + 8, c2);
    _mm256_storeu_pd(cr + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(cr + j);
    for (std::size_t p = 0; p < k; ++p) {
      const double s = coef(p);
      if (s == 0.0) continue;
      c0 = _mm256_fmadd_pd(_mm256_set1_pd(s), _mm256_loadu_pd(b + p * ldb + j), c0);
    }
    _mm256_storeu_pd(cr + j, c0);
  }
  for (; j < n; ++j) {
    double acc = cr[j];
    for (std::size_t p = 0; p < k; ++p) {
      const double s = coef(p);
      if (s != 0.0) acc += s * b[p * ldb + j];
    }
    cr[j] = acc;
  }
}

// Four rows of C against eight columns per pass, so each strip of B is read
// once per four output rows.
template <class Coef>
inline void accumulate_block(Coef coef, const double* b, double* c, std::size_t i0,
                             std::size_t n, std::size_t k, std::size_t j) {
  double* c0 = c + i0 * n + j;
  double* c1 = c0 + n;
  double* c2 = c1 + n;
  double* c3 = c2 + n;
  __m256d a0 = _mm256_loadu_pd(c0), b0 = _mm256_loadu_pd(c0 + 4);
  __m256d a1 = _mm256_loadu_pd(c1), b1 = _mm256_loadu_pd(c1 + 4);
  __m256d a2 = _mm256_loadu_pd(c2), b2 = _mm256_loadu_pd(c2 + 4);
  __m256d a3 = _mm256_loadu_pd(c3), b3 = _mm256_loadu_pd(c3 + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double s0 = coef(i0, p), s1 = coef(i0 + 1, p), s2 = coef(i0 + 2, p),
                 s3 = coef(i0 + 3, p);
    if (s0 == 0.0 && s1 == 0.0 && s2 == 0.0 && s3 == 0.0) continue;
    const double* br = b + p * n + j;
    const __m256d lo = _mm256_loadu_pd(br), hi = _mm256_loadu_pd(br + 4);
    __m256d v = _mm256_set1_pd(s0);
    a0 = _mm256_fmadd_pd(v, lo, a0);
    b0 = _mm256_fmadd_pd(v, hi, b0);
    v = _mm256_set1_pd(s1);
    a1 = _mm256_fmadd_pd(v, lo, a1);
    b1 = _mm256_fmadd_pd(v, hi, b1);
    v = _mm256_set1_pd(s2);
    a2 = _mm256_fmadd_pd(v, lo, a2);
    b2 = _mm256_fmadd_pd(v, hi, b2);
    v = _mm256_set1_pd(s3);
    a3 = _mm256_fmadd_pd(v, lo, a3);
    b3 = _mm256_fmadd_pd(v, hi, b3);
  }
  _mm256_storeu_pd(c0, a0);
  _mm256_storeu_pd(c0 + 4, b0);
  _mm256_storeu_pd(c1, a1);
  _mm256_storeu_pd(c1 + 4, b1);
  _mm256_storeu_pd(c2, a2);
  _mm256_storeu_pd(c2 + 4, b2);
  _mm256_storeu_pd(c3, a3);
  _mm256_storeu_pd(c3 + 4, b3);
}

// Walks k in chunks whose strip of B stays cache resident across row blocks.
template <class Coef>
inline void accumulate_all(Coef coef, const double* b, double* c, std::size_t m,
                           std::size_t n, std::size_t k) {
  const std::size_t n8 = n - n % 8;
  const std::size_t kc = std::max<std::size_t>(32, 16384 / std::max<std::size_t>(n, 1));
  for (std::size_t p0 = 0; p0 < k; p0 += kc) {
    const std::size_t kk = std::min(kc, k - p0);
    const double* bp = b + p0 * n;
    auto chunk = [&](std::size_t i, std::size_t p) { return coef(i, p0 + p); };
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      for (std::size_t j = 0; j < n8; j += 8) accumulate_block(chunk, bp, c, i, n, kk, j);
      if (n8 < n)
        for (std::size_t r = i; r < i + 4; ++r)
          accumulate_row([&](std::size_t p) { return chunk(r, p); }, bp + n8, c + r * n + n8,
                         n - n8, kk, n);
    }
    for (; i < m; ++i)
      accumulate_row([&](std::size_t p) { return chunk(i, p); }, bp, c + i * n, n, kk, n);
  }
}

void gemm_nn_acc_avx2(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k) {
  accumulate_all([a, k](std::size_t i, std::size_t p) { return a[i * k + p]; }, b, c, m, n, k);
}

void gemm_tn_acc_avx2(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k) {
  accumulate_all([a, m](std::size_t i, std::size_t p) { return a[p * m + i]; }, b, c, m, n, k);
}

}  // namespace

namespace detail {
extern const KernelTable avx2_table;
// Constant-initialized so that no AVX code runs before the CPU check.
constinit const KernelTable avx2_table{"avx2",       dot_avx2,         axpy_avx2,
                                       gemm_nt_avx2, gemm_nn_acc_avx2, gemm_tn_acc_avx2};
}  // namespace detail

}  // namespace nasrl::simd

#else

// Nothing to provide off x86-64; dispatch never asks for it.

#endif
