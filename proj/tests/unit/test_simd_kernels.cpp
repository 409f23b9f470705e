#include <cmath>
#include <vector>

#include "doctest.h"
#include "nasrl/rng.hpp"
#include "nasrl/simd/kernels.hpp"

using nasrl::simd::KernelTable;

namespace {

std::vector<double> random_vec(nasrl::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  // Sprinkle exact zeros; the accumulating kernels skip them.
  for (std::size_t i = 0; i < n; i += 7) v[i] = 0.0;
  return v;
}

std::vector<const KernelTable*> variants() {
  std::vector<const KernelTable*> out{&nasrl::simd::scalar_kernels()};
  if (auto* t = nasrl::simd::avx2_kernels()) out.push_back(t);
  if (auto* t = nasrl::simd::neon_kernels()) out.push_back(t);
  return out;
}

// Naive triple loops, independent of every kernel variant.
void ref_gemm_nt(const std::vector<double>& a, const std::vector<double>& b,
                 std::vector<double>& c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += (long double)a[i * k + p] * b[j * k + p];
      c[i * n + j] = (double)s;
    }
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double scale) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12 * scale);
}

}  // namespace

TEST_CASE("active kernel table is one of the compiled variants") {
  const auto& active = nasrl::simd::active_kernels();
  bool found = false;
  for (auto* t : variants()) found = found || t == &active;
  CHECK(found);
  MESSAGE("active SIMD variant: " << active.name);
}

TEST_CASE("dot and axpy agree across variants for lengths with tails") {
  nasrl::Rng rng(11);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 15u, 16u, 17u, 33u, 257u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    long double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += (long double)a[i] * b[i];
    for (auto* t : variants()) {
      CAPTURE(t->name);
      CAPTURE(n);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - (double)ref) <= 1e-12 * (n + 1));
      std::vector<double> y = b;
      t->axpy(0.75, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.75 * a[i]).epsilon(1e-15));
    }
  }
}

TEST_CASE("gemm variants match the naive reference on ragged shapes") {
  nasrl::Rng rng(5);
  const std::size_t dims[][3] = {{1, 1, 1}, {3, 5, 7}, {9, 4, 256}, {17, 33, 19}, {8, 16, 64}, {5, 21, 3}, {6, 400, 300}, {12, 9, 4000}};
  for (const auto& d : dims) {
    const std::size_t m = d[0], n = d[1], k = d[2];
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, n * k);
    std::vector<double> want(m * n);
    ref_gemm_nt(a, b, want, m, n, k);

    // C += A[M,K] * B[K,N]: build B as the transpose of the NT operand.
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    // C += A^T * B with A stored [K,M].
    std::vector<double> at(k * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    auto base = random_vec(rng, m * n);
    std::vector<double> want_acc(m * n);
    for (std::size_t i = 0; i < m * n; ++i) want_acc[i] = base[i] + want[i];

    for (auto* t : variants()) {
      CAPTURE(t->name);
      std::vector<double> c(m * n, 123.0);
      t->gemm_nt(a.data(), b.data(), c.data(), m, n, k);
      check_close(c, want, k);

      std::vector<double> c2 = base;
      t->gemm_nn_acc(a.data(), bt.data(), c2.data(), m, n, k);
      check_close(c2, want_acc, k);

      std::vector<double> c3 = base;
      t->gemm_tn_acc(at.data(), bt.data(), c3.data(), m, n, k);
      check_close(c3, want_acc, k);
    }
  }
}

TEST_CASE("each variant is bitwise deterministic") {
  nasrl::Rng rng(3);
  auto a = random_vec(rng, 12 * 50);
  auto b = random_vec(rng, 7 * 50);
  for (auto* t : variants()) {
    std::vector<double> c1(12 * 7), c2(12 * 7);
    t->gemm_nt(a.data(), b.data(), c1.data(), 12, 7, 50);
    t->gemm_nt(a.data(), b.data(), c2.data(), 12, 7, 50);
    CHECK(c1 == c2);
  }
}
