#include "nasrl/simd/kernels.hpp"

namespace nasrl::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c[i * n + j] = dot_scalar(a + i * k, b + j * k, k);
}

void gemm_nn_acc_scalar(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double s = a[i * k + p];
      if (s != 0.0) axpy_scalar(s, b + p * n, c + i * n, n);
    }
}

void gemm_tn_acc_scalar(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      const double s = a[p * m + i];
      if (s != 0.0) axpy_scalar(s, b + p * n, c + i * n, n);
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",         dot_scalar,
                                 axpy_scalar,      gemm_nt_scalar,
                                 gemm_nn_acc_scalar, gemm_tn_acc_scalar};
  return table;
}

}  // namespace nasrl::simd
