#pragma once

#include <cstddef>
#include <string_view>

namespace nasrl::simd {

// Dense double-precision building blocks used by the convolution and linear
// layers. Every matrix is row-major and densely packed.
//
//   gemm_nt:      C[M,N]  = A[M,K] * B[N,K]^T   (overwrites C)
//   gemm_nn_acc:  C[M,N] += A[M,K] * B[K,N]
//   gemm_tn_acc:  C[M,N] += A[K,M]^T * B[K,N]
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t k);
  void (*gemm_nn_acc)(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k);
  void (*gemm_tn_acc)(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the
// required instruction set.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Kernel table used by the autodiff layer. Chosen once per process: the
// NASRL_SIMD environment variable may force "scalar", "avx2" or "neon";
// otherwise the widest supported variant wins.
const KernelTable& active_kernels();

}  // namespace nasrl::simd
