#include <cstdlib>
#include <stdexcept>
#include <string>

#include "nasrl/simd/kernels.hpp"

namespace nasrl::simd {

namespace detail {
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

const KernelTable* avx2_kernels() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &detail::avx2_table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(__aarch64__)
  return &detail::neon_table;  // Advanced SIMD is mandatory on AArch64.
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select_kernels() {
  const char* forced = std::getenv("NASRL_SIMD");
  const std::string choice = forced ? forced : "auto";
  if (choice == "scalar") return scalar_kernels();
  if (choice == "avx2" || choice == "neon") {
    const KernelTable* t = choice == "avx2" ? avx2_kernels() : neon_kernels();
    if (!t) throw std::runtime_error("NASRL_SIMD=" + choice + " is not supported on this CPU");
    return *t;
  }
  if (choice != "auto") throw std::runtime_error("unknown NASRL_SIMD value: " + choice);
  if (const KernelTable* t = avx2_kernels()) return *t;
  if (const KernelTable* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace nasrl::simd
