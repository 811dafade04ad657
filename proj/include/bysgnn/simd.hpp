#pragma once

// Dense double-precision kernels used by the tensor core.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2+FMA variant is compiled into a separate translation unit and picked at
// runtime when the CPU supports it. The two backends are tested for
// equivalence in tests/test_simd.cpp.
//
// All gemm variants accumulate into C (C += ...), row-major, no padding.

#include <cstddef>
#include <string_view>

namespace bysgnn::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  const char* name;
  // C[m×n] += A[m×k] · B[k×n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C[m×n] += A[m×k] · B[n×k]ᵀ
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C[m×n] += A[k×m]ᵀ · B[k×n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  double (*dot)(std::size_t n, const double* a, const double* b);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out = a ⊙ b
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
  // out += a ⊙ b
  void (*mul_acc)(std::size_t n, const double* a, const double* b, double* out);
  // out = a + b
  void (*add)(std::size_t n, const double* a, const double* b, double* out);
  double (*sum)(std::size_t n, const double* x);
  // Elementwise logistic and hyperbolic tangent; out may alias x.
  void (*sigmoid)(std::size_t n, const double* x, double* out);
  void (*tanh)(std::size_t n, const double* x, double* out);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

// Active table. Chosen on first use: AVX2 when available unless the
// environment variable BYSGNN_SIMD=scalar is set.
const KernelTable& kernels();

// Force a backend (tests, benchmarking). Throws if avx2 is requested but
// unavailable.
void select_backend(Backend backend);
Backend active_backend();
std::string_view backend_name(Backend backend);

}  // namespace bysgnn::simd
