#pragma once
// Dense GEMM kernels with a scalar reference path and AVX2/FMA variants
// selected at runtime.

#include <cstddef>
#include <string_view>

namespace goal::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Highest ISA the host supports and this build was compiled with.
Isa detect_isa();

// ISA currently used by gemm(). Defaults to detect_isa() unless the
// GOAL_SIMD environment variable is set to "scalar".
Isa active_isa();
void set_active_isa(Isa isa);

// C[m x n] += op(A)[m x k] * op(B)[k x n], row-major with leading dimensions.
// op(A) = A^T when trans_a (A stored k x m), likewise for B.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc);

template <typename T>
void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc);

#if defined(GOAL_HAVE_AVX2)
template <typename T>
void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc);
#endif

}  // namespace goal::kernels
