// Compiled with -mavx2 -mfma. Only reached through the runtime dispatcher
// after the CPU has been checked for both features.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "goal/kernels.hpp"

namespace goal::kernels {
namespace {

// Every C element is produced by the same sequence acc = fma(a_ip, b_pj, acc)
// over p regardless of which block handles it, so results do not depend on
// the row position inside a batch.

template <int Rows>
inline void block_f32_16(std::size_t i, std::size_t j, std::size_t k, const float* a,
                         std::size_t ars, std::size_t acs, const float* b, std::size_t ldb,
                         float* c, std::size_t ldc) {
  __m256 lo[Rows];
  __m256 hi[Rows];
  for (int r = 0; r < Rows; ++r) {
    lo[r] = _mm256_loadu_ps(c + (i + r) * ldc + j);
    hi[r] = _mm256_loadu_ps(c + (i + r) * ldc + j + 8);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb + j;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int r = 0; r < Rows; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + (i + r) * ars + p * acs);
      lo[r] = _mm256_fmadd_ps(av, b0, lo[r]);
      hi[r] = _mm256_fmadd_ps(av, b1, hi[r]);
    }
  }
  for (int r = 0; r < Rows; ++r) {
    _mm256_storeu_ps(c + (i + r) * ldc + j, lo[r]);
    _mm256_storeu_ps(c + (i + r) * ldc + j + 8, hi[r]);
  }
}

template <int Rows>
inline void block_f32_8(std::size_t i, std::size_t j, std::size_t k, const float* a,
                        std::size_t ars, std::size_t acs, const float* b, std::size_t ldb,
                        float* c, std::size_t ldc) {
  __m256 acc[Rows];
  for (int r = 0; r < Rows; ++r) acc[r] = _mm256_loadu_ps(c + (i + r) * ldc + j);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb + j);
    for (int r = 0; r < Rows; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + (i + r) * ars + p * acs);
      acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < Rows; ++r) _mm256_storeu_ps(c + (i + r) * ldc + j, acc[r]);
}

template <int Rows>
inline void block_f64_8(std::size_t i, std::size_t j, std::size_t k, const double* a,
                        std::size_t ars, std::size_t acs, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc) {
  __m256d lo[Rows];
  __m256d hi[Rows];
  for (int r = 0; r < Rows; ++r) {
    lo[r] = _mm256_loadu_pd(c + (i + r) * ldc + j);
    hi[r] = _mm256_loadu_pd(c + (i + r) * ldc + j + 4);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb + j;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    for (int r = 0; r < Rows; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + (i + r) * ars + p * acs);
      lo[r] = _mm256_fmadd_pd(av, b0, lo[r]);
      hi[r] = _mm256_fmadd_pd(av, b1, hi[r]);
    }
  }
  for (int r = 0; r < Rows; ++r) {
    _mm256_storeu_pd(c + (i + r) * ldc + j, lo[r]);
    _mm256_storeu_pd(c + (i + r) * ldc + j + 4, hi[r]);
  }
}

template <int Rows>
inline void block_f64_4(std::size_t i, std::size_t j, std::size_t k, const double* a,
                        std::size_t ars, std::size_t acs, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc) {
  __m256d acc[Rows];
  for (int r = 0; r < Rows; ++r) acc[r] = _mm256_loadu_pd(c + (i + r) * ldc + j);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb + j);
    for (int r = 0; r < Rows; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + (i + r) * ars + p * acs);
      acc[r] = _mm256_fmadd_pd(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < Rows; ++r) _mm256_storeu_pd(c + (i + r) * ldc + j, acc[r]);
}

template <typename T>
inline void tail_columns(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t n,
                         std::size_t k, const T* a, std::size_t ars, std::size_t acs, const T* b,
                         std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = i0; i < i1; ++i) {
    for (std::size_t j = j0; j < n; ++j) {
      T acc = c[i * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * ars + p * acs], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

template <int Rows>
void rows_f32(std::size_t i, std::size_t n, std::size_t k, const float* a, std::size_t ars,
              std::size_t acs, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) block_f32_16<Rows>(i, j, k, a, ars, acs, b, ldb, c, ldc);
  for (; j + 8 <= n; j += 8) block_f32_8<Rows>(i, j, k, a, ars, acs, b, ldb, c, ldc);
  tail_columns<float>(i, i + Rows, j, n, k, a, ars, acs, b, ldb, c, ldc);
}

template <int Rows>
void rows_f64(std::size_t i, std::size_t n, std::size_t k, const double* a, std::size_t ars,
              std::size_t acs, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) block_f64_8<Rows>(i, j, k, a, ars, acs, b, ldb, c, ldc);
  for (; j + 4 <= n; j += 4) block_f64_4<Rows>(i, j, k, a, ars, acs, b, ldb, c, ldc);
  tail_columns<double>(i, i + Rows, j, n, k, a, ars, acs, b, ldb, c, ldc);
}

void core(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t ars,
          std::size_t acs, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) rows_f32<4>(i, n, k, a, ars, acs, b, ldb, c, ldc);
  for (; i < m; ++i) rows_f32<1>(i, n, k, a, ars, acs, b, ldb, c, ldc);
}

void core(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t ars,
          std::size_t acs, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) rows_f64<4>(i, n, k, a, ars, acs, b, ldb, c, ldc);
  for (; i < m; ++i) rows_f64<1>(i, n, k, a, ars, acs, b, ldb, c, ldc);
}

}  // namespace

template <typename T>
void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  const std::size_t ars = trans_a ? 1 : lda;
  const std::size_t acs = trans_a ? lda : 1;
  if (!trans_b) {
    core(m, n, k, a, ars, acs, b, ldb, c, ldc);
    return;
  }
  // B is stored n x k; the micro-kernels want contiguous rows of op(B).
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * ldb + p];
  core(m, n, k, a, ars, acs, bt.data(), n, c, ldc);
}

template void gemm_avx2<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                               std::size_t, const float*, std::size_t, float*, std::size_t);
template void gemm_avx2<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                                std::size_t, const double*, std::size_t, double*, std::size_t);

}  // namespace goal::kernels
