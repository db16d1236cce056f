#include "goal/kernels.hpp"

namespace goal::kernels {

template <typename T>
void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template void gemm_scalar<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                                 std::size_t, const float*, std::size_t, float*, std::size_t);
template void gemm_scalar<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                                  std::size_t, const double*, std::size_t, double*, std::size_t);

}  // namespace goal::kernels
