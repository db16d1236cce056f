#include <atomic>
#include <cstdlib>
#include <string_view>

#include "goal/kernels.hpp"

namespace goal::kernels {
namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("GOAL_SIMD"); env != nullptr && std::string_view(env) == "scalar")
    return Isa::Scalar;
  return detect_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detect_isa() {
#if defined(GOAL_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::Avx2 && detect_isa() != Isa::Avx2) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
#if defined(GOAL_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    gemm_avx2<T>(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#endif
  gemm_scalar<T>(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc);
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          std::size_t, const float*, std::size_t, float*, std::size_t);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double*, std::size_t);

}  // namespace goal::kernels
