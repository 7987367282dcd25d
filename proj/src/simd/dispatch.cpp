#include <atomic>
#include <cstdlib>
#include <string_view>

#include "retouch/simd/kernels.hpp"

namespace retouch::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("RETOUCH_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  current().store(isa_supported(isa) ? isa : Isa::Scalar, std::memory_order_relaxed);
}

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  if (active_isa() == Isa::Avx2) {
    avx2::gemm<T>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    scalar::gemm<T>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  }
}

template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t block = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += block) {
    for (std::size_t j0 = 0; j0 < cols; j0 += block) {
      const std::size_t i1 = i0 + block < rows ? i0 + block : rows;
      const std::size_t j1 = j0 + block < cols ? j0 + block : cols;
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
      }
    }
  }
}

template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c) {
  if (active_isa() == Isa::Avx2) {
    avx2::adam_update<T>(w, g, m, v, c);
  } else {
    scalar::adam_update<T>(w, g, m, v, c);
  }
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, const float*,
                          std::size_t, const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double*, std::size_t, bool);
template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);
template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, const AdamCoeffs&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, const AdamCoeffs&);

}  // namespace retouch::simd
