#include "retouch/simd/kernels.hpp"

#include <cmath>

namespace retouch::simd::scalar {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  const std::size_t a_rs = ta == Trans::No ? lda : 1, a_cs = ta == Trans::No ? 1 : lda;
  const std::size_t b_rs = tb == Trans::No ? ldb : 1, b_cs = tb == Trans::No ? 1 : ldb;
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * a_rs + p * a_cs] * b[p * b_rs + j * b_cs];
      crow[j] += acc;
    }
  }
}

template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c) {
  const T b1 = T(c.beta1), b2 = T(c.beta2);
  const T one_b1 = T(1 - c.beta1), one_b2 = T(1 - c.beta2);
  const T inv_bias1 = T(1 / c.bias1), inv_bias2 = T(1 / c.bias2);
  const T lr = T(c.lr), eps = T(c.eps);
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = b1 * m[i] + one_b1 * g[i];
    v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
    const T mhat = m[i] * inv_bias1;
    const T vhat = v[i] * inv_bias2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, const float*,
                          std::size_t, const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double*, std::size_t, bool);
template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, const AdamCoeffs&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, const AdamCoeffs&);

}  // namespace retouch::simd::scalar
