// Compiled with -mavx2 -mfma; only reached after a cpuid check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "retouch/simd/kernels.hpp"

namespace retouch::simd::avx2 {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = __m256;
  static constexpr std::size_t kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg set1(float x) { return _mm256_set1_ps(x); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg r) { _mm256_storeu_ps(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
  static Reg div(Reg a, Reg b) { return _mm256_div_ps(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_ps(a, b); }
  static Reg sqrt(Reg a) { return _mm256_sqrt_ps(a); }
};

template <>
struct Vec<double> {
  using Reg = __m256d;
  static constexpr std::size_t kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg set1(double x) { return _mm256_set1_pd(x); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg r) { _mm256_storeu_pd(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_pd(a, b); }
  static Reg div(Reg a, Reg b) { return _mm256_div_pd(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_pd(a, b); }
  static Reg sqrt(Reg a) { return _mm256_sqrt_pd(a); }
};

constexpr int kRowsPerTile = 6;

// Computes a rows x (2 * width) tile of C from `rows` rows of A, element
// (r,p) at a[r*rs + p*cs], and a packed [k][2 * width] panel of B. The tile is
// written to `out` (row stride nr).
template <class T, int Rows>
void micro_kernel(std::size_t k, const T* a, std::size_t rs, std::size_t cs, const T* panel,
                  T* out) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  typename V::Reg acc0[Rows];
  typename V::Reg acc1[Rows];
  for (int r = 0; r < Rows; ++r) {
    acc0[r] = V::zero();
    acc1[r] = V::zero();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = V::load(panel + p * 2 * w);
    const auto b1 = V::load(panel + p * 2 * w + w);
    for (int r = 0; r < Rows; ++r) {
      const auto av = V::set1(a[r * rs + p * cs]);
      acc0[r] = V::fmadd(av, b0, acc0[r]);
      acc1[r] = V::fmadd(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < Rows; ++r) {
    V::store(out + r * 2 * w, acc0[r]);
    V::store(out + r * 2 * w + w, acc1[r]);
  }
}

template <class T>
void run_tile(int rows, std::size_t k, const T* a, std::size_t rs, std::size_t cs, const T* panel,
              T* out) {
  switch (rows) {
    case 6: micro_kernel<T, 6>(k, a, rs, cs, panel, out); break;
    case 5: micro_kernel<T, 5>(k, a, rs, cs, panel, out); break;
    case 4: micro_kernel<T, 4>(k, a, rs, cs, panel, out); break;
    case 3: micro_kernel<T, 3>(k, a, rs, cs, panel, out); break;
    case 2: micro_kernel<T, 2>(k, a, rs, cs, panel, out); break;
    default: micro_kernel<T, 1>(k, a, rs, cs, panel, out); break;
  }
}

}  // namespace

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  constexpr std::size_t nr = 2 * Vec<T>::kWidth;
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
    }
    return;
  }
  const std::size_t a_rs = ta == Trans::No ? lda : 1, a_cs = ta == Trans::No ? 1 : lda;
  std::vector<T> panel(k * nr);
  T tile[kRowsPerTile * nr];
  for (std::size_t j0 = 0; j0 < n; j0 += nr) {
    const std::size_t cols = std::min(nr, n - j0);
    if (tb == Trans::No) {
      for (std::size_t p = 0; p < k; ++p) {
        const T* src = b + p * ldb + j0;
        T* dst = panel.data() + p * nr;
        std::size_t j = 0;
        for (; j < cols; ++j) dst[j] = src[j];
        for (; j < nr; ++j) dst[j] = T(0);
      }
    } else {
      if (cols < nr) std::fill(panel.begin(), panel.end(), T(0));
      for (std::size_t j = 0; j < cols; ++j) {
        const T* src = b + (j0 + j) * ldb;
        for (std::size_t p = 0; p < k; ++p) panel[p * nr + j] = src[p];
      }
    }
    for (std::size_t i0 = 0; i0 < m; i0 += kRowsPerTile) {
      const int rows = static_cast<int>(std::min<std::size_t>(kRowsPerTile, m - i0));
      run_tile<T>(rows, k, a + i0 * a_rs, a_rs, a_cs, panel.data(), tile);
      for (int r = 0; r < rows; ++r) {
        T* crow = c + (i0 + r) * ldc + j0;
        const T* trow = tile + r * nr;
        if (accumulate) {
          for (std::size_t j = 0; j < cols; ++j) crow[j] += trow[j];
        } else {
          for (std::size_t j = 0; j < cols; ++j) crow[j] = trow[j];
        }
      }
    }
  }
}

template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c) {
  using V = Vec<T>;
  constexpr std::size_t width = V::kWidth;
  const T b1 = T(c.beta1), b2 = T(c.beta2);
  const T one_b1 = T(1 - c.beta1), one_b2 = T(1 - c.beta2);
  const T inv_bias1 = T(1 / c.bias1), inv_bias2 = T(1 / c.bias2);
  const T lr = T(c.lr), eps = T(c.eps);
  const auto vb1 = V::set1(b1), vb2 = V::set1(b2);
  const auto vone_b1 = V::set1(one_b1), vone_b2 = V::set1(one_b2);
  const auto vib1 = V::set1(inv_bias1), vib2 = V::set1(inv_bias2);
  const auto vlr = V::set1(lr), veps = V::set1(eps);
  std::size_t i = 0;
  for (; i + width <= w.size(); i += width) {
    const auto gi = V::load(g.data() + i);
    const auto mi = V::add(V::mul(vb1, V::load(m.data() + i)), V::mul(vone_b1, gi));
    const auto vi = V::add(V::mul(vb2, V::load(v.data() + i)), V::mul(V::mul(vone_b2, gi), gi));
    V::store(m.data() + i, mi);
    V::store(v.data() + i, vi);
    const auto mhat = V::mul(mi, vib1);
    const auto vhat = V::mul(vi, vib2);
    const auto step = V::div(V::mul(vlr, mhat), V::add(V::sqrt(vhat), veps));
    V::store(w.data() + i, V::sub(V::load(w.data() + i), step));
  }
  for (; i < w.size(); ++i) {
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

}  // namespace retouch::simd::avx2
