#pragma once

// Dense arithmetic kernels behind the network layers.
//
// Every kernel exists as a portable scalar reference and as an AVX2/FMA
// variant. The variant is chosen once at runtime from cpuid; setting the
// environment variable RETOUCH_SIMD=scalar forces the reference path.
// Results of the two paths agree to rounding (FMA contraction differs), and
// each path is bitwise deterministic on its own.

#include <cstddef>
#include <span>

namespace retouch::simd {

enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa);

/// True when the running CPU supports the given instruction set.
bool isa_supported(Isa isa);

/// Currently dispatched instruction set.
Isa active_isa();

/// Overrides dispatch (tests, benchmarks). Unsupported requests fall back to scalar.
void set_active_isa(Isa isa);

/// Restores the previous dispatch target on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : saved_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(saved_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa saved_;
};

enum class Trans { No, Yes };

/// Row-major C[m,n] = op(A)[m,k] * op(B)[k,n] (or += when accumulate is set),
/// where op(X) is X or its transpose. lda/ldb are the row strides of the
/// stored arrays. Products are summed in increasing k order on every path.
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

/// Untransposed shorthand.
template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  gemm<T>(Trans::No, Trans::No, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

/// Row-major transpose: dst[cols,rows] = src[rows,cols]^T.
template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst);

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

/// One bias-corrected Adam update over a flat parameter array.
template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c);

namespace scalar {
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);
template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c);
}  // namespace scalar

namespace avx2 {
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);
template <class T>
void adam_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v,
                 const AdamCoeffs& c);
}  // namespace avx2

}  // namespace retouch::simd
