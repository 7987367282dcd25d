#include "retouch/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "retouch/common/error.hpp"
#include "retouch/simd/kernels.hpp"

namespace retouch::nn {
namespace {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Conv1dValid: return "conv1d_valid";
    case OpKind::Dense: return "dense";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::SoftmaxColumns: return "softmax_columns";
    case OpKind::LogSoftmaxColumns: return "log_softmax_columns";
    case OpKind::Reshape: return "reshape";
    case OpKind::Transpose12: return "transpose12";
    case OpKind::Rows: return "rows";
    case OpKind::Pick: return "pick";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MulConst: return "mul_const";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
  }
  return "?";
}

template <class T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

// Geometry shared by the 2D and 1D convolutions (1D is H = kh = 1, no padding).
struct ConvGeom {
  std::size_t n, c, h, w;
  std::size_t co, kh, kw;
  std::size_t stride;
  std::size_t pad_h, pad_w;
  std::size_t ho, wo;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t out_pixels() const { return ho * wo; }
  std::size_t columns() const { return n * ho * wo; }
};

// cols[(c*kh+ky)*kw+kx][n*ho*wo + oy*wo + ox] = x[n][c][oy*s+ky-pad][ox*s+kx-pad], zero outside.
template <class T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::size_t ncols = g.columns();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = cols + ((c * g.kh + ky) * g.kw + kx) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* plane = x + (n * g.c + c) * g.h * g.w;
          T* dst = row + n * g.out_pixels();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad_h);
            T* drow = dst + oy * g.wo;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill(drow, drow + g.wo, T(0));
              continue;
            }
            const T* srow = plane + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad_w);
              drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                             ? T(0)
                             : srow[static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeom& g, T* dx) {
  const std::size_t ncols = g.columns();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = cols + ((c * g.kh + ky) * g.kw + kx) * ncols;
        for (std::size_t n = 0; n < g.n; ++n) {
          T* plane = dx + (n * g.c + c) * g.h * g.w;
          const T* src = row + n * g.out_pixels();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad_h);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            T* drow = plane + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad_w);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
              drow[static_cast<std::size_t>(ix)] += src[oy * g.wo + ox];
            }
          }
        }
      }
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

template <class T>
bool Graph<T>::needs_grad(const Tensor<T>& t) const {
  if (mode_ == GradMode::NoGrad || !t.requires_grad()) return false;
  return !(mode_ == GradMode::FrozenParams && t.is_parameter());
}

template <class T>
bool Graph<T>::any_needs_grad(std::initializer_list<const Tensor<T>*> ts) const {
  return std::any_of(ts.begin(), ts.end(), [this](const Tensor<T>* t) { return needs_grad(*t); });
}

template <class T>
Tensor<T> Graph<T>::make_output(Shape shape, std::vector<T> values,
                                std::initializer_list<const Tensor<T>*> inputs, OpKind kind) {
  if (!all_finite<T>(values)) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(kind));
  }
  return Tensor<T>::from(std::move(shape), std::move(values), any_needs_grad(inputs));
}

template <class T>
void Graph<T>::record(OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
                      std::function<void()> backward) {
  if (mode_ == GradMode::NoGrad || !output.requires_grad()) return;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(output), std::move(backward)});
}

// ---------------------------------------------------------------- convolution

template <class T>
Tensor<T> Graph<T>::conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           std::size_t stride) {
  require(x.rank() == 4, "conv2d: input must be [N,C,H,W], got " + shape_string(x.shape()));
  require(w.rank() == 4, "conv2d: weight must be [Co,C,k,k], got " + shape_string(w.shape()));
  require(stride >= 1, "conv2d: stride must be positive");
  const std::size_t k = w.dim(2);
  require(w.dim(3) == k && k % 2 == 1,
          "conv2d: kernel must be square with odd size, weight " + shape_string(w.shape()));
  require(w.dim(1) == x.dim(1), "conv2d: channel mismatch between input " +
                                    shape_string(x.shape()) + " and weight " +
                                    shape_string(w.shape()));
  require(b.rank() == 1 && b.dim(0) == w.dim(0),
          "conv2d: bias " + shape_string(b.shape()) + " does not match weight " +
              shape_string(w.shape()));
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), k, k, stride, k / 2, k / 2, 0, 0};
  require(g.h + 2 * g.pad_h >= k && g.w + 2 * g.pad_w >= k,
          "conv2d: kernel " + shape_string(w.shape()) + " does not fit input " +
              shape_string(x.shape()));
  g.ho = (g.h + 2 * g.pad_h - k) / stride + 1;
  g.wo = (g.w + 2 * g.pad_w - k) / stride + 1;

  auto cols = std::make_shared<std::vector<T>>(g.patch() * g.columns());
  im2col(x.values().data(), g, cols->data());
  std::vector<T> outmat(g.co * g.columns());
  simd::gemm<T>(g.co, g.columns(), g.patch(), w.values().data(), g.patch(), cols->data(),
                g.columns(), outmat.data(), g.columns(), false);
  std::vector<T> out(g.n * g.co * g.out_pixels());
  const auto bias = b.values();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.co; ++co) {
      const T* src = outmat.data() + co * g.columns() + n * g.out_pixels();
      T* dst = out.data() + (n * g.co + co) * g.out_pixels();
      for (std::size_t p = 0; p < g.out_pixels(); ++p) dst[p] = src[p] + bias[co];
    }
  }
  auto y = make_output({g.n, g.co, g.ho, g.wo}, std::move(out), {&x, &w, &b}, OpKind::Conv2d);
  if (!y.requires_grad() || mode_ == GradMode::NoGrad) return y;

  const bool gx = needs_grad(x), gw = needs_grad(w), gb = needs_grad(b);
  if (!gw) cols.reset();
  record(OpKind::Conv2d, {x, w, b}, y, [x = Tensor<T>(x), w = Tensor<T>(w), b = Tensor<T>(b), y, g, cols, gx, gw, gb]() mutable {
    const auto dy = y.grad();
    std::vector<T> dmat(g.co * g.columns());
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t co = 0; co < g.co; ++co) {
        std::copy_n(dy.data() + (n * g.co + co) * g.out_pixels(), g.out_pixels(),
                    dmat.data() + co * g.columns() + n * g.out_pixels());
      }
    }
    if (gb) {
      auto db = b.grad();
      for (std::size_t co = 0; co < g.co; ++co) {
        T s = 0;
        const T* row = dmat.data() + co * g.columns();
        for (std::size_t j = 0; j < g.columns(); ++j) s += row[j];
        db[co] += s;
      }
    }
    if (gw) {
      simd::gemm<T>(simd::Trans::No, simd::Trans::Yes, g.co, g.patch(), g.columns(), dmat.data(),
                    g.columns(), cols->data(), g.columns(), w.grad().data(), g.patch(), true);
    }
    if (gx) {
      std::vector<T> dcols(g.patch() * g.columns());
      simd::gemm<T>(simd::Trans::Yes, simd::Trans::No, g.patch(), g.columns(), g.co,
                    w.values().data(), g.patch(), dmat.data(), g.columns(), dcols.data(),
                    g.columns(), false);
      col2im_add(dcols.data(), g, x.grad().data());
    }
  });
  return y;
}

template <class T>
Tensor<T> Graph<T>::conv1d_valid(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.rank() == 3, "conv1d_valid: input must be [N,C,L], got " + shape_string(x.shape()));
  require(w.rank() == 3, "conv1d_valid: weight must be [Co,C,k], got " + shape_string(w.shape()));
  require(w.dim(1) == x.dim(1), "conv1d_valid: channel mismatch between input " +
                                    shape_string(x.shape()) + " and weight " +
                                    shape_string(w.shape()));
  require(b.rank() == 1 && b.dim(0) == w.dim(0),
          "conv1d_valid: bias " + shape_string(b.shape()) + " does not match weight " +
              shape_string(w.shape()));
  const std::size_t k = w.dim(2);
  require(x.dim(2) >= k, "conv1d_valid: input length " + std::to_string(x.dim(2)) +
                             " is shorter than kernel size " + std::to_string(k));
  ConvGeom g{x.dim(0), x.dim(1), 1, x.dim(2), w.dim(0), 1, k, 1, 0, 0, 1, x.dim(2) - k + 1};

  auto cols = std::make_shared<std::vector<T>>(g.patch() * g.columns());
  im2col(x.values().data(), g, cols->data());
  std::vector<T> outmat(g.co * g.columns());
  simd::gemm<T>(g.co, g.columns(), g.patch(), w.values().data(), g.patch(), cols->data(),
                g.columns(), outmat.data(), g.columns(), false);
  std::vector<T> out(g.n * g.co * g.out_pixels());
  const auto bias = b.values();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.co; ++co) {
      const T* src = outmat.data() + co * g.columns() + n * g.out_pixels();
      T* dst = out.data() + (n * g.co + co) * g.out_pixels();
      for (std::size_t p = 0; p < g.out_pixels(); ++p) dst[p] = src[p] + bias[co];
    }
  }
  auto y = make_output({g.n, g.co, g.wo}, std::move(out), {&x, &w, &b}, OpKind::Conv1dValid);
  if (!y.requires_grad() || mode_ == GradMode::NoGrad) return y;

  const bool gx = needs_grad(x), gw = needs_grad(w), gb = needs_grad(b);
  if (!gw) cols.reset();
  record(OpKind::Conv1dValid, {x, w, b}, y, [x = Tensor<T>(x), w = Tensor<T>(w), b = Tensor<T>(b), y, g, cols, gx, gw, gb]() mutable {
    const auto dy = y.grad();
    std::vector<T> dmat(g.co * g.columns());
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t co = 0; co < g.co; ++co) {
        std::copy_n(dy.data() + (n * g.co + co) * g.out_pixels(), g.out_pixels(),
                    dmat.data() + co * g.columns() + n * g.out_pixels());
      }
    }
    if (gb) {
      auto db = b.grad();
      for (std::size_t co = 0; co < g.co; ++co) {
        T s = 0;
        const T* row = dmat.data() + co * g.columns();
        for (std::size_t j = 0; j < g.columns(); ++j) s += row[j];
        db[co] += s;
      }
    }
    if (gw) {
      simd::gemm<T>(simd::Trans::No, simd::Trans::Yes, g.co, g.patch(), g.columns(), dmat.data(),
                    g.columns(), cols->data(), g.columns(), w.grad().data(), g.patch(), true);
    }
    if (gx) {
      std::vector<T> dcols(g.patch() * g.columns());
      simd::gemm<T>(simd::Trans::Yes, simd::Trans::No, g.patch(), g.columns(), g.co,
                    w.values().data(), g.patch(), dmat.data(), g.columns(), dcols.data(),
                    g.columns(), false);
      col2im_add(dcols.data(), g, x.grad().data());
    }
  });
  return y;
}

// ---------------------------------------------------------------- dense & activations

template <class T>
Tensor<T> Graph<T>::dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(0),
          "dense: input " + shape_string(x.shape()) + " incompatible with weight " +
              shape_string(w.shape()));
  require(b.rank() == 1 && b.dim(0) == w.dim(1),
          "dense: bias " + shape_string(b.shape()) + " does not match weight " +
              shape_string(w.shape()));
  const std::size_t n = x.dim(0), in = w.dim(0), out = w.dim(1);
  std::vector<T> y(n * out);
  for (std::size_t i = 0; i < n; ++i) std::copy(b.values().begin(), b.values().end(), &y[i * out]);
  simd::gemm<T>(n, out, in, x.values().data(), in, w.values().data(), out, y.data(), out, true);
  auto result = make_output({n, out}, std::move(y), {&x, &w, &b}, OpKind::Dense);
  const bool gx = needs_grad(x), gw = needs_grad(w), gb = needs_grad(b);
  record(OpKind::Dense, {x, w, b}, result, [x = Tensor<T>(x), w = Tensor<T>(w), b = Tensor<T>(b), result, n, in, out, gx, gw, gb]() mutable {
    const auto dy = result.grad();
    if (gb) {
      auto db = b.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out; ++j) db[j] += dy[i * out + j];
      }
    }
    if (gw) {
      simd::gemm<T>(simd::Trans::Yes, simd::Trans::No, in, out, n, x.values().data(), in, dy.data(),
                    out, w.grad().data(), out, true);
    }
    if (gx) {
      simd::gemm<T>(simd::Trans::No, simd::Trans::Yes, n, in, out, dy.data(), out, w.values().data(),
                    out, x.grad().data(), in, true);
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::leaky_relu(const Tensor<T>& x, T slope) {
  std::vector<T> y(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  auto result = make_output(x.shape(), std::move(y), {&x}, OpKind::LeakyRelu);
  record(OpKind::LeakyRelu, {x}, result, [x = Tensor<T>(x), result, slope]() mutable {
    const auto dy = result.grad();
    const auto xv = x.values();
    auto dx = x.grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xv[i] > T(0) ? dy[i] : slope * dy[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::softmax_columns(const Tensor<T>& x) {
  require(x.rank() >= 2, "softmax_columns: input must be [...,L,K], got " + shape_string(x.shape()));
  const std::size_t l = x.dim(x.rank() - 2), k = x.dim(x.rank() - 1);
  const std::size_t batches = x.size() / (l * k);
  std::vector<T> y(x.size());
  const auto xv = x.values();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const T* in = xv.data() + bi * l * k;
    T* o = y.data() + bi * l * k;
    for (std::size_t c = 0; c < k; ++c) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t r = 0; r < l; ++r) mx = std::max(mx, in[r * k + c]);
      T s = 0;
      for (std::size_t r = 0; r < l; ++r) {
        o[r * k + c] = std::exp(in[r * k + c] - mx);
        s += o[r * k + c];
      }
      for (std::size_t r = 0; r < l; ++r) o[r * k + c] /= s;
    }
  }
  auto result = make_output(x.shape(), std::move(y), {&x}, OpKind::SoftmaxColumns);
  record(OpKind::SoftmaxColumns, {x}, result, [x = Tensor<T>(x), result, l, k, batches]() mutable {
    const auto dy = result.grad();
    const auto yv = result.values();
    auto dx = x.grad();
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t off = bi * l * k;
      for (std::size_t c = 0; c < k; ++c) {
        T dot = 0;
        for (std::size_t r = 0; r < l; ++r) dot += yv[off + r * k + c] * dy[off + r * k + c];
        for (std::size_t r = 0; r < l; ++r) {
          const std::size_t i = off + r * k + c;
          dx[i] += yv[i] * (dy[i] - dot);
        }
      }
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::log_softmax_columns(const Tensor<T>& x) {
  require(x.rank() >= 2,
          "log_softmax_columns: input must be [...,L,K], got " + shape_string(x.shape()));
  const std::size_t l = x.dim(x.rank() - 2), k = x.dim(x.rank() - 1);
  const std::size_t batches = x.size() / (l * k);
  std::vector<T> y(x.size());
  const auto xv = x.values();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const T* in = xv.data() + bi * l * k;
    T* o = y.data() + bi * l * k;
    for (std::size_t c = 0; c < k; ++c) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t r = 0; r < l; ++r) mx = std::max(mx, in[r * k + c]);
      T s = 0;
      for (std::size_t r = 0; r < l; ++r) s += std::exp(in[r * k + c] - mx);
      const T lse = mx + std::log(s);
      for (std::size_t r = 0; r < l; ++r) o[r * k + c] = in[r * k + c] - lse;
    }
  }
  auto result = make_output(x.shape(), std::move(y), {&x}, OpKind::LogSoftmaxColumns);
  record(OpKind::LogSoftmaxColumns, {x}, result, [x = Tensor<T>(x), result, l, k, batches]() mutable {
    const auto dy = result.grad();
    const auto yv = result.values();
    auto dx = x.grad();
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t off = bi * l * k;
      for (std::size_t c = 0; c < k; ++c) {
        T total = 0;
        for (std::size_t r = 0; r < l; ++r) total += dy[off + r * k + c];
        for (std::size_t r = 0; r < l; ++r) {
          const std::size_t i = off + r * k + c;
          dx[i] += dy[i] - std::exp(yv[i]) * total;
        }
      }
    }
  });
  return result;
}

// ---------------------------------------------------------------- shape ops

template <class T>
Tensor<T> Graph<T>::reshape(const Tensor<T>& x, Shape shape) {
  require(shape_size(shape) == x.size(),
          "reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  std::vector<T> y(x.values().begin(), x.values().end());
  auto result = make_output(std::move(shape), std::move(y), {&x}, OpKind::Reshape);
  record(OpKind::Reshape, {x}, result, [x = Tensor<T>(x), result]() mutable {
    const auto dy = result.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::transpose12(const Tensor<T>& x) {
  require(x.rank() == 3, "transpose12: input must be [N,A,B], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), a = x.dim(1), b = x.dim(2);
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    simd::transpose<T>(a, b, x.values().data() + i * a * b, y.data() + i * a * b);
  }
  auto result = make_output({n, b, a}, std::move(y), {&x}, OpKind::Transpose12);
  record(OpKind::Transpose12, {x}, result, [x = Tensor<T>(x), result, n, a, b]() mutable {
    const auto dy = result.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < a; ++r) {
        for (std::size_t c = 0; c < b; ++c) dx[i * a * b + r * b + c] += dy[i * a * b + c * a + r];
      }
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require(begin < end && end <= x.dim(0), "rows: range [" + std::to_string(begin) + "," +
                                              std::to_string(end) + ") invalid for " +
                                              shape_string(x.shape()));
  const std::size_t stride = x.size() / x.dim(0);
  std::vector<T> y(x.values().begin() + begin * stride, x.values().begin() + end * stride);
  Shape shape = x.shape();
  shape[0] = end - begin;
  auto result = make_output(std::move(shape), std::move(y), {&x}, OpKind::Rows);
  record(OpKind::Rows, {x}, result, [x = Tensor<T>(x), result, begin, stride]() mutable {
    const auto dy = result.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[begin * stride + i] += dy[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::pick(const Tensor<T>& x, std::span<const std::size_t> index) {
  require(x.rank() == 3, "pick: input must be [N,L,K], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), l = x.dim(1), k = x.dim(2);
  require(index.size() == n * k, "pick: expected " + std::to_string(n * k) + " indices, got " +
                                     std::to_string(index.size()));
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<T> y(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t r = idx[i * k + c];
      require(r < l, "pick: index " + std::to_string(r) + " out of range for L=" +
                         std::to_string(l));
      y[i * k + c] = x.values()[(i * l + r) * k + c];
    }
  }
  auto result = make_output({n, k}, std::move(y), {&x}, OpKind::Pick);
  record(OpKind::Pick, {x}, result, [x = Tensor<T>(x), result, idx = std::move(idx), n, l, k]() mutable {
    const auto dy = result.grad();
    auto dx = x.grad();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) dx[(i * l + idx[i * k + c]) * k + c] += dy[i * k + c];
    }
  });
  return result;
}

// ---------------------------------------------------------------- elementwise & reductions

template <class T>
Tensor<T> Graph<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  auto result = make_output(a.shape(), std::move(y), {&a, &b}, OpKind::Add);
  const bool ga = needs_grad(a), gb = needs_grad(b);
  record(OpKind::Add, {a, b}, result, [a = Tensor<T>(a), b = Tensor<T>(b), result, ga, gb]() mutable {
    const auto dy = result.grad();
    if (ga) {
      auto da = a.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    }
    if (gb) {
      auto db = b.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::sub(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  auto result = make_output(a.shape(), std::move(y), {&a, &b}, OpKind::Sub);
  const bool ga = needs_grad(a), gb = needs_grad(b);
  record(OpKind::Sub, {a, b}, result, [a = Tensor<T>(a), b = Tensor<T>(b), result, ga, gb]() mutable {
    const auto dy = result.grad();
    if (ga) {
      auto da = a.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    }
    if (gb) {
      auto db = b.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  auto result = make_output(a.shape(), std::move(y), {&a, &b}, OpKind::Mul);
  const bool ga = needs_grad(a), gb = needs_grad(b);
  record(OpKind::Mul, {a, b}, result, [a = Tensor<T>(a), b = Tensor<T>(b), result, ga, gb]() mutable {
    const auto dy = result.grad();
    if (ga) {
      auto da = a.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b.values()[i];
    }
    if (gb) {
      auto db = b.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a.values()[i];
    }
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::mul_const(const Tensor<T>& a, std::span<const T> c) {
  require(c.size() == a.size(), "mul_const: constant has " + std::to_string(c.size()) +
                                    " values for tensor " + shape_string(a.shape()));
  std::vector<T> cv(c.begin(), c.end());
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * cv[i];
  auto result = make_output(a.shape(), std::move(y), {&a}, OpKind::MulConst);
  record(OpKind::MulConst, {a}, result, [a = Tensor<T>(a), result, cv = std::move(cv)]() mutable {
    const auto dy = result.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * cv[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::scale(const Tensor<T>& a, T s) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * s;
  auto result = make_output(a.shape(), std::move(y), {&a}, OpKind::Scale);
  record(OpKind::Scale, {a}, result, [a = Tensor<T>(a), result, s]() mutable {
    const auto dy = result.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * s;
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + s;
  auto result = make_output(a.shape(), std::move(y), {&a}, OpKind::AddScalar);
  record(OpKind::AddScalar, {a}, result, [a = Tensor<T>(a), result]() mutable {
    const auto dy = result.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::square(const Tensor<T>& a) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * a.values()[i];
  auto result = make_output(a.shape(), std::move(y), {&a}, OpKind::Square);
  record(OpKind::Square, {a}, result, [a = Tensor<T>(a), result]() mutable {
    const auto dy = result.grad();
    auto da = a.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += T(2) * a.values()[i] * dy[i];
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::sqrt(const Tensor<T>& a) {
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(a.values()[i] > T(0), "sqrt: input must be positive");
    y[i] = std::sqrt(a.values()[i]);
  }
  auto result = make_output(a.shape(), std::move(y), {&a}, OpKind::Sqrt);
  record(OpKind::Sqrt, {a}, result, [a = Tensor<T>(a), result]() mutable {
    const auto dy = result.grad();
    const auto yv = result.values();
    auto da = a.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] / (T(2) * yv[i]);
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.values()) s += v;
  auto result = make_output({1}, {s}, {&a}, OpKind::Sum);
  record(OpKind::Sum, {a}, result, [a = Tensor<T>(a), result]() mutable {
    const T dy = result.grad()[0];
    for (auto& d : a.grad()) d += dy;
  });
  return result;
}

template <class T>
Tensor<T> Graph<T>::mean(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.values()) s += v;
  const T inv = T(1) / static_cast<T>(a.size());
  auto result = make_output({1}, {s * inv}, {&a}, OpKind::Mean);
  record(OpKind::Mean, {a}, result, [a = Tensor<T>(a), result, inv]() mutable {
    const T dy = result.grad()[0] * inv;
    for (auto& d : a.grad()) d += dy;
  });
  return result;
}

// ---------------------------------------------------------------- backward

template <class T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (mode_ == GradMode::NoGrad) throw InvalidArgument("backward: graph was built without a tape");
  if (!loss.defined() || loss.size() != 1) {
    throw InvalidArgument("backward: loss must be a scalar, got " +
                          (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  // Leaves keep (and accumulate into) their existing gradient; intermediates start at zero.
  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (needs_grad(in)) in.ensure_grad();
    }
    node.output.ensure_grad();
    node.output.zero_grad();
  }
  if (!loss.requires_grad()) return;
  Tensor<T> seed = loss;
  seed.ensure_grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();

  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (in.is_parameter() && needs_grad(in) && !all_finite<T>(in.grad())) {
        throw NumericError(std::string("non-finite gradient flowing out of ") + op_name(node.kind));
      }
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace retouch::nn
