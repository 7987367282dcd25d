#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "retouch/nn/tensor.hpp"

namespace retouch::nn {

enum class GradMode {
  Record,        ///< tape every op; parameters receive gradients
  FrozenParams,  ///< tape every op, but parameters are treated as constants
  NoGrad,        ///< forward only
};

enum class OpKind {
  Conv2d,
  Conv1dValid,
  Dense,
  LeakyRelu,
  SoftmaxColumns,
  LogSoftmaxColumns,
  Reshape,
  Transpose12,
  Rows,
  Pick,
  Add,
  Sub,
  Mul,
  MulConst,
  Scale,
  AddScalar,
  Square,
  Sqrt,
  Sum,
  Mean,
};

/// Reverse-mode differentiation tape.
///
/// Ops are recorded in execution order, which is a topological order of the
/// computation; backward() walks the tape once in reverse. A Graph is used
/// from one thread; parameters are only written during backward().
template <class T>
class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::Record) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  GradMode mode() const { return mode_; }
  std::size_t node_count() const { return nodes_.size(); }
  OpKind node_kind(std::size_t i) const { return nodes_.at(i).kind; }

  /// Cross-correlation of x[N,C,H,W] with w[Co,C,k,k] (k odd), zero "same"
  /// padding of k/2, output [N,Co,(H-1)/stride+1,(W-1)/stride+1].
  Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                   std::size_t stride);

  /// Unpadded cross-correlation of x[N,C,L] with w[Co,C,k]; output [N,Co,L-k+1].
  Tensor<T> conv1d_valid(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

  /// x[N,in] * w[in,out] + b[out].
  Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

  Tensor<T> leaky_relu(const Tensor<T>& x, T slope);

  /// Softmax over the second-to-last axis of x[...,L,K] (one distribution per column).
  Tensor<T> softmax_columns(const Tensor<T>& x);
  Tensor<T> log_softmax_columns(const Tensor<T>& x);

  Tensor<T> reshape(const Tensor<T>& x, Shape shape);
  /// [N,A,B] -> [N,B,A].
  Tensor<T> transpose12(const Tensor<T>& x);
  /// Slice [begin,end) of the leading axis.
  Tensor<T> rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
  /// out[n,k] = x[n, index[n*K+k], k] for x[N,L,K].
  Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> index);

  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
  /// Elementwise product with a constant array (no gradient to the constant).
  Tensor<T> mul_const(const Tensor<T>& a, std::span<const T> c);
  Tensor<T> scale(const Tensor<T>& a, T s);
  Tensor<T> add_scalar(const Tensor<T>& a, T s);
  Tensor<T> square(const Tensor<T>& a);
  /// Elementwise square root; inputs must be positive.
  Tensor<T> sqrt(const Tensor<T>& a);
  Tensor<T> sum(const Tensor<T>& a);
  Tensor<T> mean(const Tensor<T>& a);

  /// Populates gradients of everything reachable from a scalar loss.
  void backward(const Tensor<T>& loss);

 private:
  struct Node {
    OpKind kind;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  bool needs_grad(const Tensor<T>& t) const;
  bool any_needs_grad(std::initializer_list<const Tensor<T>*> ts) const;
  Tensor<T> make_output(Shape shape, std::vector<T> values,
                        std::initializer_list<const Tensor<T>*> inputs, OpKind kind);
  void record(OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward);

  GradMode mode_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace retouch::nn
