#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace retouch::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Shaped real array with an optional gradient slot.
///
/// Tensor is a shared handle: copies alias the same storage, which is how a
/// parameter owned by a network is referenced from the graphs that use it.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  /// Trainable leaf; its gradient accumulates across backward passes.
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t i) const { return data_->shape.at(i); }
  std::size_t size() const { return data_->values.size(); }

  std::span<T> values() { return data_->values; }
  std::span<const T> values() const { return data_->values; }
  T item() const;

  bool requires_grad() const { return data_->requires_grad; }
  bool is_parameter() const { return data_->is_parameter; }
  bool has_grad() const { return !data_->grad.empty(); }
  std::span<T> grad() { return data_->grad; }
  std::span<const T> grad() const { return data_->grad; }
  /// Allocates a zero gradient when absent.
  std::span<T> ensure_grad();
  void zero_grad();

  /// Deep copy: fresh storage, no gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  struct Data {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
    bool is_parameter = false;
  };
  std::shared_ptr<Data> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace retouch::nn
