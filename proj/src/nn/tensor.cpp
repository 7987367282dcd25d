#include "retouch/nn/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "retouch/common/error.hpp"

namespace retouch::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape.empty()) throw InvalidArgument("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw InvalidArgument("tensor shape " + shape_string(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.data_ = std::make_shared<Data>();
  t.data_->shape = std::move(shape);
  t.data_->values = std::move(values);
  t.data_->requires_grad = requires_grad;
  return t;
}

template <class T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t = from(std::move(shape), std::move(values), true);
  t.data_->is_parameter = true;
  return t;
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw InvalidArgument("item() on non-scalar tensor " + shape_string(shape()));
  return data_->values[0];
}

template <class T>
std::span<T> Tensor<T>::ensure_grad() {
  if (data_->grad.empty()) data_->grad.assign(data_->values.size(), T(0));
  return data_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  std::fill(data_->grad.begin(), data_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t = from(data_->shape, data_->values, data_->requires_grad);
  t.data_->is_parameter = data_->is_parameter;
  return t;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace retouch::nn
