#pragma once

#include <string>
#include <utility>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/nn/tensor.hpp"

namespace retouch::nn {

/// Ordered, named collection of trainable tensors.
template <class T>
class ParamSet {
 public:
  /// Registers a parameter; names must be unique. Returns a handle to it.
  Tensor<T> add(std::string name, Tensor<T> tensor);

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor<T>& tensor(std::size_t i) { return entries_[i].second; }
  const Tensor<T>& tensor(std::size_t i) const { return entries_[i].second; }
  Tensor<T>* find(const std::string& name);

  /// Zeroes (allocating when absent) every gradient.
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// Uniform He-style init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <class T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

extern template class ParamSet<float>;
extern template class ParamSet<double>;

}  // namespace retouch::nn
