#include "retouch/nn/params.hpp"

#include <cmath>

#include "retouch/common/error.hpp"

namespace retouch::nn {

template <class T>
Tensor<T> ParamSet<T>::add(std::string name, Tensor<T> tensor) {
  if (find(name)) throw InvalidArgument("duplicate parameter name: " + name);
  if (!tensor.is_parameter()) throw InvalidArgument("not a parameter tensor: " + name);
  entries_.emplace_back(std::move(name), std::move(tensor));
  return entries_.back().second;
}

template <class T>
Tensor<T>* ParamSet<T>::find(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

template <class T>
void ParamSet<T>::zero_grad() {
  for (auto& entry : entries_) {
    entry.second.ensure_grad();
    entry.second.zero_grad();
  }
}

template <class T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.size();
  return n;
}

template <class T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> values(shape_size(shape));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::parameter(std::move(shape), std::move(values));
}

template class ParamSet<float>;
template class ParamSet<double>;
template Tensor<float> he_uniform<float>(Shape, std::size_t, Rng&);
template Tensor<double> he_uniform<double>(Shape, std::size_t, Rng&);

}  // namespace retouch::nn
