#pragma once

#include <cstdint>
#include <vector>

#include "retouch/nn/params.hpp"

namespace retouch::nn {

/// Optimizer state for one ParamSet. Moment i has the shape of parameter i.
template <class T>
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  /// Zero moments sized for `params`.
  static AdamState for_params(const ParamSet<T>& params, double lr);
};

/// Bias-corrected Adam step using the gradients stored on `params`.
/// Throws NumericError (leaving everything untouched) if any gradient is not finite.
template <class T>
void adam_step(AdamState<T>& state, ParamSet<T>& params);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace retouch::nn
