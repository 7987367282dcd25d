#include "retouch/nn/adam.hpp"

#include <cmath>

#include "retouch/common/error.hpp"
#include "retouch/simd/kernels.hpp"

namespace retouch::nn {

template <class T>
AdamState<T> AdamState<T>::for_params(const ParamSet<T>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params.tensor(i).size(), T(0));
    s.v.emplace_back(params.tensor(i).size(), T(0));
  }
  return s;
}

template <class T>
void adam_step(AdamState<T>& state, ParamSet<T>& params) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InvalidArgument("adam_step: optimizer state does not match parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.tensor(i);
    if (state.m[i].size() != p.size() || state.v[i].size() != p.size()) {
      throw InvalidArgument("adam_step: moment shape mismatch for " + params.name(i));
    }
    if (!p.has_grad()) continue;
    for (T g : p.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + params.name(i) +
                           " at step " + std::to_string(state.t + 1));
      }
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const simd::AdamCoeffs c{state.lr,
                           state.beta1,
                           state.beta2,
                           state.eps,
                           1.0 - std::pow(state.beta1, t),
                           1.0 - std::pow(state.beta2, t)};
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.tensor(i);
    if (!p.has_grad()) continue;
    simd::adam_update<T>(p.values(), p.grad(), state.m[i], state.v[i], c);
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(AdamState<float>&, ParamSet<float>&);
template void adam_step<double>(AdamState<double>&, ParamSet<double>&);

}  // namespace retouch::nn
