#pragma once

// Central finite-difference check of reverse-mode gradients in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/nn/graph.hpp"

namespace retouch::testing {

struct GradCheck {
  double max_rel_error = 0;
  std::size_t coordinates = 0;
  /// Coordinates where no two successive step sizes agreed (an activation
  /// kink sits within the smallest step); they are excluded from the maximum.
  std::size_t skipped = 0;
};

/// Relative error with a floor so that near-zero gradients compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// `build` must construct the same scalar loss from `leaves` every time it is
/// called. Up to `per_leaf` coordinates of each leaf are probed (all of them
/// when the leaf is that small). Each coordinate is differenced at h, h/2, h/4
/// and h/8; the first pair of successive estimates that agree is used, which
/// keeps piecewise-linear activations from straddling a kink.
inline GradCheck grad_check(const std::vector<nn::Tensor<double>>& leaves,
                            const std::function<nn::Tensor<double>(nn::Graph<double>&)>& build,
                            Rng& rng, std::size_t per_leaf = 24, double h = 1e-4) {
  std::vector<nn::Tensor<double>> ls = leaves;
  for (auto& leaf : ls) {
    leaf.ensure_grad();
    leaf.zero_grad();
  }
  {
    nn::Graph<double> graph(nn::GradMode::Record);
    graph.backward(build(graph));
  }
  auto eval = [&] {
    nn::Graph<double> graph(nn::GradMode::NoGrad);
    return build(graph).item();
  };
  GradCheck result;
  for (auto& leaf : ls) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    std::vector<std::size_t> coords;
    if (leaf.size() <= per_leaf) {
      for (std::size_t i = 0; i < leaf.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_leaf; ++i) coords.push_back(rng.below(leaf.size()));
    }
    for (std::size_t i : coords) {
      const double saved = leaf.values()[i];
      auto central = [&](double step) {
        leaf.values()[i] = saved + step;
        const double up = eval();
        leaf.values()[i] = saved - step;
        const double down = eval();
        leaf.values()[i] = saved;
        return (up - down) / (2 * step);
      };
      double prev = central(h);
      bool found = false;
      for (int halvings = 1; halvings <= 3 && !found; ++halvings) {
        const double next = central(h / (1 << halvings));
        if (relative_error(prev, next) < 1e-5) {
          result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], next));
          found = true;
        }
        prev = next;
      }
      if (!found) ++result.skipped;
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace retouch::testing
