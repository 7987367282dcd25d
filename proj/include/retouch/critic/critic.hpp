#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/image/image.hpp"
#include "retouch/nn/checkpoint.hpp"
#include "retouch/nn/graph.hpp"
#include "retouch/nn/params.hpp"

namespace retouch::critic {

struct CriticArch {
  std::size_t input_size = 64;
  std::vector<std::size_t> channels = {8, 16, 32, 64};
  std::size_t kernel = 5;
  double slope = 0.2;

  /// Spatial size after the stride-2 stack.
  std::size_t final_size() const;
};

/// Wasserstein critic: stride-2 conv stack with leaky ReLU, then a dense
/// layer to one score per image. No normalization layers.
template <class T>
class CriticNet {
 public:
  CriticNet(const CriticArch& arch, Rng& rng);

  const CriticArch& arch() const { return arch_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  /// batch [N,3,S,S] -> scores [N,1].
  nn::Tensor<T> forward(nn::Graph<T>& graph, const nn::Tensor<T>& batch) const;

  /// Score of one image; it must be input_size x input_size.
  double score(const image::Image& img) const;
  std::vector<double> score_batch(std::span<const image::Image> imgs) const;

  /// Zeroes the final dense layer, making every score equal to its bias (0).
  void zero_output_layer();

  void export_to(nn::Checkpoint& ckpt) const;
  void import_from(const nn::Checkpoint& ckpt);

 private:
  CriticArch arch_;
  nn::ParamSet<T> params_;
};

/// Packs same-size images into a planar [N,3,H,W] tensor.
template <class T>
nn::Tensor<T> images_to_tensor(std::span<const image::Image> imgs, bool requires_grad = false);

/// y_hat = eps*y + (1-eps)*y_prime, per value.
image::Image interpolate(const image::Image& y, const image::Image& y_prime, double eps);

/// Differentiable scoring function: batch [N,...] -> [N,1].
template <class T>
using ScoreFn = std::function<nn::Tensor<T>(nn::Graph<T>&, const nn::Tensor<T>&)>;

enum class GpDirections {
  /// One probe along the (constant) normalized input gradient; the central
  /// difference then equals the gradient norm to O(step^2).
  GradientAligned,
  /// R random unit probes; norm^2 estimated as (n/R) * sum d_r^2.
  Random,
};

struct GpOptions {
  GpDirections directions = GpDirections::GradientAligned;
  std::size_t random_probes = 4;
  double step = 1e-3;
};

struct GpEstimate {
  double z = 0.0;
  std::vector<double> grad_norms;
};

/// Builds the penalty mean((||grad D(y_hat)|| - 1)^2) into `graph` using
/// central differences of D along probe directions, so its gradient with
/// respect to the critic weights comes from one ordinary backward pass.
/// Per-sample norm estimates are written to `norms` when non-null.
template <class T>
nn::Tensor<T> gradient_penalty_term(nn::Graph<T>& graph, const ScoreFn<T>& score,
                                    const nn::Tensor<T>& interpolates, const GpOptions& options,
                                    Rng& rng, std::vector<double>* norms = nullptr);

/// Value-only penalty estimate (no weight gradients).
template <class T>
GpEstimate gradient_penalty(const ScoreFn<T>& score, const nn::Tensor<T>& interpolates,
                            const GpOptions& options, Rng& rng);

/// -mean(real) + mean(fake) + lambda * z.
double critic_loss(std::span<const double> scores_real, std::span<const double> scores_fake,
                   double z, double lambda);

extern template class CriticNet<float>;
extern template class CriticNet<double>;

}  // namespace retouch::critic
