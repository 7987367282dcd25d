#pragma once

// The generator as a single-step actor-critic agent.
//
// A shared stride-2 conv trunk feeds a value head V(x) and a policy head that
// emits one categorical distribution over `levels` discrete steps for each of
// the twelve filters. The policy head reshapes a dense layer into a 64-channel
// sequence of length levels+4 and applies two unpadded kernel-3 1D convs,
// landing exactly on `levels` positions.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "retouch/common/rng.hpp"
#include "retouch/filters/filters.hpp"
#include "retouch/image/image.hpp"
#include "retouch/nn/checkpoint.hpp"
#include "retouch/nn/graph.hpp"
#include "retouch/nn/params.hpp"

namespace retouch::agent {

inline constexpr std::size_t kActions = filters::kFilterCount;

struct AgentArch {
  std::size_t input_size = 64;
  std::vector<std::size_t> trunk_channels = {16, 32, 64, 64};
  std::size_t kernel = 5;
  double slope = 0.2;
  std::size_t value_hidden = 64;
  std::size_t policy_channels = 64;
  std::size_t levels = 33;

  std::size_t final_size() const;
  std::size_t trunk_features() const;
  /// Sequence length fed to the 1D policy convs.
  std::size_t policy_sequence() const { return levels + 4; }
};

/// Per-filter categorical distributions q[l][k], l < levels, k < kActions.
class PolicyMatrix {
 public:
  PolicyMatrix() = default;
  /// Validates positivity and per-column normalization (tolerance 1e-6).
  PolicyMatrix(std::size_t levels, std::vector<double> q);

  std::size_t levels() const { return levels_; }
  double at(std::size_t l, std::size_t k) const { return q_[l * kActions + k]; }
  std::span<const double> values() const { return q_; }

 private:
  std::size_t levels_ = 0;
  std::vector<double> q_;
};

/// Graph outputs of one forward pass over a batch.
template <class T>
struct AgentOutput {
  nn::Tensor<T> log_q;  ///< [N,L,K]
  nn::Tensor<T> q;      ///< [N,L,K]
  nn::Tensor<T> value;  ///< [N,1]
};

template <class T>
class AgentNet {
 public:
  AgentNet(const AgentArch& arch, Rng& rng);

  const AgentArch& arch() const { return arch_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  /// states [N,3,S,S].
  AgentOutput<T> forward(nn::Graph<T>& graph, const nn::Tensor<T>& states) const;

  struct Evaluation {
    PolicyMatrix q;
    double value;
  };
  /// Single forward pass on one input_size x input_size state.
  Evaluation evaluate(const image::Image& state) const;
  std::vector<Evaluation> evaluate_batch(std::span<const image::Image> states) const;

  /// Makes the policy put (almost) all mass on the level that decodes to 0
  /// for every filter, independent of the input.
  void force_neutral_policy();

  void export_to(nn::Checkpoint& ckpt) const;
  void import_from(const nn::Checkpoint& ckpt);

 private:
  AgentArch arch_;
  nn::ParamSet<T> params_;
};

/// a = a_min + (a_max - a_min) * (level - 1) / (levels - 1), level in [1, levels].
double decode_action(std::size_t level, const filters::FilterSpec& spec, std::size_t levels);

struct SampledAction {
  std::array<std::size_t, kActions> levels{};  ///< 1-based
  filters::ActionVector action;
};

/// Draws each level independently from its column.
SampledAction sample_action(const PolicyMatrix& q, Rng& rng);

/// Column-wise argmax; ties go to the smallest level.
SampledAction greedy_action(const PolicyMatrix& q);

struct Reward {
  double value;
  double score;
  double mse;
};

/// R = score - alpha * mse.
Reward compute_reward(double score, double mse_value, double alpha);

/// (V - R)^2 / 2.
double value_loss(double v, double r);

/// Entropy (natural log) of column k.
double column_entropy(const PolicyMatrix& q, std::size_t k);

/// sum_k ( -ln q[l_k][k] * (R - V) - beta * H(q[.,k]) ), levels 1-based.
double policy_loss(const PolicyMatrix& q, std::span<const std::size_t> levels, double r, double v,
                   double beta);

template <class T>
struct AgentLoss {
  nn::Tensor<T> total;  ///< batch mean of value + policy losses
  double value_loss = 0;
  double policy_loss = 0;
};

/// Builds the combined generator objective for a batch. `levels` holds N*K
/// 1-based indices, `rewards` N values. The advantage R - V is a constant.
template <class T>
AgentLoss<T> agent_loss(nn::Graph<T>& graph, const AgentOutput<T>& out,
                        std::span<const std::size_t> levels, std::span<const double> rewards,
                        double beta);

extern template class AgentNet<float>;
extern template class AgentNet<double>;

}  // namespace retouch::agent
