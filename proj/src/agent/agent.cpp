#include "retouch/agent/agent.hpp"

#include <cmath>
#include <string>

#include "retouch/common/error.hpp"
#include "retouch/critic/critic.hpp"

namespace retouch::agent {

std::size_t AgentArch::final_size() const {
  std::size_t s = input_size;
  for (std::size_t i = 0; i < trunk_channels.size(); ++i) s = (s - 1) / 2 + 1;
  return s;
}

std::size_t AgentArch::trunk_features() const {
  return trunk_channels.back() * final_size() * final_size();
}

PolicyMatrix::PolicyMatrix(std::size_t levels, std::vector<double> q)
    : levels_(levels), q_(std::move(q)) {
  if (levels < 2) throw InvalidArgument("policy needs at least two levels");
  if (q_.size() != levels * kActions) {
    throw InvalidArgument("policy matrix needs " + std::to_string(levels * kActions) +
                          " entries, got " + std::to_string(q_.size()));
  }
  for (std::size_t k = 0; k < kActions; ++k) {
    double total = 0;
    for (std::size_t l = 0; l < levels; ++l) {
      const double v = at(l, k);
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("policy entry outside [0,1]");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw InvalidArgument("policy column " + std::to_string(k) + " sums to " +
                            std::to_string(total));
    }
  }
}

// Parameter layout: trunk convs, value fc1/fc2, policy fc, policy conv0/conv1.
template <class T>
AgentNet<T>::AgentNet(const AgentArch& arch, Rng& rng) : arch_(arch) {
  if (arch.trunk_channels.empty()) throw InvalidArgument("agent trunk needs a conv layer");
  if (arch.levels < 2) throw InvalidArgument("agent needs at least two levels");
  auto zeros = [](std::size_t n) { return nn::Tensor<T>::parameter({n}, std::vector<T>(n, T(0))); };
  std::size_t in = 3;
  for (std::size_t i = 0; i < arch.trunk_channels.size(); ++i) {
    const std::size_t out = arch.trunk_channels[i];
    const std::string prefix = "agent/trunk.conv" + std::to_string(i);
    params_.add(prefix + ".weight", nn::he_uniform<T>({out, in, arch.kernel, arch.kernel},
                                                      in * arch.kernel * arch.kernel, rng));
    params_.add(prefix + ".bias", zeros(out));
    in = out;
  }
  const std::size_t feat = arch.trunk_features();
  params_.add("agent/value.fc1.weight", nn::he_uniform<T>({feat, arch.value_hidden}, feat, rng));
  params_.add("agent/value.fc1.bias", zeros(arch.value_hidden));
  params_.add("agent/value.fc2.weight",
              nn::he_uniform<T>({arch.value_hidden, 1}, arch.value_hidden, rng));
  params_.add("agent/value.fc2.bias", zeros(1));
  const std::size_t seq = arch.policy_sequence() * arch.policy_channels;
  params_.add("agent/policy.fc.weight", nn::he_uniform<T>({feat, seq}, feat, rng));
  params_.add("agent/policy.fc.bias", zeros(seq));
  const std::size_t pc = arch.policy_channels;
  params_.add("agent/policy.conv0.weight", nn::he_uniform<T>({pc, pc, 3}, pc * 3, rng));
  params_.add("agent/policy.conv0.bias", zeros(pc));
  params_.add("agent/policy.conv1.weight", nn::he_uniform<T>({kActions, pc, 3}, pc * 3, rng));
  params_.add("agent/policy.conv1.bias", zeros(kActions));
}

template <class T>
AgentOutput<T> AgentNet<T>::forward(nn::Graph<T>& graph, const nn::Tensor<T>& states) const {
  if (states.rank() != 4 || states.dim(1) != 3 || states.dim(2) != arch_.input_size ||
      states.dim(3) != arch_.input_size) {
    throw InvalidArgument("agent expects [N,3," + std::to_string(arch_.input_size) + "," +
                          std::to_string(arch_.input_size) + "], got " +
                          nn::shape_string(states.shape()));
  }
  const auto& p = params_;
  const T slope = static_cast<T>(arch_.slope);
  const std::size_t n = states.dim(0);
  nn::Tensor<T> h = states;
  std::size_t i = 0;
  for (; i < arch_.trunk_channels.size(); ++i) {
    h = graph.leaky_relu(graph.conv2d(h, p.tensor(2 * i), p.tensor(2 * i + 1), 2), slope);
  }
  const auto features = graph.reshape(h, {n, arch_.trunk_features()});
  std::size_t next = 2 * i;

  auto hidden = graph.leaky_relu(graph.dense(features, p.tensor(next), p.tensor(next + 1)), slope);
  auto value = graph.dense(hidden, p.tensor(next + 2), p.tensor(next + 3));
  next += 4;

  auto seq = graph.leaky_relu(graph.dense(features, p.tensor(next), p.tensor(next + 1)), slope);
  seq = graph.reshape(seq, {n, arch_.policy_channels, arch_.policy_sequence()});
  seq = graph.leaky_relu(graph.conv1d_valid(seq, p.tensor(next + 2), p.tensor(next + 3)), slope);
  auto logits = graph.conv1d_valid(seq, p.tensor(next + 4), p.tensor(next + 5));  // [N,K,L]
  logits = graph.transpose12(logits);                                             // [N,L,K]
  return {graph.log_softmax_columns(logits), graph.softmax_columns(logits), value};
}

template <class T>
typename AgentNet<T>::Evaluation AgentNet<T>::evaluate(const image::Image& state) const {
  return evaluate_batch(std::span<const image::Image>(&state, 1)).front();
}

template <class T>
std::vector<typename AgentNet<T>::Evaluation> AgentNet<T>::evaluate_batch(
    std::span<const image::Image> states) const {
  for (const auto& s : states) {
    if (s.width() != arch_.input_size || s.height() != arch_.input_size) {
      throw InvalidArgument("agent state must be " + std::to_string(arch_.input_size) + "x" +
                            std::to_string(arch_.input_size) + ", got " +
                            std::to_string(s.width()) + "x" + std::to_string(s.height()));
    }
  }
  if (states.empty()) return {};
  nn::Graph<T> graph(nn::GradMode::NoGrad);
  const auto out = forward(graph, critic::images_to_tensor<T>(states));
  const std::size_t per = arch_.levels * kActions;
  std::vector<Evaluation> result;
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::vector<double> q(out.q.values().begin() + static_cast<std::ptrdiff_t>(i * per),
                          out.q.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    result.push_back({PolicyMatrix(arch_.levels, std::move(q)), out.value.values()[i]});
  }
  return result;
}

template <class T>
void AgentNet<T>::force_neutral_policy() {
  const std::size_t base = 2 * arch_.trunk_channels.size() + 4;
  auto fill = [](nn::Tensor<T>& t, T v) {
    for (auto& x : t.values()) x = v;
  };
  auto& fc_w = params_.tensor(base);
  auto& fc_b = params_.tensor(base + 1);
  auto& c0_w = params_.tensor(base + 2);
  auto& c0_b = params_.tensor(base + 3);
  auto& c1_w = params_.tensor(base + 4);
  auto& c1_b = params_.tensor(base + 5);
  for (auto* t : {&fc_w, &fc_b, &c0_w, &c0_b, &c1_w, &c1_b}) fill(*t, T(0));
  // Level index (0-based) that decodes to 0, and its centre in the padded sequence.
  const std::size_t mid = (arch_.levels - 1) / 2;
  fc_b.values()[mid + 2] = T(1);  // channel 0
  c0_w.values()[1] = T(1);        // out 0, in 0, centre tap
  const std::size_t pc = arch_.policy_channels;
  for (std::size_t k = 0; k < kActions; ++k) c1_w.values()[(k * pc) * 3 + 1] = T(30);
}

template <class T>
void AgentNet<T>::export_to(nn::Checkpoint& ckpt) const {
  nn::export_params(params_, ckpt);
}

template <class T>
void AgentNet<T>::import_from(const nn::Checkpoint& ckpt) {
  nn::import_params(params_, ckpt);
}

double decode_action(std::size_t level, const filters::FilterSpec& spec, std::size_t levels) {
  if (levels < 2) throw InvalidArgument("decode_action: need at least two levels");
  if (level < 1 || level > levels) {
    throw InvalidArgument("decode_action: level " + std::to_string(level) + " outside [1, " +
                          std::to_string(levels) + "]");
  }
  if (level == levels) return spec.max_value;
  return spec.min_value + (spec.max_value - spec.min_value) * static_cast<double>(level - 1) /
                              static_cast<double>(levels - 1);
}

namespace {

SampledAction decode_all(const std::array<std::size_t, kActions>& levels, std::size_t count) {
  SampledAction s;
  s.levels = levels;
  for (std::size_t k = 0; k < kActions; ++k) {
    s.action.values[k] = decode_action(levels[k], filters::filter_spec(k), count);
  }
  return s;
}

}  // namespace

SampledAction sample_action(const PolicyMatrix& q, Rng& rng) {
  std::array<std::size_t, kActions> levels{};
  for (std::size_t k = 0; k < kActions; ++k) {
    const double u = rng.uniform();
    double cum = 0;
    std::size_t chosen = q.levels();
    for (std::size_t l = 0; l < q.levels(); ++l) {
      cum += q.at(l, k);
      if (u < cum) {
        chosen = l + 1;
        break;
      }
    }
    // Rounding can leave cum slightly below 1; fall back to the last level with mass.
    if (chosen == q.levels()) {
      for (std::size_t l = q.levels(); l-- > 0;) {
        if (q.at(l, k) > 0) {
          chosen = l + 1;
          break;
        }
      }
    }
    levels[k] = chosen;
  }
  return decode_all(levels, q.levels());
}

SampledAction greedy_action(const PolicyMatrix& q) {
  std::array<std::size_t, kActions> levels{};
  for (std::size_t k = 0; k < kActions; ++k) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < q.levels(); ++l) {
      if (q.at(l, k) > q.at(best, k)) best = l;
    }
    levels[k] = best + 1;
  }
  return decode_all(levels, q.levels());
}

Reward compute_reward(double score, double mse_value, double alpha) {
  if (!(mse_value >= 0.0)) throw InvalidArgument("compute_reward: mse must be nonnegative");
  return {score - alpha * mse_value, score, mse_value};
}

double value_loss(double v, double r) { return (v - r) * (v - r) / 2.0; }

double column_entropy(const PolicyMatrix& q, std::size_t k) {
  double h = 0;
  for (std::size_t l = 0; l < q.levels(); ++l) {
    const double p = q.at(l, k);
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

double policy_loss(const PolicyMatrix& q, std::span<const std::size_t> levels, double r, double v,
                   double beta) {
  if (levels.size() != kActions) throw InvalidArgument("policy_loss: need one level per filter");
  const double advantage = r - v;
  double loss = 0;
  for (std::size_t k = 0; k < kActions; ++k) {
    if (levels[k] < 1 || levels[k] > q.levels()) {
      throw InvalidArgument("policy_loss: level out of range");
    }
    loss += -std::log(q.at(levels[k] - 1, k)) * advantage - beta * column_entropy(q, k);
  }
  return loss;
}

template <class T>
AgentLoss<T> agent_loss(nn::Graph<T>& graph, const AgentOutput<T>& out,
                        std::span<const std::size_t> levels, std::span<const double> rewards,
                        double beta) {
  const std::size_t n = out.value.dim(0);
  const std::size_t l = out.log_q.dim(1);
  const std::size_t k = out.log_q.dim(2);
  if (rewards.size() != n || levels.size() != n * k) {
    throw InvalidArgument("agent_loss: batch size mismatch");
  }
  std::vector<std::size_t> index(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || levels[i] > l) throw InvalidArgument("agent_loss: level out of range");
    index[i] = levels[i] - 1;
  }
  const T inv_n = T(1) / static_cast<T>(n);
  std::vector<T> weights(n * k);
  std::vector<T> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double advantage = rewards[i] - static_cast<double>(out.value.values()[i]);
    for (std::size_t c = 0; c < k; ++c) weights[i * k + c] = static_cast<T>(-advantage) * inv_n;
    targets[i] = static_cast<T>(rewards[i]);
  }
  auto picked = graph.pick(out.log_q, index);
  auto pg = graph.sum(graph.mul_const(picked, weights));
  auto neg_entropy = graph.scale(graph.sum(graph.mul(out.q, out.log_q)), static_cast<T>(beta) * inv_n);
  auto target = nn::Tensor<T>::from({n, 1}, std::move(targets));
  auto vl = graph.scale(graph.sum(graph.square(graph.sub(out.value, target))), T(0.5) * inv_n);
  auto policy = graph.add(pg, neg_entropy);
  AgentLoss<T> result;
  result.total = graph.add(policy, vl);
  result.value_loss = vl.item();
  result.policy_loss = policy.item();
  return result;
}

template class AgentNet<float>;
template class AgentNet<double>;
template AgentLoss<float> agent_loss<float>(nn::Graph<float>&, const AgentOutput<float>&,
                                            std::span<const std::size_t>, std::span<const double>,
                                            double);
template AgentLoss<double> agent_loss<double>(nn::Graph<double>&, const AgentOutput<double>&,
                                              std::span<const std::size_t>,
                                              std::span<const double>, double);

}  // namespace retouch::agent
