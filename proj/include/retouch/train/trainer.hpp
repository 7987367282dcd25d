#pragma once

// Alternating adversarial training: each iteration is one generator (agent)
// update followed by `critic_updates` critic updates on replayed images.
// Every random draw (initialization, batch sampling, actions, interpolation
// weights, penalty probes, replay sampling) comes from one seeded generator,
// so a run is reproducible bit for bit on a given SIMD path.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "retouch/agent/agent.hpp"
#include "retouch/common/rng.hpp"
#include "retouch/critic/critic.hpp"
#include "retouch/nn/adam.hpp"
#include "retouch/nn/checkpoint.hpp"
#include "retouch/train/config.hpp"
#include "retouch/train/dataset.hpp"

namespace retouch::train {

/// Side length of training states and critic inputs.
inline constexpr std::size_t kTrainSize = 64;

struct GeneratorStats {
  double reward = 0;       ///< batch mean
  double value_loss = 0;   ///< batch mean
  double policy_loss = 0;  ///< batch mean, entropy term included
};

struct StepLog {
  std::size_t step = 0;  ///< 1-based generator step
  double reward = 0;
  double value_loss = 0;
  double policy_loss = 0;
  double critic_loss = 0;  ///< mean over the critic updates of this step
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, Dataset data);
  /// Resumes from a training checkpoint: weights, optimizer moments, step
  /// counters and generator state. The replay buffer starts empty.
  Trainer(const nn::Checkpoint& ckpt, Dataset data);

  const TrainConfig& config() const { return config_; }
  agent::AgentNet<float>& agent() { return agent_; }
  critic::CriticNet<float>& critic() { return critic_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  Rng& rng() { return rng_; }
  const Dataset& data() const { return data_; }
  critic::GpOptions& gp_options() { return gp_; }
  std::size_t generator_steps_done() const { return generator_steps_; }
  std::size_t critic_steps_done() const { return critic_steps_; }

  /// One A2C update on `batch_size` source images drawn with replacement.
  GeneratorStats generator_step();
  /// One A2C update on the given 64x64 states; edited images enter the buffer.
  GeneratorStats generator_step(std::span<const image::Image> states);

  /// One critic update on target reals and replayed fakes. Returns nullopt
  /// (and does nothing) when the buffer is empty.
  std::optional<double> critic_step();
  /// One critic update on explicit equal-size batches.
  double critic_step(std::span<const image::Image> reals, std::span<const image::Image> fakes);

  /// One generator step followed by `critic_updates` critic steps.
  StepLog train_step();

  nn::Checkpoint checkpoint() const;

 private:
  void check_finite(double v, const char* what) const;

  TrainConfig config_;
  Dataset data_;
  Rng rng_;
  agent::AgentNet<float> agent_;
  critic::CriticNet<float> critic_;
  nn::AdamState<float> agent_opt_;
  nn::AdamState<float> critic_opt_;
  ReplayBuffer buffer_;
  critic::GpOptions gp_;
  std::size_t generator_steps_ = 0;
  std::size_t critic_steps_ = 0;
};

struct TrainingHooks {
  std::function<void(const StepLog&)> on_step;
  /// Destination for periodic checkpoints (config.checkpoint_every); empty disables.
  std::filesystem::path checkpoint_path;
};

/// Runs config.generator_steps training iterations and returns the final checkpoint.
nn::Checkpoint run_training(const TrainConfig& config, Dataset data,
                            const TrainingHooks& hooks = {});

/// Network architectures recorded in a checkpoint header.
agent::AgentArch agent_arch_from(const nn::Checkpoint& ckpt);
critic::CriticArch critic_arch_from(const nn::Checkpoint& ckpt);

/// Rebuilds the agent stored in a checkpoint.
agent::AgentNet<float> load_agent(const nn::Checkpoint& ckpt);
critic::CriticNet<float> load_critic(const nn::Checkpoint& ckpt);

/// Training configuration recorded in a checkpoint header.
TrainConfig config_from(const nn::Checkpoint& ckpt);

}  // namespace retouch::train
