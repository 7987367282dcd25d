#include "retouch/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "retouch/common/error.hpp"
#include "retouch/filters/filters.hpp"
#include "retouch/image/metrics.hpp"
#include "retouch/simd/kernels.hpp"

namespace retouch::train {
namespace {

void require_model(const nn::Checkpoint& ckpt) {
  if (ckpt.get("format") != "retouch-model") {
    throw InvalidArgument("not a retouch model checkpoint (format '" + ckpt.get("format") + "')");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    TrainConfig scratch;
    try {
      set_config_value(scratch, "levels", item);
    } catch (const InvalidArgument&) {
      throw InvalidArgument("checkpoint header " + key + ": malformed list '" + text + "'");
    }
    out.push_back(scratch.levels);
  }
  if (out.empty()) throw InvalidArgument("checkpoint header " + key + " is empty");
  return out;
}

std::size_t get_size(const nn::Checkpoint& ckpt, const std::string& key) {
  return split_sizes(key, ckpt.get(key)).at(0);
}

double get_double(const nn::Checkpoint& ckpt, const std::string& key) {
  const std::string& text = ckpt.get(key);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw InvalidArgument("checkpoint header " + key + ": malformed number '" + text + "'");
  }
  return v;
}

template <class T>
void export_adam(const nn::AdamState<T>& opt, const nn::ParamSet<T>& params,
                 const std::string& prefix, nn::Checkpoint& ckpt) {
  ckpt.set(prefix + ".t", std::to_string(opt.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params.tensor(i).shape();
    ckpt.arrays.push_back({prefix + ".m/" + params.name(i), shape,
                           std::vector<float>(opt.m[i].begin(), opt.m[i].end())});
    ckpt.arrays.push_back({prefix + ".v/" + params.name(i), shape,
                           std::vector<float>(opt.v[i].begin(), opt.v[i].end())});
  }
}

template <class T>
void import_adam(nn::AdamState<T>& opt, const nn::ParamSet<T>& params, const std::string& prefix,
                 const nn::Checkpoint& ckpt) {
  opt.t = get_size(ckpt, prefix + ".t");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = ckpt.array(prefix + ".m/" + params.name(i));
    const auto& v = ckpt.array(prefix + ".v/" + params.name(i));
    if (m.shape != params.tensor(i).shape() || v.shape != params.tensor(i).shape()) {
      throw InvalidArgument("checkpoint optimizer moments for " + params.name(i) +
                            " have the wrong shape");
    }
    opt.m[i].assign(m.values.begin(), m.values.end());
    opt.v[i].assign(v.values.begin(), v.values.end());
  }
}

void check_state(const image::Image& img) {
  if (img.width() != kTrainSize || img.height() != kTrainSize) {
    throw InvalidArgument("training images must be " + std::to_string(kTrainSize) + "x" +
                          std::to_string(kTrainSize) + ", got " + std::to_string(img.width()) +
                          "x" + std::to_string(img.height()));
  }
}

agent::AgentArch default_agent_arch(const TrainConfig& config) {
  agent::AgentArch arch;
  arch.input_size = kTrainSize;
  arch.levels = config.levels;
  return arch;
}

critic::CriticArch default_critic_arch() {
  critic::CriticArch arch;
  arch.input_size = kTrainSize;
  return arch;
}

TrainConfig validated(TrainConfig config) {
  config.validate();
  return config;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, Dataset data)
    : config_(validated(config)),
      data_(std::move(data)),
      rng_(config.seed),
      agent_(default_agent_arch(config_), rng_),
      critic_(default_critic_arch(), rng_),
      agent_opt_(nn::AdamState<float>::for_params(agent_.params(), config_.lr)),
      critic_opt_(nn::AdamState<float>::for_params(critic_.params(), config_.lr)),
      buffer_(config_.replay_capacity) {
  data_.validate(kTrainSize);
}

Trainer::Trainer(const nn::Checkpoint& ckpt, Dataset data)
    : config_(config_from(ckpt)),
      data_(std::move(data)),
      rng_(0),
      agent_(agent_arch_from(ckpt), rng_),
      critic_(critic_arch_from(ckpt), rng_),
      agent_opt_(nn::AdamState<float>::for_params(agent_.params(), config_.lr)),
      critic_opt_(nn::AdamState<float>::for_params(critic_.params(), config_.lr)),
      buffer_(config_.replay_capacity) {
  data_.validate(kTrainSize);
  agent_.import_from(ckpt);
  critic_.import_from(ckpt);
  for (auto* opt : {&agent_opt_, &critic_opt_}) {
    opt->beta1 = get_double(ckpt, "adam.beta1");
    opt->beta2 = get_double(ckpt, "adam.beta2");
    opt->eps = get_double(ckpt, "adam.eps");
  }
  import_adam(agent_opt_, agent_.params(), "adam.agent", ckpt);
  import_adam(critic_opt_, critic_.params(), "adam.critic", ckpt);
  generator_steps_ = get_size(ckpt, "progress.generator_steps");
  critic_steps_ = get_size(ckpt, "progress.critic_steps");
  gp_.directions = ckpt.get("gp.directions") == "random" ? critic::GpDirections::Random
                                                         : critic::GpDirections::GradientAligned;
  gp_.random_probes = get_size(ckpt, "gp.random_probes");
  gp_.step = get_double(ckpt, "gp.step");
  rng_.set_state(ckpt.get("rng.state"));
}

void Trainer::check_finite(double v, const char* what) const {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " became non-finite at generator step " +
                       std::to_string(generator_steps_ + 1));
  }
}

GeneratorStats Trainer::generator_step() {
  std::vector<image::Image> states;
  states.reserve(config_.batch_size);
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    states.push_back(data_.source[rng_.below(data_.source.size())]);
  }
  return generator_step(states);
}

GeneratorStats Trainer::generator_step(std::span<const image::Image> states) {
  if (states.empty()) throw InvalidArgument("generator step needs at least one state");
  for (const auto& s : states) check_state(s);
  const std::size_t n = states.size();
  const std::size_t per = config_.levels * agent::kActions;
  try {
    nn::Graph<float> graph(nn::GradMode::Record);
    const auto out = agent_.forward(graph, critic::images_to_tensor<float>(states));
    std::vector<std::size_t> levels;
    levels.reserve(n * agent::kActions);
    std::vector<image::Image> edited;
    edited.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto q_values = out.q.values().subspan(i * per, per);
      const agent::PolicyMatrix q(config_.levels,
                                  std::vector<double>(q_values.begin(), q_values.end()));
      const auto sampled = agent::sample_action(q, rng_);
      levels.insert(levels.end(), sampled.levels.begin(), sampled.levels.end());
      edited.push_back(filters::apply_pipeline(states[i], sampled.action));
    }
    const auto scores = critic_.score_batch(edited);
    std::vector<double> rewards(n);
    GeneratorStats stats;
    for (std::size_t i = 0; i < n; ++i) {
      rewards[i] = agent::compute_reward(scores[i], image::mse(states[i], edited[i]), config_.alpha)
                       .value;
      stats.reward += rewards[i] / static_cast<double>(n);
    }
    const auto loss = agent::agent_loss<float>(graph, out, levels, rewards, config_.beta);
    stats.value_loss = loss.value_loss;
    stats.policy_loss = loss.policy_loss;
    check_finite(stats.reward, "reward");
    check_finite(loss.total.item(), "generator loss");
    agent_.params().zero_grad();
    graph.backward(loss.total);
    nn::adam_step(agent_opt_, agent_.params());
    for (auto& img : edited) buffer_.push(std::move(img));
    ++generator_steps_;
    return stats;
  } catch (const NumericError& e) {
    throw NumericError("generator step " + std::to_string(generator_steps_ + 1) + ": " + e.what());
  }
}

std::optional<double> Trainer::critic_step() {
  if (buffer_.empty()) {
    std::cerr << "warning: replay buffer is empty, skipping critic update\n";
    return std::nullopt;
  }
  std::vector<image::Image> reals, fakes;
  reals.reserve(config_.batch_size);
  fakes.reserve(config_.batch_size);
  for (std::size_t i = 0; i < config_.batch_size; ++i) {
    reals.push_back(data_.target[rng_.below(data_.target.size())]);
  }
  for (std::size_t i = 0; i < config_.batch_size; ++i) fakes.push_back(buffer_.sample(rng_));
  return critic_step(reals, fakes);
}

double Trainer::critic_step(std::span<const image::Image> reals,
                            std::span<const image::Image> fakes) {
  if (reals.empty() || reals.size() != fakes.size()) {
    throw InvalidArgument("critic step needs equal nonempty real and fake batches");
  }
  const std::size_t n = reals.size();
  std::vector<image::Image> both(reals.begin(), reals.end());
  both.insert(both.end(), fakes.begin(), fakes.end());
  for (const auto& img : both) check_state(img);
  std::vector<image::Image> mixed;
  mixed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    mixed.push_back(critic::interpolate(reals[i], fakes[i], rng_.uniform()));
  }
  try {
    nn::Graph<float> graph(nn::GradMode::Record);
    const auto scores = critic_.forward(graph, critic::images_to_tensor<float>(both));
    const auto real = graph.mean(graph.rows(scores, 0, n));
    const auto fake = graph.mean(graph.rows(scores, n, 2 * n));
    const critic::ScoreFn<float> score = [this](nn::Graph<float>& g, const nn::Tensor<float>& x) {
      return critic_.forward(g, x);
    };
    const auto z = critic::gradient_penalty_term<float>(
        graph, score, critic::images_to_tensor<float>(mixed), gp_, rng_);
    const auto loss =
        graph.add(graph.sub(fake, real), graph.scale(z, static_cast<float>(config_.lambda)));
    critic_.params().zero_grad();
    graph.backward(loss);
    nn::adam_step(critic_opt_, critic_.params());
    ++critic_steps_;
    return loss.item();
  } catch (const NumericError& e) {
    throw NumericError("critic step " + std::to_string(critic_steps_ + 1) + ": " + e.what());
  }
}

StepLog Trainer::train_step() {
  const auto gen = generator_step();
  StepLog log;
  log.step = generator_steps_;
  log.reward = gen.reward;
  log.value_loss = gen.value_loss;
  log.policy_loss = gen.policy_loss;
  std::size_t done = 0;
  for (std::size_t u = 0; u < config_.critic_updates; ++u) {
    if (const auto l = critic_step()) {
      log.critic_loss += *l;
      ++done;
    }
  }
  log.critic_loss = done ? log.critic_loss / static_cast<double>(done) : std::nan("");
  return log;
}

nn::Checkpoint Trainer::checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.set("format", "retouch-model");
  for (const auto& [key, value] : config_entries(config_)) ckpt.set("train." + key, value);
  const auto& a = agent_.arch();
  ckpt.set("agent.input_size", std::to_string(a.input_size));
  ckpt.set("agent.trunk_channels", join(a.trunk_channels));
  ckpt.set("agent.kernel", std::to_string(a.kernel));
  ckpt.set("agent.slope", format_double(a.slope));
  ckpt.set("agent.value_hidden", std::to_string(a.value_hidden));
  ckpt.set("agent.policy_channels", std::to_string(a.policy_channels));
  ckpt.set("agent.levels", std::to_string(a.levels));
  const auto& c = critic_.arch();
  ckpt.set("critic.input_size", std::to_string(c.input_size));
  ckpt.set("critic.channels", join(c.channels));
  ckpt.set("critic.kernel", std::to_string(c.kernel));
  ckpt.set("critic.slope", format_double(c.slope));
  ckpt.set("adam.beta1", format_double(agent_opt_.beta1));
  ckpt.set("adam.beta2", format_double(agent_opt_.beta2));
  ckpt.set("adam.eps", format_double(agent_opt_.eps));
  ckpt.set("gp.directions",
           gp_.directions == critic::GpDirections::Random ? "random" : "gradient-aligned");
  ckpt.set("gp.random_probes", std::to_string(gp_.random_probes));
  ckpt.set("gp.step", format_double(gp_.step));
  ckpt.set("progress.generator_steps", std::to_string(generator_steps_));
  ckpt.set("progress.critic_steps", std::to_string(critic_steps_));
  ckpt.set("simd", simd::isa_name(simd::active_isa()));
  ckpt.set("rng.state", rng_.state());
  agent_.export_to(ckpt);
  critic_.export_to(ckpt);
  export_adam(agent_opt_, agent_.params(), "adam.agent", ckpt);
  export_adam(critic_opt_, critic_.params(), "adam.critic", ckpt);
  return ckpt;
}

nn::Checkpoint run_training(const TrainConfig& config, Dataset data, const TrainingHooks& hooks) {
  Trainer trainer(config, std::move(data));
  for (std::size_t step = 1; step <= config.generator_steps; ++step) {
    const auto log = trainer.train_step();
    if (hooks.on_step) hooks.on_step(log);
    if (config.checkpoint_every && !hooks.checkpoint_path.empty() &&
        step % config.checkpoint_every == 0 && step != config.generator_steps) {
      nn::save_checkpoint(trainer.checkpoint(), hooks.checkpoint_path);
    }
  }
  return trainer.checkpoint();
}

agent::AgentArch agent_arch_from(const nn::Checkpoint& ckpt) {
  require_model(ckpt);
  agent::AgentArch arch;
  arch.input_size = get_size(ckpt, "agent.input_size");
  arch.trunk_channels = split_sizes("agent.trunk_channels", ckpt.get("agent.trunk_channels"));
  arch.kernel = get_size(ckpt, "agent.kernel");
  arch.slope = get_double(ckpt, "agent.slope");
  arch.value_hidden = get_size(ckpt, "agent.value_hidden");
  arch.policy_channels = get_size(ckpt, "agent.policy_channels");
  arch.levels = get_size(ckpt, "agent.levels");
  return arch;
}

critic::CriticArch critic_arch_from(const nn::Checkpoint& ckpt) {
  require_model(ckpt);
  critic::CriticArch arch;
  arch.input_size = get_size(ckpt, "critic.input_size");
  arch.channels = split_sizes("critic.channels", ckpt.get("critic.channels"));
  arch.kernel = get_size(ckpt, "critic.kernel");
  arch.slope = get_double(ckpt, "critic.slope");
  return arch;
}

agent::AgentNet<float> load_agent(const nn::Checkpoint& ckpt) {
  Rng scratch(0);
  agent::AgentNet<float> net(agent_arch_from(ckpt), scratch);
  net.import_from(ckpt);
  return net;
}

critic::CriticNet<float> load_critic(const nn::Checkpoint& ckpt) {
  Rng scratch(0);
  critic::CriticNet<float> net(critic_arch_from(ckpt), scratch);
  net.import_from(ckpt);
  return net;
}

TrainConfig config_from(const nn::Checkpoint& ckpt) {
  require_model(ckpt);
  TrainConfig config;
  for (const auto& [key, value] : config_entries(config)) {
    set_config_value(config, key, ckpt.get("train." + key));
  }
  config.validate();
  return config;
}

}  // namespace retouch::train
