#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace retouch::train {

struct TrainConfig {
  double lambda = 10.0;             ///< gradient penalty weight
  double alpha = 100.0;             ///< content (MSE) weight in the reward
  double beta = 0.001;              ///< entropy bonus weight
  std::size_t levels = 33;          ///< discrete steps per filter
  std::size_t critic_updates = 5;   ///< critic steps per generator step
  double lr = 1e-4;
  std::size_t batch_size = 8;
  std::size_t generator_steps = 2000;
  std::size_t replay_capacity = 2048;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  ///< 0 disables periodic checkpoints

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Every field as (key, text) in a fixed order. Doubles are written with
/// enough digits to round-trip exactly.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);

/// Sets one field from text; unknown keys and malformed values throw.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);

/// Flat "key = value" lines; blank lines and lines starting with '#' are ignored.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Seed from the RETOUCH_SEED environment variable, when set.
std::optional<std::uint64_t> seed_from_env();

}  // namespace retouch::train
