#include "retouch/train/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "retouch/common/error.hpp"

namespace retouch::train {
namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw InvalidArgument("config " + std::string(key) + ": expected a nonnegative integer, got '" +
                          std::string(text) + "'");
  }
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw InvalidArgument("config " + std::string(key) + ": expected a number, got '" + s + "'");
  }
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw InvalidArgument(std::string("config ") + name + " must be positive");
  };
  positive(lambda, "lambda");
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(lr, "lr");
  if (levels < 2) throw InvalidArgument("config levels must be at least 2");
  if (critic_updates < 1) throw InvalidArgument("config critic_updates must be at least 1");
  if (batch_size < 1) throw InvalidArgument("config batch_size must be at least 1");
  if (replay_capacity < batch_size) {
    throw InvalidArgument("config replay_capacity must be at least batch_size");
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  return {
      {"lambda", format_double(c.lambda)},
      {"alpha", format_double(c.alpha)},
      {"beta", format_double(c.beta)},
      {"levels", std::to_string(c.levels)},
      {"critic_updates", std::to_string(c.critic_updates)},
      {"lr", format_double(c.lr)},
      {"batch_size", std::to_string(c.batch_size)},
      {"generator_steps", std::to_string(c.generator_steps)},
      {"replay_capacity", std::to_string(c.replay_capacity)},
      {"seed", std::to_string(c.seed)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
  };
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "beta") c.beta = parse_double(key, value);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "levels") c.levels = parse_unsigned(key, value);
  else if (key == "critic_updates") c.critic_updates = parse_unsigned(key, value);
  else if (key == "batch_size") c.batch_size = parse_unsigned(key, value);
  else if (key == "generator_steps") c.generator_steps = parse_unsigned(key, value);
  else if (key == "replay_capacity") c.replay_capacity = parse_unsigned(key, value);
  else if (key == "seed") c.seed = parse_unsigned(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_unsigned(key, value);
  else throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), base);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* env = std::getenv("RETOUCH_SEED");
  if (env == nullptr) return std::nullopt;
  return parse_unsigned("RETOUCH_SEED", trim(env));
}

}  // namespace retouch::train
