#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "retouch/agent/agent.hpp"
#include "retouch/filters/filters.hpp"
#include "retouch/image/image.hpp"
#include "retouch/train/config.hpp"

namespace retouch::cli {

/// Greedy action chosen on a 64x64 copy of `img`.
filters::ActionVector choose_action(const agent::AgentNet<float>& agent, const image::Image& img);

/// Chooses the action at 64x64 and applies it to `img` at its own resolution.
image::Image enhance(const agent::AgentNet<float>& agent, const image::Image& img,
                     filters::ActionVector* action = nullptr);

struct TrainArgs {
  std::filesystem::path source;
  std::filesystem::path target;
  std::filesystem::path out;
  std::filesystem::path log;  ///< empty: <out>.log.csv
  train::TrainConfig config;
};

/// Trains and writes the checkpoint plus a per-step CSV log. Returns the number of log rows.
std::size_t cmd_train(const TrainArgs& args);

struct EnhanceResult {
  std::filesystem::path output;
  filters::ActionVector action;
  std::string report;
};

EnhanceResult cmd_enhance(const std::filesystem::path& ckpt, const std::filesystem::path& in,
                          const std::filesystem::path& out,
                          const std::optional<std::filesystem::path>& report = std::nullopt);

struct EvalRow {
  std::string name;
  double psnr = 0;
  double ssim = 0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  std::vector<std::string> unmatched;
  double mean_psnr = 0;
  double mean_ssim = 0;
};

/// Enhances every image in `in_dir` (or leaves it untouched when `ckpt` is
/// empty) and scores it against the same-named file in `ref_dir`.
EvalResult cmd_eval(const std::filesystem::path& ckpt, const std::filesystem::path& in_dir,
                    const std::filesystem::path& ref_dir,
                    const std::optional<std::filesystem::path>& csv = std::nullopt);

/// Parameter report of the action the checkpoint picks for `in`.
std::string cmd_export_params(const std::filesystem::path& ckpt, const std::filesystem::path& in);

/// Full command-line entry point; returns the process exit status.
int run(int argc, char** argv);

}  // namespace retouch::cli
