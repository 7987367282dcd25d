#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "retouch/cli/commands.hpp"
#include "retouch/common/error.hpp"
#include "retouch/common/files.hpp"
#include "retouch/image/io.hpp"
#include "retouch/image/metrics.hpp"
#include "retouch/image/resize.hpp"
#include "retouch/nn/checkpoint.hpp"
#include "retouch/train/dataset.hpp"
#include "retouch/train/trainer.hpp"

namespace retouch::cli {
namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string log_csv(const std::vector<train::StepLog>& rows) {
  std::ostringstream os;
  os << "step,reward,value_loss,policy_loss,critic_loss\n";
  for (const auto& r : rows) {
    os << r.step << ',' << fmt("%.9g", r.reward) << ',' << fmt("%.9g", r.value_loss) << ','
       << fmt("%.9g", r.policy_loss) << ',' << fmt("%.9g", r.critic_loss) << '\n';
  }
  return os.str();
}

void require_directory(const std::filesystem::path& dir, const char* role) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError(std::string(role) + " directory " + dir.string() + " does not exist");
  }
}

void require_writable_parent(const std::filesystem::path& out) {
  const auto parent = out.has_parent_path() ? out.parent_path() : std::filesystem::path(".");
  std::error_code ec;
  if (!std::filesystem::is_directory(parent, ec)) {
    throw IoError(out.string() + ": output directory " + parent.string() + " does not exist");
  }
}

agent::AgentNet<float> agent_from_file(const std::filesystem::path& ckpt) {
  return train::load_agent(nn::load_checkpoint(ckpt));
}

}  // namespace

filters::ActionVector choose_action(const agent::AgentNet<float>& agent, const image::Image& img) {
  const std::size_t s = agent.arch().input_size;
  const image::Image state =
      (img.width() == s && img.height() == s) ? img : image::resize_bicubic(img, s, s);
  return agent::greedy_action(agent.evaluate(state).q).action;
}

image::Image enhance(const agent::AgentNet<float>& agent, const image::Image& img,
                     filters::ActionVector* action) {
  const auto a = choose_action(agent, img);
  if (action) *action = a;
  return filters::apply_pipeline(img, a);
}

std::size_t cmd_train(const TrainArgs& args) {
  args.config.validate();
  require_directory(args.source, "source");
  require_directory(args.target, "target");
  require_writable_parent(args.out);
  const auto log_path = args.log.empty() ? std::filesystem::path(args.out.string() + ".log.csv")
                                         : args.log;
  require_writable_parent(log_path);
  auto data = train::load_dataset(args.source, args.target, train::kTrainSize);
  std::vector<train::StepLog> rows;
  train::TrainingHooks hooks;
  hooks.checkpoint_path = args.out;
  hooks.on_step = [&](const train::StepLog& log) {
    rows.push_back(log);
    if (args.config.checkpoint_every && log.step % args.config.checkpoint_every == 0) {
      write_file_atomic(log_path, log_csv(rows));
    }
  };
  const auto ckpt = train::run_training(args.config, std::move(data), hooks);
  nn::save_checkpoint(ckpt, args.out);
  write_file_atomic(log_path, log_csv(rows));
  return rows.size();
}

EnhanceResult cmd_enhance(const std::filesystem::path& ckpt, const std::filesystem::path& in,
                          const std::filesystem::path& out,
                          const std::optional<std::filesystem::path>& report) {
  const auto agent = agent_from_file(ckpt);
  const auto img = image::load_image(in);
  if (!image::is_supported_image(out)) {
    throw InvalidArgument(out.string() + ": output must end in .png or .ppm");
  }
  EnhanceResult result;
  result.output = out;
  const auto edited = enhance(agent, img, &result.action);
  result.report = filters::parameter_report(result.action);
  image::save_image(edited, out);
  if (report) write_file_atomic(*report, result.report);
  return result;
}

EvalResult cmd_eval(const std::filesystem::path& ckpt, const std::filesystem::path& in_dir,
                    const std::filesystem::path& ref_dir,
                    const std::optional<std::filesystem::path>& csv) {
  std::optional<agent::AgentNet<float>> agent;
  if (!ckpt.empty()) agent.emplace(agent_from_file(ckpt));
  require_directory(in_dir, "input");
  require_directory(ref_dir, "reference");
  std::map<std::string, std::filesystem::path> refs;
  for (const auto& p : train::list_images(ref_dir)) refs[p.filename().string()] = p;

  EvalResult result;
  for (const auto& path : train::list_images(in_dir)) {
    const auto name = path.filename().string();
    const auto it = refs.find(name);
    if (it == refs.end()) {
      result.unmatched.push_back(name);
      continue;
    }
    const auto input = image::load_image(path);
    const auto ref = image::load_image(it->second);
    if (!input.same_size(ref)) {
      throw InvalidArgument(name + ": input and reference sizes differ");
    }
    const auto output = agent ? enhance(*agent, input) : input;
    result.rows.push_back({name, image::psnr(output, ref), image::ssim(output, ref)});
  }
  if (result.rows.empty()) {
    throw InvalidArgument("no filenames in " + in_dir.string() + " match " + ref_dir.string());
  }
  for (const auto& r : result.rows) {
    result.mean_psnr += r.psnr / static_cast<double>(result.rows.size());
    result.mean_ssim += r.ssim / static_cast<double>(result.rows.size());
  }
  if (csv) {
    std::ostringstream os;
    os << "file,psnr,ssim\n";
    for (const auto& r : result.rows) {
      os << r.name << ',' << fmt("%.6f", r.psnr) << ',' << fmt("%.6f", r.ssim) << '\n';
    }
    write_file_atomic(*csv, os.str());
  }
  return result;
}

std::string cmd_export_params(const std::filesystem::path& ckpt, const std::filesystem::path& in) {
  const auto agent = agent_from_file(ckpt);
  return filters::parameter_report(choose_action(agent, image::load_image(in)));
}

int run(int argc, char** argv) {
  CLI::App app{"Unpaired photo enhancement with a learned filter policy"};
  app.require_subcommand(1);

  TrainArgs targs;
  std::string source, target, out, log, config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from unpaired image folders");
  train_cmd->add_option("--source", source, "Folder of original images")->required();
  train_cmd->add_option("--target", target, "Folder of images with the desired look")->required();
  train_cmd->add_option("--out", out, "Checkpoint to write")->required();
  train_cmd->add_option("--log", log, "Per-step CSV log (default: <out>.log.csv)");
  train_cmd->add_option("--config", config_path, "key = value configuration file");
  train::TrainConfig flags;
  std::vector<std::pair<std::string, CLI::Option*>> overrides = {
      {"lambda", train_cmd->add_option("--lambda", flags.lambda, "Gradient penalty weight")},
      {"alpha", train_cmd->add_option("--alpha", flags.alpha, "Content weight in the reward")},
      {"beta", train_cmd->add_option("--beta", flags.beta, "Entropy weight")},
      {"levels", train_cmd->add_option("--levels", flags.levels, "Discrete steps per filter")},
      {"critic_updates",
       train_cmd->add_option("--critic-updates", flags.critic_updates,
                             "Critic updates per generator update")},
      {"lr", train_cmd->add_option("--lr", flags.lr, "Adam learning rate")},
      {"batch_size", train_cmd->add_option("--batch-size", flags.batch_size, "Batch size")},
      {"generator_steps",
       train_cmd->add_option("--steps", flags.generator_steps, "Generator updates")},
      {"replay_capacity",
       train_cmd->add_option("--replay-capacity", flags.replay_capacity, "Replay buffer size")},
      {"seed", train_cmd->add_option("--seed", flags.seed, "Random seed")},
      {"checkpoint_every",
       train_cmd->add_option("--checkpoint-every", flags.checkpoint_every,
                             "Save the checkpoint every N steps (0: only at the end)")},
  };

  std::string ckpt, in, report, ref, csv;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance one image at full resolution");
  enhance_cmd->add_option("--ckpt", ckpt, "Trained checkpoint")->required();
  enhance_cmd->add_option("--in", in, "Input image (PNG or PPM)")->required();
  enhance_cmd->add_option("--out", out, "Output image (.png or .ppm)")->required();
  enhance_cmd->add_option("--report", report, "Write the chosen filter parameters here");

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of enhanced images against references");
  auto* eval_ckpt = eval_cmd->add_option("--ckpt", ckpt, "Trained checkpoint");
  bool identity = false;
  auto* eval_identity =
      eval_cmd->add_flag("--identity", identity, "Score the unedited inputs (baseline)");
  eval_ckpt->excludes(eval_identity);
  eval_cmd->add_option("--in", in, "Folder of input images")->required();
  eval_cmd->add_option("--ref", ref, "Folder of same-named reference images")->required();
  eval_cmd->add_option("--csv", csv, "Write per-image metrics as CSV");

  auto* export_cmd = app.add_subcommand("export-params", "Print the filter parameters for an image");
  export_cmd->add_option("--ckpt", ckpt, "Trained checkpoint")->required();
  export_cmd->add_option("--in", in, "Input image")->required();
  export_cmd->add_option("--out", out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) {
      train::TrainConfig config;
      if (!config_path.empty()) config = train::load_config(config_path, config);
      if (const auto seed = train::seed_from_env()) config.seed = *seed;
      const auto entries = train::config_entries(flags);
      for (const auto& [key, option] : overrides) {
        if (option->count() == 0) continue;
        for (const auto& [k, v] : entries) {
          if (k == key) train::set_config_value(config, k, v);
        }
      }
      targs.source = source;
      targs.target = target;
      targs.out = out;
      targs.log = log;
      targs.config = config;
      const auto rows = cmd_train(targs);
      std::cout << "trained " << rows << " generator steps, checkpoint written to " << out << '\n';
    } else if (*enhance_cmd) {
      std::optional<std::filesystem::path> report_path;
      if (!report.empty()) report_path = report;
      const auto result = cmd_enhance(ckpt, in, out, report_path);
      std::cout << result.report;
    } else if (*eval_cmd) {
      if (ckpt.empty() && !identity) {
        throw InvalidArgument("eval needs --ckpt, or --identity for the unedited baseline");
      }
      std::optional<std::filesystem::path> csv_path;
      if (!csv.empty()) csv_path = csv;
      const auto result = cmd_eval(ckpt, in, ref, csv_path);
      for (const auto& name : result.unmatched) {
        std::cerr << "warning: no reference for " << name << ", skipped\n";
      }
      std::cout << "file,psnr,ssim\n";
      for (const auto& r : result.rows) {
        std::cout << r.name << ',' << fmt("%.4f", r.psnr) << ',' << fmt("%.4f", r.ssim) << '\n';
      }
      std::cout << "mean," << fmt("%.4f", result.mean_psnr) << ',' << fmt("%.4f", result.mean_ssim)
                << '\n';
    } else if (*export_cmd) {
      const auto text = cmd_export_params(ckpt, in);
      if (out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(out, text);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace retouch::cli
