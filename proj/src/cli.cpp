#include "dmrl/cli.hpp"

#include <iomanip>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "dmrl/checkpoint.hpp"
#include "dmrl/config.hpp"
#include "dmrl/eval.hpp"
#include "dmrl/oracles.hpp"
#include "dmrl/trainer.hpp"

namespace dmrl {

namespace {

const std::set<std::string> kModes{"dmrl", "mf", "mb", "eval-static", "eval-sine", "selftest"};

void print_summary(std::ostream& out, const std::string& label, double ret, int batches,
                   std::uint64_t env_batches) {
  out << std::left << std::setw(12) << label << std::right << std::setw(16) << std::setprecision(6)
      << ret << std::setw(12) << batches << std::setw(14) << env_batches << '\n';
}

void print_summary_header(std::ostream& out) {
  out << std::left << std::setw(12) << "run" << std::right << std::setw(16) << "return_mean"
      << std::setw(12) << "batches" << std::setw(14) << "env_batches" << '\n';
}

int train_mode(const RunConfig& cfg, std::ostream& out) {
  const TrainResult result = cfg.mode == "dmrl" ? train_dmrl(cfg.hp, cfg.seed)
                             : cfg.mode == "mf"   ? train_mf_baseline(cfg.hp, cfg.seed)
                                                  : train_mb_baseline(cfg.hp, cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / ("trace_" + cfg.mode + ".csv"), trace_csv(result.trace));

  std::optional<Checkpoint> primary;
  if (cfg.mode != "mb") {
    const auto ckpt = to_checkpoint(result.policy);
    save_checkpoint(cfg.out_dir / "policy.json", ckpt);
    primary = ckpt;
  }
  if (result.model) {
    const auto ckpt = to_checkpoint(*result.model);
    save_checkpoint(cfg.out_dir / "dynamics.json", ckpt);
    if (!primary) primary = ckpt;
  }
  if (cfg.checkpoint) save_checkpoint(*cfg.checkpoint, *primary);

  const auto s = summarize(result.trace, cfg.hp.return_window, cfg.hp.return_tol);
  print_summary_header(out);
  print_summary(out, cfg.mode, s.return_after_convergence, s.iterations_to_converge * cfg.hp.meta_batch_size,
                s.env_batches_to_converge);
  if (result.switch_iteration >= 0) out << "phase switch at iteration " << result.switch_iteration << '\n';
  return kExitOk;
}

int eval_mode(const RunConfig& cfg, std::ostream& out) {
  const auto ckpt = load_checkpoint(*cfg.checkpoint);
  const Scenario scenario = cfg.mode == "eval-static" ? Scenario::static_wind : Scenario::sine;
  const EvalReport report = ckpt.kind == ArtifactKind::policy
                                ? eval_policy_adaptation(policy_from(ckpt), scenario, cfg.hp, cfg.seed)
                                : eval_model_adaptation(model_from(ckpt), scenario, cfg.hp, cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / ("eval_" + to_string(scenario) + ".csv"), eval_csv(report));
  print_summary_header(out);
  print_summary(out, to_string(scenario), report.return_after_convergence, report.batches_to_converge,
                static_cast<std::uint64_t>(report.batches_to_converge));
  out << "zero-shot mean " << report.mean.front() << ", final mean " << report.mean.back() << " over "
      << report.trials() << " trials\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double meta-reinforcement learning on a windy lander"};
  std::string mode;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string checkpoint;
  app.add_option("mode", mode, "dmrl | mf | mb | eval-static | eval-sine | selftest")->required();
  app.add_option("--config", config_path, "flat JSON configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--checkpoint", checkpoint, "checkpoint to write (training) or read (eval)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  if (!kModes.contains(mode)) {
    err << "unknown mode '" << mode << "'\n";
    return kExitUsage;
  }
  if (mode == "selftest") {
    return oracle::run_selftest(out) ? kExitOk : kExitFailure;
  }

  RunConfig cfg;
  cfg.mode = mode;
  if (config_path.empty()) {
    err << "--config is required for mode " << mode << '\n';
    return kExitUsage;
  }
  try {
    load_config_file(config_path, cfg);
  } catch (const FormatError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
  if (mode.starts_with("eval-") && !cfg.checkpoint) {
    err << "mode " << mode << " requires --checkpoint\n";
    return kExitUsage;
  }

  try {
    return mode.starts_with("eval-") ? eval_mode(cfg, out) : train_mode(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dmrl
