#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "dmrl/checkpoint.hpp"
#include "dmrl/cli.hpp"
#include "dmrl/config.hpp"
#include "dmrl/eval.hpp"

using namespace dmrl;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("dmrl_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dmrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig = R"({
  "meta_batch_size": 2, "max_rollout_len": 15, "n_iterations": 4, "switch_iteration": 2,
  "n_candidate": 10, "mpc_horizon": 3, "mc_trials": 3, "adaptation_budget": 4,
  "adaptation_batch": 2, "policy_inner_lr": 0.01, "model_inner_lr": 0.05
})";

// Strips the trailing wall_ms column.
std::string without_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

Hyperparams eval_hp() {
  Hyperparams hp;
  hp.max_rollout_len = 30;
  hp.mc_trials = 4;
  hp.adaptation_budget = 9;
  hp.adaptation_batch = 2;
  hp.policy_inner_lr = 0.02;
  hp.n_candidate = 10;
  hp.mpc_horizon = 3;
  return hp;
}

}  // namespace

TEST(Checkpoint, RealFormattingRoundTripsEdgeValues) {
  const double values[] = {0.0,
                           -0.0,
                           1.0 / 3.0,
                           -2.5e-300,
                           std::numeric_limits<double>::denorm_min(),
                           -std::numeric_limits<double>::denorm_min() * 12345,
                           std::numeric_limits<double>::min() / 3.0,
                           std::numeric_limits<double>::max(),
                           std::numeric_limits<double>::lowest()};
  for (const double v : values) {
    const double back = parse_real(format_real(v));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back), std::bit_cast<std::uint64_t>(v)) << format_real(v);
  }
  EXPECT_THROW(parse_real("1.5x"), FormatError);
  EXPECT_THROW(parse_real(""), FormatError);
}

TEST(Checkpoint, PolicyRoundTripIsBitExact) {
  TempDir dir;
  Rng rng(1);
  Policy policy = Policy::initialize(rng);
  ParamVector params = policy.params();
  params.values()[0] = std::numeric_limits<double>::denorm_min();
  params.values()[1] = -std::numeric_limits<double>::denorm_min() * 7;
  params.values()[2] = -0.0;
  policy = policy.with_params(params);
  save_checkpoint(dir / "p.json", to_checkpoint(policy));
  const auto loaded = load_checkpoint(dir / "p.json", ArtifactKind::policy, policy_spec());
  EXPECT_EQ(loaded.kind, ArtifactKind::policy);
  EXPECT_EQ(loaded.spec, policy.spec());
  const auto a = policy.params().values();
  const auto b = loaded.params.values();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i])) << i;
  }
}

TEST(Checkpoint, DynamicsRoundTripKeepsNormalizer) {
  Rng rng(2);
  const auto model = DynamicsModel::initialize(rng);
  Normalizer norm = Normalizer::identity();
  for (std::size_t i = 0; i < norm.mean.size(); ++i) {
    norm.mean[i] = rng.uniform(-1, 1);
    norm.stddev[i] = rng.uniform(0.1, 2);
  }
  const auto with = model.with_normalizer(norm);
  const auto back = model_from(parse_checkpoint(serialize_checkpoint(to_checkpoint(with))));
  EXPECT_EQ(back.params(), with.params());
  EXPECT_EQ(back.normalizer(), with.normalizer());
}

TEST(Checkpoint, EnvelopeFields) {
  Rng rng(3);
  const auto text = serialize_checkpoint(to_checkpoint(Policy::initialize(rng)));
  for (const char* key : {"\"format_version\"", "\"kind\"", "\"spec\"", "\"dims\"", "\"activations\"",
                          "\"params\"", "\"normalization\"", "\"mean\"", "\"std\""}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
}

TEST(Checkpoint, TruncatedOrMalformedRejected) {
  TempDir dir;
  Rng rng(4);
  const auto text = serialize_checkpoint(to_checkpoint(Policy::initialize(rng)));
  for (const std::size_t cut : {std::size_t{0}, std::size_t{1}, text.size() / 2, text.size() - 2}) {
    write_file(dir / "t.json", text.substr(0, cut));
    EXPECT_THROW(load_checkpoint(dir / "t.json"), FormatError) << cut;
  }
  EXPECT_THROW(load_checkpoint(dir / "missing.json"), FormatError);
  const auto bumped = std::regex_replace(text, std::regex("\"format_version\":\\s*1"), "\"format_version\": 2");
  ASSERT_NE(bumped, text);
  EXPECT_THROW(parse_checkpoint(bumped), FormatError);
}

TEST(Checkpoint, SpecOrKindMismatchRejected) {
  TempDir dir;
  Rng rng(5);
  save_checkpoint(dir / "p.json", to_checkpoint(Policy::initialize(rng)));
  EXPECT_THROW(load_checkpoint(dir / "p.json", ArtifactKind::dynamics, policy_spec()), FormatError);
  MlpSpec other = policy_spec();
  other.hidden[0].width = 32;
  EXPECT_THROW(load_checkpoint(dir / "p.json", ArtifactKind::policy, other), FormatError);
  EXPECT_NO_THROW(load_checkpoint(dir / "p.json", ArtifactKind::policy, policy_spec()));
}

TEST(Config, FlatJsonApplied) {
  RunConfig cfg;
  apply_config_json(R"({"meta_batch_size": 7, "gamma": 0.9, "per_step_baseline": true, "seed": 42})", cfg);
  EXPECT_EQ(cfg.hp.meta_batch_size, 7);
  EXPECT_EQ(cfg.hp.gamma, 0.9);
  EXPECT_TRUE(cfg.hp.per_step_baseline);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.hp.n_candidate, Hyperparams{}.n_candidate);
}

TEST(Config, BadDocumentsRejected) {
  RunConfig cfg;
  EXPECT_THROW(apply_config_json(R"({"meta_batch_sise": 7})", cfg), FormatError);
  EXPECT_THROW(apply_config_json(R"({"meta_batch_size": "7"})", cfg), FormatError);
  EXPECT_THROW(apply_config_json(R"({"meta_batch_size": 2.5})", cfg), FormatError);
  EXPECT_THROW(apply_config_json(R"({"nested": {"a": 1}})", cfg), FormatError);
  EXPECT_THROW(apply_config_json(R"([1, 2])", cfg), FormatError);
  EXPECT_THROW(apply_config_json(R"({"meta_batch_size": 7)", cfg), FormatError);
}

TEST(Config, EveryHyperparameterIsAKey) {
  RunConfig cfg;
  EXPECT_NO_THROW(apply_config_json(hyperparams_to_json(Hyperparams{}), cfg));
  EXPECT_GE(hyperparam_names().size(), 20u);
}

TEST(Csv, HeadersAndRows) {
  TrainRecord r;
  r.iteration = 3;
  r.phase = Phase::two;
  r.mean_return = -1.5;
  r.model_val_loss = 0.25;
  r.env_batches = 10;
  r.sim_batches = 4;
  r.wall_ms = 2.0;
  EXPECT_EQ(trace_csv({r}),
            "iteration,phase,mean_return,model_val_loss,env_batches,sim_batches,wall_ms\n"
            "3,2,-1.5,0.25,10,4,2\n");
  EvalReport rep;
  rep.scenario = Scenario::sine;
  rep.returns = {{1.0, 2.0}};
  EXPECT_EQ(eval_csv(rep), "trial,rollout_index,return,scenario\n0,0,1,sine\n0,1,2,sine\n");
}

TEST(Eval, AccountingAndShape) {
  const Hyperparams hp = eval_hp();
  Rng rng(6);
  const auto policy = Policy::initialize(rng);
  for (const Scenario s : {Scenario::static_wind, Scenario::sine}) {
    const auto rep = eval_policy_adaptation(policy, s, hp, 7);
    EXPECT_EQ(rep.trials(), hp.mc_trials);
    EXPECT_EQ(rep.steps(), 5);  // 2+2+2+2+1
    EXPECT_EQ(rep.env_rollouts, static_cast<std::uint64_t>(hp.adaptation_budget * hp.mc_trials));
    EXPECT_EQ(rep.mean.size(), 5u);
    EXPECT_EQ(rep.tasks.size(), static_cast<std::size_t>(hp.mc_trials));
    EXPECT_GE(rep.batches_to_converge, 1);
    EXPECT_LE(rep.batches_to_converge, rep.steps());
  }
}

TEST(Eval, BudgetOfOneBatchIsZeroShotOnly) {
  Hyperparams hp = eval_hp();
  hp.adaptation_budget = 2;
  Rng rng(8);
  const auto policy = Policy::initialize(rng);
  const auto rep = eval_policy_adaptation(policy, Scenario::static_wind, hp, 9);
  EXPECT_EQ(rep.steps(), 1);
  // Same as a run with no inner learning at all.
  Hyperparams frozen = eval_hp();
  frozen.policy_inner_lr = 0.0;
  const auto ref = eval_policy_adaptation(policy, Scenario::static_wind, frozen, 9);
  for (int t = 0; t < hp.mc_trials; ++t) EXPECT_EQ(rep.returns[t][0], ref.returns[t][0]);
}

TEST(Eval, CommonRandomNumbersWithoutLearningGiveFlatRows) {
  Hyperparams hp = eval_hp();
  hp.policy_inner_lr = 0.0;
  hp.adaptation_budget = 8;
  Rng rng(10);
  const auto rep = eval_policy_adaptation(Policy::initialize(rng), Scenario::sine, hp, 11);
  for (const auto& row : rep.returns) {
    for (double v : row) EXPECT_EQ(v, row.front());
  }
}

TEST(Eval, DeterministicAndSeedSensitive) {
  const Hyperparams hp = eval_hp();
  Rng rng(12);
  const auto policy = Policy::initialize(rng);
  const auto a = eval_csv(eval_policy_adaptation(policy, Scenario::static_wind, hp, 13));
  EXPECT_EQ(a, eval_csv(eval_policy_adaptation(policy, Scenario::static_wind, hp, 13)));
  EXPECT_NE(a, eval_csv(eval_policy_adaptation(policy, Scenario::static_wind, hp, 14)));
}

TEST(Eval, ModelAdaptationAccounting) {
  Hyperparams hp = eval_hp();
  hp.max_rollout_len = 10;
  hp.mc_trials = 2;
  hp.adaptation_budget = 4;
  Rng rng(15);
  const auto rep = eval_model_adaptation(DynamicsModel::initialize(rng), Scenario::sine, hp, 16);
  EXPECT_EQ(rep.trials(), 2);
  EXPECT_EQ(rep.steps(), 2);
  EXPECT_EQ(rep.env_rollouts, 8u);
}

TEST(Eval, InDistributionAdaptationStaysNearTrainingReturn) {
  // Small inner steps on a task drawn from the training law should leave the
  // return within sampling noise of the unadapted policy's return there.
  Hyperparams hp = eval_hp();
  hp.mc_trials = 10;
  hp.adaptation_budget = 12;
  hp.adaptation_batch = 4;
  hp.policy_inner_lr = 0.005;
  hp.eval_common_random_numbers = false;
  Rng rng(17);
  const auto policy = Policy::initialize(rng);
  const auto rep = eval_policy_adaptation(policy, Scenario::static_wind, hp, 18);
  std::vector<double> diffs;
  for (int t = 0; t < hp.mc_trials; ++t) {
    const WindyLander env(rep.tasks[t]);
    Rng fresh(1000 + t);
    std::vector<Trajectory> ref;
    for (int k = 0; k < 20; ++k) ref.push_back(rollout(env, policy.sampler(), fresh, hp.max_rollout_len));
    diffs.push_back(rep.returns[t].back() - mean_total_reward(ref));
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= diffs.size();
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  const double se = std::sqrt(var / (diffs.size() - 1) / diffs.size());
  EXPECT_LE(std::abs(mean), 4.0 * se + 1.0) << mean << " se " << se;
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  write_file(dir / "c.json", kTinyConfig);
  EXPECT_EQ(cli({"fly", "--config", (dir / "c.json").string()}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"dmrl"}).code, kExitUsage);
  EXPECT_EQ(cli({"dmrl", "--config", (dir / "nope.json").string()}).code, kExitUsage);
  EXPECT_EQ(cli({"eval-sine", "--config", (dir / "c.json").string()}).code, kExitUsage);
  EXPECT_EQ(cli({"dmrl", "--config", (dir / "c.json").string(), "--bogus"}).code, kExitUsage);
  write_file(dir / "bad.json", R"({"unknown_key": 1})");
  const auto r = cli({"mf", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("unknown_key"), std::string::npos);
}

TEST(Cli, MissingCheckpointIsRuntimeFailure) {
  TempDir dir;
  write_file(dir / "c.json", kTinyConfig);
  const auto r = cli({"eval-static", "--config", (dir / "c.json").string(), "--checkpoint",
                      (dir / "absent.json").string(), "--out", dir.path().string()});
  EXPECT_NE(r.code, kExitOk);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, TrainThenEvaluate) {
  TempDir dir;
  write_file(dir / "c.json", kTinyConfig);
  const auto out = dir / "run";
  const auto r = cli({"dmrl", "--config", (dir / "c.json").string(), "--seed", "3", "--out", out.string(),
                      "--checkpoint", (dir / "ckpt.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto trace = read_file(out / "trace_dmrl.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), kTraceHeader);
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(out / "policy.json"));
  EXPECT_TRUE(fs::exists(out / "dynamics.json"));
  EXPECT_NE(r.out.find("phase switch at iteration 2"), std::string::npos);

  const auto again = dir / "again";
  ASSERT_EQ(cli({"dmrl", "--config", (dir / "c.json").string(), "--seed", "3", "--out", again.string()}).code,
            kExitOk);
  EXPECT_EQ(without_wall(read_file(again / "trace_dmrl.csv")), without_wall(trace));

  for (const char* mode : {"eval-static", "eval-sine"}) {
    const auto e = cli({mode, "--config", (dir / "c.json").string(), "--checkpoint", (dir / "ckpt.json").string(),
                        "--out", out.string()});
    ASSERT_EQ(e.code, kExitOk) << e.err;
  }
  const auto eval = read_file(out / "eval_sine.csv");
  EXPECT_EQ(eval.substr(0, eval.find('\n')), kEvalHeader);
  EXPECT_EQ(std::count(eval.begin(), eval.end(), '\n'), 1 + 3 * 2);
}

TEST(Cli, BaselinesWriteTheirArtifacts) {
  TempDir dir;
  write_file(dir / "c.json", kTinyConfig);
  ASSERT_EQ(cli({"mf", "--config", (dir / "c.json").string(), "--out", (dir / "mf").string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "mf" / "policy.json"));
  EXPECT_FALSE(fs::exists(dir / "mf" / "dynamics.json"));
  ASSERT_EQ(cli({"mb", "--config", (dir / "c.json").string(), "--out", (dir / "mb").string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "mb" / "dynamics.json"));
  EXPECT_FALSE(fs::exists(dir / "mb" / "policy.json"));
  const auto e = cli({"eval-sine", "--config", (dir / "c.json").string(), "--checkpoint",
                      (dir / "mb" / "dynamics.json").string(), "--out", (dir / "mb").string()});
  EXPECT_EQ(e.code, kExitOk) << e.err;
}

TEST(Cli, DefaultConfigRowCap) {
  RunConfig cfg;
  load_config_file(fs::path(DMRL_CONFIG_DIR) / "default.json", cfg);
  EXPECT_EQ(cfg.hp.n_iterations, 200);
  EXPECT_EQ(cfg.hp.meta_batch_size, 10);
  EXPECT_EQ(cfg.hp.n_candidate, 1000);
  EXPECT_EQ(cfg.hp.mpc_horizon, 10);
  EXPECT_EQ(cfg.hp.max_rollout_len, 150);
  EXPECT_EQ(cfg.hp.mc_trials, 10);
}
