#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "dmrl/config.hpp"
#include "dmrl/trainer.hpp"

using namespace dmrl;

namespace {

Hyperparams small_hp() {
  Hyperparams hp;
  hp.meta_batch_size = 3;
  hp.max_rollout_len = 20;
  hp.n_iterations = 6;
  hp.n_candidate = 20;
  hp.mpc_horizon = 4;
  hp.switch_iteration = 3;
  hp.model_inner_lr = 0.05;
  hp.model_meta_lr = 0.05;
  hp.policy_inner_lr = 0.01;
  hp.policy_meta_lr = 0.01;
  return hp;
}

std::vector<TrainRecord> no_clock(std::vector<TrainRecord> trace) {
  for (auto& r : trace) r.wall_ms = 0.0;
  return trace;
}

}  // namespace

TEST(Phase1, BufferGainsOneBatchPerTask) {
  Hyperparams hp = small_hp();
  hp.meta_batch_size = 10;
  hp.rollouts_per_task = 2;
  DmrlTrainer trainer(hp, 1);
  trainer.phase1_iteration();
  EXPECT_EQ(trainer.buffer().num_trajectories(), 20u);
  EXPECT_EQ(trainer.buffer().num_tasks(), 10u);
  EXPECT_EQ(trainer.meter().rollouts(), 20u);
  for (int id : trainer.buffer().task_ids()) {
    for (const auto& t : trainer.buffer().task(id)) EXPECT_EQ(t.provenance(), Provenance::env);
  }
}

TEST(Phase1, ZeroMetaRatesLeaveParametersButGrowBuffer) {
  Hyperparams hp = small_hp();
  hp.policy_meta_lr = 0.0;
  hp.model_meta_lr = 0.0;
  DmrlTrainer trainer(hp, 2);
  const auto phi = trainer.policy().params();
  const auto theta = trainer.model().params();
  trainer.phase1_iteration();
  trainer.phase1_iteration();
  EXPECT_EQ(trainer.policy().params(), phi);
  EXPECT_EQ(trainer.model().params(), theta);
  EXPECT_EQ(trainer.buffer().num_trajectories(), 2u * hp.meta_batch_size * hp.rollouts_per_task);
}

TEST(Phase1, EnvBatchAccounting) {
  const Hyperparams hp = small_hp();
  DmrlTrainer trainer(hp, 3);
  for (int i = 1; i <= 3; ++i) {
    const auto rec = trainer.phase1_iteration();
    EXPECT_EQ(rec.env_batches, static_cast<std::uint64_t>(i * hp.meta_batch_size));
    EXPECT_EQ(rec.sim_batches, 0u);
    EXPECT_EQ(rec.phase, Phase::one);
    EXPECT_TRUE(std::isfinite(rec.model_val_loss));
  }
  EXPECT_EQ(trainer.val_loss_history().size(), 3u);
}

TEST(ModelConverged, Examples) {
  EXPECT_TRUE(model_converged({0.3, 0.3, 0.3, 0.3}, 3, 0.05));
  EXPECT_FALSE(model_converged({1.0, 0.5, 0.25, 0.125, 0.0625}, 3, 0.01));
  EXPECT_FALSE(model_converged({0.3, 0.3}, 3, 0.05));
  EXPECT_TRUE(model_converged({5.0, 1.0, 1.01, 0.99}, 3, 0.05));
  EXPECT_FALSE(model_converged({1.0, std::numeric_limits<double>::quiet_NaN(), 1.0}, 3, 0.05));
  EXPECT_THROW(model_converged({1.0}, 1, 0.05), ContractViolation);
}

TEST(Phase2, NoEnvironmentAccess) {
  const Hyperparams hp = small_hp();
  DmrlTrainer trainer(hp, 4);
  trainer.phase1_iteration();
  trainer.phase1_iteration();
  EXPECT_THROW(trainer.phase2_iteration(), ContractViolation);
  trainer.switch_to_phase2();
  const auto steps = trainer.meter().steps();
  const auto trajs = trainer.buffer().num_trajectories();
  EXPECT_TRUE(trainer.meter().sealed());
  EXPECT_TRUE(trainer.buffer().frozen());
  std::uint64_t sim = 0;
  for (int i = 0; i < 3; ++i) {
    const auto rec = trainer.phase2_iteration();
    EXPECT_EQ(rec.phase, Phase::two);
    EXPECT_EQ(rec.env_batches, 2u * hp.meta_batch_size);
    EXPECT_GT(rec.sim_batches, sim);
    sim = rec.sim_batches;
  }
  EXPECT_EQ(trainer.meter().steps(), steps);
  EXPECT_EQ(trainer.buffer().num_trajectories(), trajs);
  EXPECT_THROW(trainer.phase1_iteration(), ContractViolation);
}

TEST(Phase2, SealedMeterRejectsSteps) {
  EnvMeter meter;
  const WindyLander env(TaskSpec::constant(0.0, 0.0), &meter);
  Rng rng(5);
  const auto s = env.reset(rng);
  meter.seal();
  EXPECT_THROW(env.step(s, Action::noop, 10), ContractViolation);
}

TEST(Phase2, ZeroMetaRateLeavesPolicy) {
  Hyperparams frozen = small_hp();
  frozen.policy_meta_lr = 0.0;
  DmrlTrainer twin(frozen, 6);
  twin.phase1_iteration();
  twin.switch_to_phase2();
  const auto before = twin.policy().params();
  twin.phase2_iteration();
  EXPECT_EQ(twin.policy().params(), before);
}

TEST(Phase2, SwitchNeedsData) {
  DmrlTrainer trainer(small_hp(), 7);
  EXPECT_THROW(trainer.switch_to_phase2(), ContractViolation);
  DmrlTrainer mf(small_hp(), 7, false);
  mf.phase1_iteration();
  EXPECT_THROW(mf.switch_to_phase2(), ContractViolation);
}

TEST(Phase2, OracleModelMatchesPhase1Statistics) {
  // With the true simulator as the model and a frozen policy, Phase-2 returns
  // are draws from the same distribution as Phase-1 returns.
  Hyperparams hp = small_hp();
  hp.meta_batch_size = 8;
  hp.rollouts_per_task = 6;
  hp.sim_rollouts_per_task = 6;
  hp.max_rollout_len = 60;
  hp.policy_meta_lr = 0.0;
  std::vector<double> diffs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DmrlTrainer trainer(hp, 100 + seed);
    trainer.set_sim_model_provider([](int, const TaskSpec& task, const TransitionBatch&) {
      return std::make_shared<const SimulatorOracle>(task);
    });
    const double real = trainer.phase1_iteration().mean_return;
    trainer.switch_to_phase2();
    const double sim = trainer.phase2_iteration().mean_return;
    diffs.push_back(sim - real);
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= diffs.size();
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= diffs.size() - 1;
  const double se = std::sqrt(var / diffs.size());
  EXPECT_LE(std::abs(mean), 3.0 * se + 1e-9) << "mean diff " << mean << " se " << se;
}

TEST(SimulateRollout, ProvenanceIsSim) {
  Rng rng(8);
  const auto policy = Policy::initialize(rng);
  const auto model = DynamicsModel::initialize(rng);
  for (int i = 0; i < 5; ++i) {
    const auto t = simulate_rollout(model, policy.sampler(), rng, 30, {9, policy.tag()});
    EXPECT_EQ(t.provenance(), Provenance::sim);
    EXPECT_EQ(t.task_id(), 9);
    EXPECT_EQ(t.policy_tag(), policy.tag());
    EXPECT_LE(t.size(), 30u);
  }
  EXPECT_THROW(simulate_rollout(model, policy.sampler(), rng, 0), ContractViolation);
}

TEST(SimulateRollout, ZeroModelFreezesState) {
  Rng rng(9);
  const auto policy = Policy::initialize(rng);
  const auto t = simulate_rollout(DynamicsModel::zero(), policy.sampler(), rng, 25);
  ASSERT_EQ(t.size(), 25u);
  EXPECT_EQ(t.terminal_kind(), TerminalKind::timeout);
  const Observation s0 = t.steps().front().obs;
  double expected = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t.steps()[i].obs, s0);
    const auto kind = i + 1 == t.size() ? TerminalKind::timeout : TerminalKind::none;
    expected += step_reward(s0, t.steps()[i].action, kind);
  }
  EXPECT_EQ(t.final_obs(), s0);
  EXPECT_DOUBLE_EQ(t.total_reward(), expected);
}

TEST(SimulateRollout, OracleModelReproducesEnvironment) {
  Rng setup(10);
  for (int c = 0; c < 10; ++c) {
    const TaskSpec task = sample_task(setup);
    const auto policy = Policy::initialize(setup);
    const WindyLander env(task);
    const SimulatorOracle oracle(task);
    Rng a(500 + c), b(500 + c);
    const auto real = rollout(env, policy.sampler(), a, 80);
    const auto sim = simulate_rollout(oracle, policy.sampler(), b, 80);
    ASSERT_EQ(real.size(), sim.size());
    EXPECT_EQ(real.terminal_kind(), sim.terminal_kind());
    EXPECT_EQ(real.final_obs(), sim.final_obs());
    for (std::size_t i = 0; i < real.size(); ++i) {
      EXPECT_EQ(real.steps()[i].obs, sim.steps()[i].obs);
      EXPECT_EQ(real.steps()[i].action, sim.steps()[i].action);
      EXPECT_EQ(real.steps()[i].reward, sim.steps()[i].reward);
    }
  }
}

TEST(TrainDmrl, PhasePrefixAndAccounting) {
  const Hyperparams hp = small_hp();
  const auto res = train_dmrl(hp, 11);
  ASSERT_EQ(res.trace.size(), static_cast<std::size_t>(hp.n_iterations));
  EXPECT_EQ(res.switch_iteration, hp.switch_iteration);
  bool seen_two = false;
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const auto& r = res.trace[i];
    EXPECT_EQ(r.iteration, static_cast<int>(i));
    if (r.phase == Phase::two) seen_two = true;
    EXPECT_EQ(r.phase, seen_two ? Phase::two : Phase::one);
    if (i > 0) EXPECT_GE(r.env_batches, res.trace[i - 1].env_batches);
  }
  EXPECT_EQ(res.trace.back().env_batches,
            static_cast<std::uint64_t>(hp.switch_iteration * hp.meta_batch_size));
  EXPECT_TRUE(res.model.has_value());
}

TEST(TrainDmrl, ConvergenceRuleSwitches) {
  Hyperparams hp = small_hp();
  hp.switch_iteration = 0;
  hp.convergence_window = 2;
  hp.convergence_tol = 1e9;
  const auto res = train_dmrl(hp, 12);
  EXPECT_EQ(res.switch_iteration, 2);
  hp.convergence_tol = 1e-12;
  EXPECT_EQ(train_dmrl(hp, 12).switch_iteration, -1);
}

TEST(TrainDmrl, Deterministic) {
  const Hyperparams hp = small_hp();
  EXPECT_EQ(trace_csv(no_clock(train_dmrl(hp, 13).trace)), trace_csv(no_clock(train_dmrl(hp, 13).trace)));
  EXPECT_NE(trace_csv(no_clock(train_dmrl(hp, 13).trace)), trace_csv(no_clock(train_dmrl(hp, 14).trace)));
}

TEST(TrainMf, NoModelAndSameAccounting) {
  const Hyperparams hp = small_hp();
  const auto res = train_mf_baseline(hp, 15);
  EXPECT_FALSE(res.model.has_value());
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    EXPECT_EQ(res.trace[i].phase, Phase::mf);
    EXPECT_EQ(res.trace[i].env_batches, (i + 1) * hp.meta_batch_size);
    EXPECT_TRUE(std::isnan(res.trace[i].model_val_loss));
  }
  DmrlTrainer mf(hp, 15, false);
  EXPECT_FALSE(mf.has_model());
  EXPECT_THROW(mf.model(), ContractViolation);
  mf.phase1_iteration();
  EXPECT_EQ(mf.buffer().num_trajectories(), 0u);
  EXPECT_EQ(trace_csv(no_clock(res.trace)), trace_csv(no_clock(train_mf_baseline(hp, 15).trace)));
}

TEST(TrainMb, ProvenanceAndAccounting) {
  Hyperparams hp = small_hp();
  hp.rollouts_per_task = 3;
  MbTrainer trainer(hp, 16);
  for (int i = 1; i <= 2; ++i) {
    const auto rec = trainer.iteration();
    EXPECT_EQ(rec.phase, Phase::mb);
    EXPECT_EQ(trainer.meter().rollouts(), static_cast<std::uint64_t>(i * hp.meta_batch_size * hp.rollouts_per_task));
    EXPECT_EQ(rec.env_batches, static_cast<std::uint64_t>(i * hp.meta_batch_size));
  }
  for (int id : trainer.buffer().task_ids()) {
    for (const auto& t : trainer.buffer().task(id)) EXPECT_EQ(t.provenance(), Provenance::env);
  }
  hp.n_iterations = 3;
  EXPECT_EQ(trace_csv(no_clock(train_mb_baseline(hp, 17).trace)),
            trace_csv(no_clock(train_mb_baseline(hp, 17).trace)));
}

TEST(ConvergenceIndex, Examples) {
  EXPECT_EQ(convergence_index(std::vector<double>(10, 3.0), 5, 0.1), 4);
  std::vector<double> step(10, 0.0);
  step.resize(20, 1.0);
  EXPECT_EQ(convergence_index(step, 2, 0.1), 11);
  EXPECT_EQ(convergence_index({1.0, 2.0}, 5, 0.1), -1);
  // A transient excursion resets the index even if earlier values were close.
  EXPECT_EQ(convergence_index({-50, -50, -10, -50, -50, -50}, 1, 0.05), 3);
}

TEST(ConvergenceIndex, SummaryReadsEnvBatches) {
  std::vector<TrainRecord> trace;
  for (int i = 0; i < 8; ++i) {
    TrainRecord r;
    r.iteration = i;
    r.mean_return = i < 4 ? -100.0 + i : -20.0;
    r.env_batches = static_cast<std::uint64_t>(10 * (i + 1));
    trace.push_back(r);
  }
  const auto s = summarize(trace, 2, 0.05);
  EXPECT_DOUBLE_EQ(s.return_after_convergence, -20.0);
  EXPECT_EQ(s.iterations_to_converge, 6);
  EXPECT_EQ(s.env_batches_to_converge, 60u);
}

TEST(Hyperparams, Validation) {
  Hyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.meta_batch_size = 0;
  EXPECT_THROW(hp.validate(), ContractViolation);
  hp = Hyperparams{};
  hp.train_fraction = 1.0;
  EXPECT_THROW(hp.validate(), ContractViolation);
  hp = Hyperparams{};
  hp.adaptation_batch = 0;
  EXPECT_THROW(hp.validate(), ContractViolation);
}
