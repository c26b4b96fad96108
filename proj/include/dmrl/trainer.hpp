#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmrl/dynamics.hpp"
#include "dmrl/mpc.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

struct Hyperparams {
  int meta_batch_size = 10;
  int n_candidate = 1000;
  int mpc_horizon = 10;
  int max_rollout_len = 150;
  int n_iterations = 200;
  int mc_trials = 10;

  double model_inner_lr = 1e-3;   // alpha
  double policy_inner_lr = 1e-3;  // beta
  double model_meta_lr = 1e-3;
  double policy_meta_lr = 1e-3;
  double gamma = 0.99;
  double clip_norm = 10.0;
  // REINFORCE baseline: false = batch-mean return, true = per-step batch mean.
  bool per_step_baseline = false;

  int rollouts_per_task = 2;
  int sim_rollouts_per_task = 2;
  double train_fraction = 0.5;
  int model_inner_steps = 1;
  int phase2_model_steps = 5;
  double phase2_model_stop_loss = 1e-3;

  // Phase switch: relative range of the last `convergence_window` validation
  // losses <= convergence_tol. A positive switch_iteration overrides the rule.
  int convergence_window = 10;
  double convergence_tol = 0.05;
  int switch_iteration = 0;

  // Trailing-window rule used to read "batches to converge" off return curves.
  int return_window = 5;
  double return_tol = 0.1;

  // Test-time adaptation: env rollouts per trial, spent in batches of
  // adaptation_batch; the first batch is the zero-shot one.
  int adaptation_budget = 50;
  int adaptation_batch = 5;
  bool eval_common_random_numbers = true;

  void validate() const;
  PlanConfig plan_config() const;
  PolicyStepOptions policy_step_options() const {
    return {gamma, clip_norm, per_step_baseline ? Baseline::per_step : Baseline::batch_return};
  }
};

enum class Phase { one, two, mf, mb };
std::string to_string(Phase p);

struct TrainRecord {
  int iteration = 0;
  Phase phase = Phase::one;
  double mean_return = 0.0;
  double model_val_loss = 0.0;
  std::uint64_t env_batches = 0;
  std::uint64_t sim_batches = 0;
  double wall_ms = 0.0;
};

// True iff the last `window` losses have (max - min) / |mean| <= tol.
bool model_converged(const std::vector<double>& history, int window, double tol);

// Rolls `policy` inside `model` from an initial state drawn from p_0. Rewards
// and terminals come from the known reward rules applied to predicted states.
Trajectory simulate_rollout(const TransitionPredictor& model, const ActionSampler& policy, Rng& rng,
                            int max_len, RolloutTag tag = {});

// Supplies the model used to simulate task `task_id` in Phase 2. The default
// adapts the meta-learned dynamics model on the task's buffered data.
using SimModelProvider = std::function<std::shared_ptr<const TransitionPredictor>(
    int task_id, const TaskSpec& task, const TransitionBatch& data)>;

// Double meta-RL state: Phase 1 meta-trains policy and dynamics model on
// environment data; Phase 2 meta-trains the policy on model rollouts only.
class DmrlTrainer {
 public:
  // `with_model` = false gives the model-free MAML baseline (Phase 1 without
  // any dynamics model).
  DmrlTrainer(Hyperparams hp, std::uint64_t seed, bool with_model = true);

  TrainRecord phase1_iteration();
  TrainRecord phase2_iteration();
  // Freezes the buffer and the input statistics and seals the environment.
  void switch_to_phase2();

  bool in_phase2() const { return phase2_; }
  bool model_converged() const;

  const Hyperparams& hyperparams() const { return hp_; }
  const Policy& policy() const { return policy_; }
  const DynamicsModel& model() const;
  bool has_model() const { return model_.has_value(); }
  const DataBuffer& buffer() const { return buffer_; }
  const EnvMeter& meter() const { return meter_; }
  const TaskSpec& task_spec(int task_id) const { return task_specs_.at(task_id); }
  std::uint64_t env_batches() const { return env_batches_; }
  std::uint64_t sim_batches() const { return sim_batches_; }
  const std::vector<double>& val_loss_history() const { return val_history_; }
  int iterations_done() const { return iteration_; }

  void set_sim_model_provider(SimModelProvider provider) { provider_ = std::move(provider); }

 private:
  Hyperparams hp_;
  Rng rng_;
  Policy policy_;
  std::optional<DynamicsModel> model_;
  DataBuffer buffer_;
  EnvMeter meter_;
  std::map<int, TaskSpec> task_specs_;
  std::vector<double> val_history_;
  SimModelProvider provider_;
  std::uint64_t env_batches_ = 0;
  std::uint64_t sim_batches_ = 0;
  int iteration_ = 0;
  int next_task_id_ = 0;
  bool phase2_ = false;
};

struct TrainResult {
  Policy policy;
  std::optional<DynamicsModel> model;
  std::vector<TrainRecord> trace;
  // first Phase-2 iteration, or -1 when the run never switched
  int switch_iteration = -1;
};

TrainResult train_dmrl(const Hyperparams& hp, std::uint64_t seed);
TrainResult train_mf_baseline(const Hyperparams& hp, std::uint64_t seed);

// Model-based MAML with MPC: meta-learns the dynamics model on data collected
// by random-shooting MPC under the current meta-model.
class MbTrainer {
 public:
  MbTrainer(Hyperparams hp, std::uint64_t seed);
  TrainRecord iteration();

  const DynamicsModel& model() const { return model_; }
  const DataBuffer& buffer() const { return buffer_; }
  const EnvMeter& meter() const { return meter_; }

 private:
  Hyperparams hp_;
  Rng rng_;
  DynamicsModel model_;
  DataBuffer buffer_;
  EnvMeter meter_;
  std::uint64_t env_batches_ = 0;
  int iteration_ = 0;
  int next_task_id_ = 0;
};

TrainResult train_mb_baseline(const Hyperparams& hp, std::uint64_t seed);

// Final convergence: the first index i >= window-1 from which every trailing
// window mean (curve[j-window+1 .. j], j >= i) stays within
// tol * max(|final|, 1) of the final window's mean. Returns -1 when the curve
// is shorter than the window.
int convergence_index(const std::vector<double>& curve, int window, double tol);

struct ConvergenceSummary {
  double return_after_convergence = 0.0;  // mean of the final window
  int iterations_to_converge = 0;         // convergence index + 1
  std::uint64_t env_batches_to_converge = 0;
};

ConvergenceSummary summarize(const std::vector<TrainRecord>& trace, int window, double tol);

}  // namespace dmrl
