#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmrl/dynamics.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/trainer.hpp"

namespace dmrl {

enum class Scenario { static_wind, sine };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

// Test wind for one trial: a fresh constant wind from U[-2, 2] (static), or
// amplitude 2 m/s at 0.01 Hz on both axes (sine).
TaskSpec scenario_task(Scenario s, Rng& rng);

struct EvalReport {
  Scenario scenario = Scenario::static_wind;
  std::vector<TaskSpec> tasks;               // one per trial
  std::vector<std::vector<double>> returns;  // [trial][adaptation index]; batch mean, index 0 is zero-shot
  std::vector<double> mean;                  // per rollout index
  std::vector<double> stddev;
  std::uint64_t env_rollouts = 0;
  int batches_to_converge = 0;
  double return_after_convergence = 0.0;

  int trials() const { return static_cast<int>(returns.size()); }
  int steps() const { return returns.empty() ? 0 : static_cast<int>(returns.front().size()); }
};

// For each of hp.mc_trials trials: fix a test task, then spend
// hp.adaptation_budget env rollouts in batches of hp.adaptation_batch (the last
// batch may be short). Each batch is sampled with the current parameters, its
// mean return is recorded, and one inner adaptation step is taken on it. With
// common random numbers every batch of a trial reuses the same random stream,
// so index-to-index changes come from the parameters only.
EvalReport eval_policy_adaptation(const Policy& policy, Scenario scenario, const Hyperparams& hp,
                                  std::uint64_t seed);

// Same protocol for the MPC baseline: the dynamics model is adapted on each
// rollout's transitions and actions come from random-shooting MPC.
EvalReport eval_model_adaptation(const DynamicsModel& model, Scenario scenario,
                                 const Hyperparams& hp, std::uint64_t seed);

}  // namespace dmrl
