#include "dmrl/eval.hpp"

#include <algorithm>
#include <cmath>

namespace dmrl {

namespace {

constexpr std::uint64_t kStreamTasks = 11;
constexpr std::uint64_t kStreamTrial = 12;

void finalize(EvalReport& report, const Hyperparams& hp) {
  const int budget = report.steps();
  report.mean.assign(static_cast<std::size_t>(budget), 0.0);
  report.stddev.assign(static_cast<std::size_t>(budget), 0.0);
  const double n = report.trials();
  for (int k = 0; k < budget; ++k) {
    double s = 0.0;
    for (const auto& row : report.returns) s += row[static_cast<std::size_t>(k)];
    const double m = s / n;
    double sq = 0.0;
    for (const auto& row : report.returns) {
      const double d = row[static_cast<std::size_t>(k)] - m;
      sq += d * d;
    }
    report.mean[static_cast<std::size_t>(k)] = m;
    report.stddev[static_cast<std::size_t>(k)] = std::sqrt(sq / n);
  }
  const int w = std::min(hp.return_window, budget);
  const int idx = convergence_index(report.mean, w, hp.return_tol);
  report.batches_to_converge = idx + 1;
  double tail = 0.0;
  for (int k = budget - w; k < budget; ++k) tail += report.mean[static_cast<std::size_t>(k)];
  report.return_after_convergence = tail / w;
}

template <class Learner, class RolloutFn, class AdaptFn>
EvalReport run_protocol(Learner initial, Scenario scenario, const Hyperparams& hp,
                        std::uint64_t seed, RolloutFn&& do_rollout, AdaptFn&& do_adapt) {
  hp.validate();
  EvalReport report;
  report.scenario = scenario;
  Rng task_rng(derive_seed(seed, kStreamTasks));
  for (int trial = 0; trial < hp.mc_trials; ++trial) {
    const TaskSpec task = scenario_task(scenario, task_rng);
    report.tasks.push_back(task);
    EnvMeter meter;
    const WindyLander env(task, &meter);
    const std::uint64_t trial_seed = derive_seed(seed, kStreamTrial, static_cast<std::uint64_t>(trial));
    Rng stream(trial_seed);
    Learner current = initial;
    std::vector<double> row;
    for (int used = 0; used < hp.adaptation_budget;) {
      const int n = std::min(hp.adaptation_batch, hp.adaptation_budget - used);
      Rng fixed(trial_seed);
      Rng& rng = hp.eval_common_random_numbers ? fixed : stream;
      std::vector<Trajectory> batch;
      for (int j = 0; j < n; ++j) batch.push_back(do_rollout(env, current, rng, trial));
      row.push_back(mean_total_reward(batch));
      used += n;
      if (used < hp.adaptation_budget) current = do_adapt(current, batch);
    }
    report.env_rollouts += meter.rollouts();
    report.returns.push_back(std::move(row));
  }
  finalize(report, hp);
  return report;
}

}  // namespace

std::string to_string(Scenario s) { return s == Scenario::static_wind ? "static" : "sine"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "static") return Scenario::static_wind;
  if (s == "sine") return Scenario::sine;
  throw ContractViolation("unknown scenario '" + s + "'");
}

TaskSpec scenario_task(Scenario s, Rng& rng) {
  if (s == Scenario::static_wind) return sample_task(rng);
  return TaskSpec::sinusoidal(2.0, 2.0, 0.01, 0.01);
}

EvalReport eval_policy_adaptation(const Policy& policy, Scenario scenario, const Hyperparams& hp,
                                  std::uint64_t seed) {
  const auto opts = hp.policy_step_options();
  return run_protocol(
      policy, scenario, hp, seed,
      [&](const WindyLander& env, const Policy& p, Rng& rng, int trial) {
        return rollout(env, p.sampler(), rng, hp.max_rollout_len, {trial, p.tag()});
      },
      [&](const Policy& p, const std::vector<Trajectory>& batch) {
        return adapt(p, batch, hp.policy_inner_lr, opts);
      });
}

EvalReport eval_model_adaptation(const DynamicsModel& model, Scenario scenario,
                                 const Hyperparams& hp, std::uint64_t seed) {
  const auto cfg = hp.plan_config();
  return run_protocol(
      model, scenario, hp, seed,
      [&](const WindyLander& env, const DynamicsModel& m, Rng& rng, int trial) {
        return mb_rollout(env, m, cfg, rng, hp.max_rollout_len, trial);
      },
      [&](const DynamicsModel& m, const std::vector<Trajectory>& batch) {
        return adapt(m, transitions_of(batch), hp.model_inner_lr, hp.model_inner_steps);
      });
}

}  // namespace dmrl
