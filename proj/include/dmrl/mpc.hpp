#pragma once

#include <climits>
#include <span>
#include <vector>

#include "dmrl/dynamics.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

struct PlanConfig {
  int n_candidate = 1000;
  int horizon = 10;
  double gamma = 0.99;
  // Actions candidates are drawn from; empty means all four.
  std::vector<Action> actions;

  void validate() const;
};

struct CandidateScore {
  std::vector<Action> sequence;
  double predicted_return = 0.0;
};

// Discounted return of an open-loop action sequence rolled through `model`,
// with the known reward and terminal rules applied to predicted states.
// Prediction stops at the first predicted terminal; later actions score zero.
// `t0` is the step index of s0 and `max_steps` the episode cap used for timeouts.
double score_sequence(const TransitionPredictor& model, const Observation& s0,
                      std::span<const Action> seq, double gamma, int t0 = 0,
                      int max_steps = INT_MAX);

struct PlanResult {
  Action action = Action::noop;
  std::size_t best_index = 0;
  std::vector<CandidateScore> candidates;
};

// Random shooting: samples n_candidate uniform sequences and picks the best
// (lowest index wins ties). Returns every scored candidate.
PlanResult plan_detailed(const TransitionPredictor& model, const Observation& s0,
                         const PlanConfig& cfg, Rng& rng, int t0 = 0, int max_steps = INT_MAX);

Action plan(const TransitionPredictor& model, const Observation& s0, const PlanConfig& cfg,
            Rng& rng, int t0 = 0, int max_steps = INT_MAX);

// Environment rollout acting by replanning at every step.
Trajectory mb_rollout(const WindyLander& env, const TransitionPredictor& model,
                      const PlanConfig& cfg, Rng& rng, int max_len, int task_id = 0);

}  // namespace dmrl
