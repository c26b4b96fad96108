#include "dmrl/mpc.hpp"

namespace dmrl {

void PlanConfig::validate() const {
  if (n_candidate < 1) throw ContractViolation("plan config: n_candidate must be >= 1");
  if (horizon < 1) throw ContractViolation("plan config: horizon must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("plan config: gamma must lie in [0, 1]");
}

double score_sequence(const TransitionPredictor& model, const Observation& s0,
                      std::span<const Action> seq, double gamma, int t0, int max_steps) {
  if (seq.empty()) throw ContractViolation("score_sequence: empty action sequence");
  double total = 0.0;
  double discount = 1.0;
  Observation s = s0;
  int t = t0;
  for (const Action a : seq) {
    const Observation next = model.predict(s, a, t);
    ++t;
    const auto kind = classify(next, t, max_steps);
    total += discount * step_reward(next, a, kind);
    if (kind != TerminalKind::none) break;
    discount *= gamma;
    s = next;
  }
  return total;
}

PlanResult plan_detailed(const TransitionPredictor& model, const Observation& s0,
                         const PlanConfig& cfg, Rng& rng, int t0, int max_steps) {
  cfg.validate();
  static const std::vector<Action> all{Action::noop, Action::thrust_left, Action::thrust_main,
                                       Action::thrust_right};
  const auto& pool = cfg.actions.empty() ? all : cfg.actions;

  PlanResult result;
  result.candidates.reserve(static_cast<std::size_t>(cfg.n_candidate));
  for (int c = 0; c < cfg.n_candidate; ++c) {
    CandidateScore cand;
    cand.sequence.reserve(static_cast<std::size_t>(cfg.horizon));
    for (int h = 0; h < cfg.horizon; ++h) cand.sequence.push_back(pool[rng.below(pool.size())]);
    result.candidates.push_back(std::move(cand));
  }
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    auto& cand = result.candidates[c];
    cand.predicted_return = score_sequence(model, s0, cand.sequence, cfg.gamma, t0, max_steps);
    if (cand.predicted_return > result.candidates[result.best_index].predicted_return) {
      result.best_index = c;
    }
  }
  result.action = result.candidates[result.best_index].sequence.front();
  return result;
}

Action plan(const TransitionPredictor& model, const Observation& s0, const PlanConfig& cfg,
            Rng& rng, int t0, int max_steps) {
  return plan_detailed(model, s0, cfg, rng, t0, max_steps).action;
}

Trajectory mb_rollout(const WindyLander& env, const TransitionPredictor& model,
                      const PlanConfig& cfg, Rng& rng, int max_len, int task_id) {
  if (max_len < 1) throw ContractViolation("mb_rollout: max_len must be >= 1");
  Trajectory traj(task_id, Provenance::env);
  LanderState s = env.reset(rng);
  for (;;) {
    const auto obs = observe(s);
    const Action a = plan(model, obs, cfg, rng, s.t, max_len);
    const auto out = env.step(s, a, max_len);
    traj.append(obs, a, out.reward);
    s = out.next_state;
    if (out.terminal) {
      traj.finish(observe(s), out.terminal_kind);
      return traj;
    }
  }
}

}  // namespace dmrl
