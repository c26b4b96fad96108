#include "dmrl/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace dmrl {

void Trajectory::finish(const Observation& final_obs, TerminalKind kind) {
  if (steps_.empty()) throw ContractViolation("trajectory must contain at least one step");
  final_obs_ = final_obs;
  terminal_kind_ = kind;
}

double Trajectory::total_reward() const {
  double s = 0.0;
  for (const auto& st : steps_) s += st.reward;
  return s;
}

double Trajectory::discounted_return(double gamma) const {
  double g = 0.0;
  for (std::size_t i = steps_.size(); i-- > 0;) g = steps_[i].reward + gamma * g;
  return g;
}

bool Trajectory::operator==(const Trajectory& o) const {
  if (task_id_ != o.task_id_ || provenance_ != o.provenance_ || policy_tag_ != o.policy_tag_ ||
      final_obs_ != o.final_obs_ || terminal_kind_ != o.terminal_kind_ ||
      steps_.size() != o.steps_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto& a = steps_[i];
    const auto& b = o.steps_[i];
    if (a.obs != b.obs || a.action != b.action || a.reward != b.reward) return false;
  }
  return true;
}

Trajectory rollout(const WindyLander& env, const ActionSampler& policy, Rng& rng, int max_len,
                   RolloutTag tag) {
  if (max_len < 1) throw ContractViolation("rollout: max_len must be >= 1");
  Trajectory traj(tag.task_id, Provenance::env, tag.policy_tag);
  LanderState s = env.reset(rng);
  for (;;) {
    const auto obs = observe(s);
    const Action a = policy(obs, rng);
    const auto out = env.step(s, a, max_len);
    traj.append(obs, a, out.reward);
    s = out.next_state;
    if (out.terminal) {
      traj.finish(observe(s), out.terminal_kind);
      return traj;
    }
  }
}

void DataBuffer::append(Trajectory traj) {
  if (frozen_) throw ContractViolation("data buffer is read-only");
  if (traj.provenance() != Provenance::env) {
    throw ContractViolation("data buffer accepts environment trajectories only");
  }
  by_task_[traj.task_id()].push_back(std::move(traj));
  ++inserted_;
}

std::vector<int> DataBuffer::task_ids() const {
  std::vector<int> ids;
  ids.reserve(by_task_.size());
  for (const auto& [id, _] : by_task_) ids.push_back(id);
  return ids;
}

const std::vector<Trajectory>& DataBuffer::task(int task_id) const {
  const auto it = by_task_.find(task_id);
  if (it == by_task_.end()) throw ContractViolation("unknown task id " + std::to_string(task_id));
  return it->second;
}

TrajectorySplit split(const std::vector<Trajectory>& trajs, SplitRule rule) {
  if (!(rule.train_fraction > 0.0 && rule.train_fraction < 1.0)) {
    throw ContractViolation("split: train_fraction must lie in (0, 1)");
  }
  if (trajs.empty()) throw ContractViolation("split: no trajectories");
  TrajectorySplit out;
  if (trajs.size() == 1) {
    out.train = trajs;
    out.test = trajs;
    return out;
  }
  const auto n = static_cast<long>(trajs.size());
  const long n_train = std::clamp(std::lround(rule.train_fraction * static_cast<double>(n)), 1L, n - 1);
  out.train.assign(trajs.begin(), trajs.begin() + n_train);
  out.test.assign(trajs.begin() + n_train, trajs.end());
  return out;
}

double mean_total_reward(const std::vector<Trajectory>& trajs) {
  double s = 0.0;
  for (const auto& t : trajs) s += t.total_reward();
  return trajs.empty() ? 0.0 : s / static_cast<double>(trajs.size());
}

}  // namespace dmrl
