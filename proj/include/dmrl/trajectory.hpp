#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "dmrl/lander.hpp"

namespace dmrl {

enum class Provenance { env, sim };

struct Transition {
  Observation obs;
  Action action = Action::noop;
  double reward = 0.0;
};

// One episode. Provenance and the sampling-policy tag are fixed at creation.
class Trajectory {
 public:
  Trajectory(int task_id, Provenance provenance, std::optional<std::uint64_t> policy_tag = {})
      : task_id_(task_id), provenance_(provenance), policy_tag_(policy_tag) {}

  void append(const Observation& obs, Action action, double reward) {
    steps_.push_back({obs, action, reward});
  }
  void finish(const Observation& final_obs, TerminalKind kind);

  int task_id() const { return task_id_; }
  Provenance provenance() const { return provenance_; }
  std::optional<std::uint64_t> policy_tag() const { return policy_tag_; }
  const std::vector<Transition>& steps() const { return steps_; }
  const Observation& final_obs() const { return final_obs_; }
  TerminalKind terminal_kind() const { return terminal_kind_; }
  std::size_t size() const { return steps_.size(); }

  double total_reward() const;
  double discounted_return(double gamma) const;
  // Observation after step i (the final observation for the last step).
  const Observation& next_obs(std::size_t i) const {
    return i + 1 < steps_.size() ? steps_[i + 1].obs : final_obs_;
  }

  bool operator==(const Trajectory&) const;

 private:
  int task_id_;
  Provenance provenance_;
  std::optional<std::uint64_t> policy_tag_;
  std::vector<Transition> steps_;
  Observation final_obs_{};
  TerminalKind terminal_kind_ = TerminalKind::none;
};

using ActionSampler = std::function<Action(const Observation&, Rng&)>;

struct RolloutTag {
  int task_id = 0;
  std::optional<std::uint64_t> policy_tag;
};

// Runs the policy in the environment for at most max_len steps.
Trajectory rollout(const WindyLander& env, const ActionSampler& policy, Rng& rng, int max_len,
                   RolloutTag tag = {});

// Mean undiscounted return; 0 for an empty set.
double mean_total_reward(const std::vector<Trajectory>& trajs);

// Append-only store of real-environment trajectories keyed by task.
class DataBuffer {
 public:
  // Throws ContractViolation for simulated trajectories or once frozen.
  void append(Trajectory traj);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t num_tasks() const { return by_task_.size(); }
  std::size_t num_trajectories() const { return inserted_; }
  std::vector<int> task_ids() const;
  const std::vector<Trajectory>& task(int task_id) const;
  bool empty() const { return inserted_ == 0; }

 private:
  std::map<int, std::vector<Trajectory>> by_task_;
  std::size_t inserted_ = 0;
  bool frozen_ = false;
};

struct SplitRule {
  double train_fraction = 0.5;
};

struct TrajectorySplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// Order-preserving split; both halves are non-empty whenever n >= 2. A single
// trajectory lands in both halves.
TrajectorySplit split(const std::vector<Trajectory>& trajs, SplitRule rule);

}  // namespace dmrl
