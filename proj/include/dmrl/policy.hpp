#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dmrl/lander.hpp"
#include "dmrl/mlp.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

// 5 -> 64 -> 64 -> 4, relu hidden layers, softmax head.
MlpSpec policy_spec();

using ActionProbs = std::array<double, kNumActions>;

// Categorical policy pi_Phi(a | s).
class Policy {
 public:
  Policy(MlpSpec spec, ParamVector params);

  static Policy initialize(Rng& rng);
  static Policy zero();

  const MlpSpec& spec() const { return spec_; }
  const ParamVector& params() const { return params_; }
  Policy with_params(ParamVector params) const { return Policy(spec_, std::move(params)); }

  // Identifies the parameter snapshot that sampled a trajectory.
  std::uint64_t tag() const { return tag_; }

  ActionProbs distribution(const Observation& s) const;
  Action sample(const Observation& s, Rng& rng) const;
  ActionSampler sampler() const;

 private:
  MlpSpec spec_;
  ParamVector params_;
  std::uint64_t tag_;
};

ActionProbs action_distribution(const Policy& policy, const Observation& s);

// Inverse-CDF draw from a probability vector.
Action sample_action(const ActionProbs& probs, Rng& rng);

struct ReturnStats {
  std::vector<double> returns;  // discounted, one per trajectory
  double mean = 0.0;
  double stddev = 0.0;
};

ReturnStats return_stats(const std::vector<Trajectory>& trajs, double gamma);

// Negative mean discounted return. Throws ContractViolation when empty.
double rl_loss(const std::vector<Trajectory>& trajs, double gamma);

// batch_return: b = mean discounted return of the batch, the same for every
// step. per_step: b_t = mean of G_t over the trajectories still running at t.
enum class Baseline { batch_return, per_step };

// REINFORCE with discounted reward-to-go:
//   -(1/N) sum_tau sum_t grad log pi(a_t | s_t) * (G_t - b)
// Unclipped; this is the exact gradient of the negated score-function surrogate.
Gradient policy_gradient(const Policy& policy, const std::vector<Trajectory>& trajs, double gamma,
                         Baseline baseline = Baseline::batch_return);

// The surrogate whose gradient policy_gradient returns (advantages held fixed).
double policy_surrogate(const Policy& policy, const std::vector<Trajectory>& trajs, double gamma,
                        Baseline baseline = Baseline::batch_return);

struct PolicyStepOptions {
  double gamma = 0.99;
  double clip_norm = 10.0;
  Baseline baseline = Baseline::batch_return;
};

// One clipped policy-gradient step. Trajectories that carry a sampling tag
// must have been drawn from exactly this policy.
Policy adapt(const Policy& policy, const std::vector<Trajectory>& trajs, double lr,
             const PolicyStepOptions& opts = {});

struct PolicyTaskData {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// First-order MAML: adapt per task on `train`, evaluate the policy gradient
// on `test` at the adapted parameters, average, step the shared parameters.
Policy meta_step(const Policy& policy, const std::vector<PolicyTaskData>& tasks, double inner_lr,
                 double meta_lr, const PolicyStepOptions& opts = {});

// Throws ContractViolation unless every tagged trajectory came from `policy`.
void require_sampled_from(const Policy& policy, const std::vector<Trajectory>& trajs,
                          const char* where);

}  // namespace dmrl
