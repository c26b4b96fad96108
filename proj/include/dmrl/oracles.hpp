#pragma once

#include <array>
#include <climits>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dmrl/mlp.hpp"
#include "dmrl/mpc.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl::oracle {

// Central differences of f around x, one coordinate at a time.
std::vector<double> central_differences(const std::function<double(const ParamVector&)>& f,
                                        const ParamVector& x, double step);

// Every entry, biases included, uniform in [-1, 1]; keeps pre-activations
// off the relu kink where central differences are not a derivative.
ParamVector random_params(const MlpSpec& spec, Rng& rng);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

// Best open-loop sequence by full enumeration of actions^horizon, scored
// step by step through `model` independently of score_sequence. Ties go to
// the first sequence in lexicographic order of `actions` indices.
CandidateScore exhaustive_best(const TransitionPredictor& model, const Observation& s0,
                               const std::vector<Action>& actions, int horizon, double gamma,
                               int t0 = 0, int max_steps = INT_MAX);

// Worst relative error between analytic gradients and central differences
// over `cases` random small networks, each checked on the raw network output,
// the dynamics loss and the policy surrogate.
double gradient_suite(int cases, std::uint64_t seed = 20240601);

// Number of random models/states where plan() over |A| = 2, H <= 3 with
// full-coverage candidates disagrees with exhaustive_best.
int mpc_suite(int cases, std::uint64_t seed = 77);

// Same step sequence, final observation and terminal kind; provenance, task
// id and tag are ignored.
bool same_path(const Trajectory& a, const Trajectory& b);

// One environment rollout and one simulate_rollout through SimulatorOracle,
// both driven by Rng(seed) and the same random policy; true when identical.
bool oracle_equivalence_case(std::uint64_t seed, int max_len = 150);

struct BanditOutcome {
  std::array<double, 2> before{};  // optimal-arm probability at the meta-init
  std::array<double, 2> after{};   // after one adaptation step, per task
  bool improved() const { return after[0] > before[0] && after[1] > before[1]; }
};

// Two opposite bandits over a fixed observation: task k pays 1 for action k
// and 0 otherwise. Meta-trains a policy with first-order MAML on one-step
// episodes, then adapts once per task from the meta-init.
BanditOutcome bandit_meta_run(std::uint64_t seed);

struct SelftestOptions {
  int gradient_cases = 100;
  int mpc_cases = 50;
  bool determinism = true;
};

// Gradient-oracle, MPC-oracle and determinism suites; prints one line per
// suite and returns true when all pass.
bool run_selftest(std::ostream& out, const SelftestOptions& opts = {});

}  // namespace dmrl::oracle
