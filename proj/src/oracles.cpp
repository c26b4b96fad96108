#include "dmrl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dmrl/config.hpp"
#include "dmrl/dynamics.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/trainer.hpp"

namespace dmrl::oracle {

std::vector<double> central_differences(const std::function<double(const ParamVector&)>& f,
                                        const ParamVector& x, double step) {
  std::vector<double> g(x.size());
  ParamVector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

ParamVector random_params(const MlpSpec& spec, Rng& rng) {
  ParamVector p(spec.layout());
  for (auto& v : p.values()) v = rng.uniform(-1.0, 1.0);
  return p;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

CandidateScore exhaustive_best(const TransitionPredictor& model, const Observation& s0,
                               const std::vector<Action>& actions, int horizon, double gamma,
                               int t0, int max_steps) {
  const auto base = actions.size();
  std::size_t count = 1;
  for (int h = 0; h < horizon; ++h) count *= base;

  CandidateScore best;
  bool have = false;
  std::vector<Action> seq(static_cast<std::size_t>(horizon));
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t rest = code;
    for (int h = horizon; h-- > 0;) {
      seq[static_cast<std::size_t>(h)] = actions[rest % base];
      rest /= base;
    }
    // Reward accumulation written out longhand, separate from score_sequence.
    double total = 0.0;
    Observation s = s0;
    bool done = false;
    for (int h = 0; h < horizon && !done; ++h) {
      const Action a = seq[static_cast<std::size_t>(h)];
      const Observation next = model.predict(s, a, t0 + h);
      const auto kind = classify(next, t0 + h + 1, max_steps);
      total += std::pow(gamma, h) * step_reward(next, a, kind);
      done = kind != TerminalKind::none;
      s = next;
    }
    if (!have || total > best.predicted_return) {
      best = {seq, total};
      have = true;
    }
  }
  return best;
}

namespace {

std::vector<double> as_vector(const Gradient& g) { return {g.values().begin(), g.values().end()}; }

MlpSpec random_small_spec(Rng& rng, std::size_t in, std::size_t out, Head head) {
  MlpSpec spec;
  spec.input_dim = in;
  spec.output_dim = out;
  spec.head = head;
  const auto layers = 1 + rng.below(2);
  for (std::uint64_t l = 0; l < layers; ++l) spec.hidden.push_back({2 + rng.below(6), Activation::relu});
  return spec;
}

// Random trajectory with random observations, actions and rewards.
Trajectory random_trajectory(Rng& rng, std::size_t len) {
  Trajectory t(0, Provenance::sim);
  for (std::size_t i = 0; i < len; ++i) {
    Observation o{};
    for (auto& v : o) v = rng.uniform(-2.0, 2.0);
    t.append(o, static_cast<Action>(rng.below(kNumActions)), rng.uniform(-1.0, 1.0));
  }
  Observation last{};
  t.finish(last, TerminalKind::timeout);
  return t;
}

}  // namespace

double gradient_suite(int cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    // raw network: <forward, u>
    {
      const auto spec = random_small_spec(rng, 1 + rng.below(4), 1 + rng.below(3),
                                          rng.below(2) ? Head::softmax : Head::linear);
      const auto params = random_params(spec, rng);
      std::vector<double> x(spec.input_dim), u(spec.output_dim);
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      for (auto& v : u) v = rng.uniform(-1.0, 1.0);
      const auto g = backward(spec, params, x, u);
      const auto fd = central_differences(
          [&](const ParamVector& p) { return dot(forward(spec, p, x), u); }, params, 1e-5);
      worst = std::max(worst, max_relative_error(as_vector(g), fd));
    }
    // dynamics loss
    {
      MlpSpec spec = dynamics_spec();
      spec.hidden = {{3 + rng.below(4), Activation::relu}, {2 + rng.below(3), Activation::relu}};
      DynamicsModel model(spec, random_params(spec, rng));
      TransitionBatch batch;
      for (int i = 0; i < 4; ++i) {
        TransitionSample tr;
        for (auto& v : tr.s) v = rng.uniform(-1.0, 1.0);
        for (auto& v : tr.next) v = rng.uniform(-1.0, 1.0);
        tr.a = static_cast<Action>(rng.below(kNumActions));
        batch.push_back(tr);
      }
      const auto g = model_loss_gradient(model, batch);
      const auto fd = central_differences(
          [&](const ParamVector& p) { return model_loss(model.with_params(p), batch); },
          model.params(), 1e-5);
      worst = std::max(worst, max_relative_error(as_vector(g), fd));
    }
    // policy surrogate
    {
      MlpSpec spec = policy_spec();
      spec.hidden = {{3 + rng.below(4), Activation::relu}, {2 + rng.below(3), Activation::relu}};
      Policy policy(spec, random_params(spec, rng));
      std::vector<Trajectory> trajs{random_trajectory(rng, 3), random_trajectory(rng, 2)};
      const auto g = policy_gradient(policy, trajs, 0.9);
      const auto fd = central_differences(
          [&](const ParamVector& p) { return policy_surrogate(policy.with_params(p), trajs, 0.9); },
          policy.params(), 1e-5);
      worst = std::max(worst, max_relative_error(as_vector(g), fd));
    }
  }
  return worst;
}

int mpc_suite(int cases, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<Action> actions{Action::noop, Action::thrust_main};
  int mismatches = 0;
  for (int c = 0; c < cases; ++c) {
    Rng init = rng.split();
    const auto model = DynamicsModel::initialize(init);
    Observation s0{rng.uniform(-1.0, 1.0), rng.uniform(0.5, 10.0), rng.uniform(-1.0, 1.0),
                   rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0)};
    const int horizon = 1 + static_cast<int>(rng.below(3));
    PlanConfig cfg;
    cfg.horizon = horizon;
    cfg.actions = actions;
    cfg.n_candidate = 256;
    Rng plan_rng = rng.split();
    const auto planned = plan_detailed(model, s0, cfg, plan_rng);
    const auto best = exhaustive_best(model, s0, actions, horizon, cfg.gamma);
    if (planned.candidates[planned.best_index].predicted_return != best.predicted_return ||
        planned.action != best.sequence.front()) {
      ++mismatches;
    }
  }
  return mismatches;
}

bool same_path(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.final_obs() != b.final_obs() ||
      a.terminal_kind() != b.terminal_kind()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.steps()[i];
    const auto& y = b.steps()[i];
    if (x.obs != y.obs || x.action != y.action || x.reward != y.reward) return false;
  }
  return true;
}

bool oracle_equivalence_case(std::uint64_t seed, int max_len) {
  Rng setup(derive_seed(seed, 1));
  const TaskSpec task = sample_task(setup);
  Rng init(derive_seed(seed, 2));
  const Policy policy = Policy::initialize(init);
  const WindyLander env(task);
  Rng a(seed);
  Rng b(seed);
  const auto real = rollout(env, policy.sampler(), a, max_len);
  const SimulatorOracle oracle(task);
  const auto sim = simulate_rollout(oracle, policy.sampler(), b, max_len);
  return same_path(real, sim);
}

BanditOutcome bandit_meta_run(std::uint64_t seed) {
  constexpr int kPulls = 20;
  constexpr int kMetaIterations = 30;
  constexpr double kLr = 0.05;
  Rng rng(seed);
  Observation obs{};
  for (auto& v : obs) v = rng.uniform(-1.0, 1.0);
  Rng init = rng.split();
  Policy policy = Policy::initialize(init);

  auto pulls = [&](const Policy& p, int arm, Rng& r) {
    std::vector<Trajectory> out;
    for (int i = 0; i < kPulls; ++i) {
      Trajectory t(arm, Provenance::env, p.tag());
      const Action a = p.sample(obs, r);
      t.append(obs, a, static_cast<int>(a) == arm ? 1.0 : 0.0);
      t.finish(obs, TerminalKind::timeout);
      out.push_back(std::move(t));
    }
    return out;
  };

  for (int it = 0; it < kMetaIterations; ++it) {
    std::vector<PolicyTaskData> tasks;
    for (int arm = 0; arm < 2; ++arm) {
      auto train = pulls(policy, arm, rng);
      auto test = pulls(policy, arm, rng);
      tasks.push_back({std::move(train), std::move(test)});
    }
    policy = meta_step(policy, tasks, kLr, kLr);
  }

  BanditOutcome out;
  for (int arm = 0; arm < 2; ++arm) {
    out.before[arm] = policy.distribution(obs)[arm];
    const auto adapted = adapt(policy, pulls(policy, arm, rng), kLr);
    out.after[arm] = adapted.distribution(obs)[arm];
  }
  return out;
}

namespace {

bool determinism_suite() {
  Hyperparams hp;
  hp.meta_batch_size = 2;
  hp.max_rollout_len = 20;
  hp.n_iterations = 6;
  hp.switch_iteration = 3;
  auto strip = [](std::vector<TrainRecord> t) {
    for (auto& r : t) r.wall_ms = 0.0;
    return trace_csv(t);
  };
  return strip(train_dmrl(hp, 5).trace) == strip(train_dmrl(hp, 5).trace);
}

}  // namespace

bool run_selftest(std::ostream& out, const SelftestOptions& opts) {
  bool ok = true;
  const double worst = gradient_suite(opts.gradient_cases);
  const bool grad_ok = worst <= 1e-4;
  out << (grad_ok ? "PASS" : "FAIL") << "  gradient oracle: max relative error " << worst << " over "
      << opts.gradient_cases << " cases x 3 losses\n";
  ok = ok && grad_ok;

  const int mismatches = mpc_suite(opts.mpc_cases);
  out << (mismatches == 0 ? "PASS" : "FAIL") << "  mpc oracle: " << mismatches << " mismatches in "
      << opts.mpc_cases << " cases\n";
  ok = ok && mismatches == 0;

  if (opts.determinism) {
    const bool det = determinism_suite();
    out << (det ? "PASS" : "FAIL") << "  determinism: repeated seeded run reproduces the trace\n";
    ok = ok && det;
  }
  return ok;
}

}  // namespace dmrl::oracle
