#include "dmrl/policy.hpp"

#include <cmath>

namespace dmrl {

MlpSpec policy_spec() {
  return MlpSpec{kObsDim, {{64, Activation::relu}, {64, Activation::relu}},
                 static_cast<std::size_t>(kNumActions), Head::softmax};
}

Policy::Policy(MlpSpec spec, ParamVector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (spec_.input_dim != kObsDim || spec_.output_dim != static_cast<std::size_t>(kNumActions) ||
      spec_.head != Head::softmax) {
    throw ShapeError("policy: network must map 5 inputs to 4 softmax outputs");
  }
  check_same_layout(spec_.layout(), params_.layout(), "policy");
  tag_ = param_hash(params_);
}

Policy Policy::initialize(Rng& rng) {
  auto spec = policy_spec();
  auto params = init_params(spec, rng);
  return Policy(std::move(spec), std::move(params));
}

Policy Policy::zero() {
  auto spec = policy_spec();
  auto params = zero_params(spec);
  return Policy(std::move(spec), std::move(params));
}

ActionProbs Policy::distribution(const Observation& s) const {
  const auto p = forward(spec_, params_, s);
  ActionProbs out{};
  for (int i = 0; i < kNumActions; ++i) out[i] = p[i];
  return out;
}

Action Policy::sample(const Observation& s, Rng& rng) const {
  return sample_action(distribution(s), rng);
}

ActionSampler Policy::sampler() const {
  return [this](const Observation& s, Rng& rng) { return sample(s, rng); };
}

ActionProbs action_distribution(const Policy& policy, const Observation& s) {
  return policy.distribution(s);
}

Action sample_action(const ActionProbs& probs, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    c += probs[i];
    if (u < c) return static_cast<Action>(i);
  }
  return static_cast<Action>(kNumActions - 1);
}

ReturnStats return_stats(const std::vector<Trajectory>& trajs, double gamma) {
  if (trajs.empty()) throw ContractViolation("return_stats: no trajectories");
  ReturnStats st;
  st.returns.reserve(trajs.size());
  for (const auto& t : trajs) st.returns.push_back(t.discounted_return(gamma));
  const double n = static_cast<double>(trajs.size());
  double sum = 0.0;
  for (double r : st.returns) sum += r;
  st.mean = sum / n;
  double sq = 0.0;
  for (double r : st.returns) sq += (r - st.mean) * (r - st.mean);
  st.stddev = std::sqrt(sq / n);
  return st;
}

double rl_loss(const std::vector<Trajectory>& trajs, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("rl_loss: gamma must lie in [0, 1]");
  if (trajs.empty()) throw ContractViolation("rl_loss: no trajectories");
  return -return_stats(trajs, gamma).mean;
}

namespace {

// Discounted reward-to-go minus the baseline, per step.
std::vector<std::vector<double>> advantages(const std::vector<Trajectory>& trajs, double gamma,
                                            Baseline baseline) {
  std::vector<std::vector<double>> adv;
  adv.reserve(trajs.size());
  for (const auto& t : trajs) {
    std::vector<double> a(t.size());
    double g = 0.0;
    for (std::size_t i = t.size(); i-- > 0;) {
      g = t.steps()[i].reward + gamma * g;
      a[i] = g;
    }
    adv.push_back(std::move(a));
  }
  if (baseline == Baseline::batch_return) {
    const double b = return_stats(trajs, gamma).mean;
    for (auto& a : adv) {
      for (auto& v : a) v -= b;
    }
    return adv;
  }
  std::vector<double> sum, count;
  for (const auto& a : adv) {
    if (a.size() > sum.size()) {
      sum.resize(a.size(), 0.0);
      count.resize(a.size(), 0.0);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      sum[i] += a[i];
      count[i] += 1.0;
    }
  }
  for (auto& a : adv) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= sum[i] / count[i];
  }
  return adv;
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("gamma must lie in [0, 1]");
}

}  // namespace

Gradient policy_gradient(const Policy& policy, const std::vector<Trajectory>& trajs, double gamma,
                         Baseline baseline) {
  if (trajs.empty()) throw ContractViolation("policy_gradient: no trajectories");
  check_gamma(gamma);
  const auto adv = advantages(trajs, gamma, baseline);
  const double inv_n = 1.0 / static_cast<double>(trajs.size());
  Gradient grad(policy.params().layout());
  std::array<double, kNumActions> upstream{};
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto& steps = trajs[k].steps();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (adv[k][i] == 0.0) continue;
      const auto trace = forward_trace(policy.spec(), policy.params(), steps[i].obs);
      // d log softmax(z)_a / dz = onehot(a) - p
      for (int j = 0; j < kNumActions; ++j) {
        upstream[j] = (j == index_of(steps[i].action) ? 1.0 : 0.0) - trace.output[j];
      }
      accumulate_gradient(policy.spec(), policy.params(), trace, upstream, GradientSite::pre_head,
                          -adv[k][i] * inv_n, grad);
    }
  }
  return grad;
}

double policy_surrogate(const Policy& policy, const std::vector<Trajectory>& trajs, double gamma,
                        Baseline baseline) {
  if (trajs.empty()) throw ContractViolation("policy_surrogate: no trajectories");
  check_gamma(gamma);
  const auto adv = advantages(trajs, gamma, baseline);
  double s = 0.0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const auto& steps = trajs[k].steps();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto p = policy.distribution(steps[i].obs);
      s += std::log(p[static_cast<std::size_t>(index_of(steps[i].action))]) * adv[k][i];
    }
  }
  return -s / static_cast<double>(trajs.size());
}

void require_sampled_from(const Policy& policy, const std::vector<Trajectory>& trajs,
                          const char* where) {
  for (const auto& t : trajs) {
    if (t.policy_tag() && *t.policy_tag() != policy.tag()) {
      throw ContractViolation(std::string(where) +
                              ": trajectory was not sampled from the policy being updated");
    }
  }
}

Policy adapt(const Policy& policy, const std::vector<Trajectory>& trajs, double lr,
             const PolicyStepOptions& opts) {
  if (!(lr >= 0.0)) throw ContractViolation("adapt: learning rate must be >= 0");
  require_sampled_from(policy, trajs, "policy adapt");
  auto grad = policy_gradient(policy, trajs, opts.gamma, opts.baseline);
  clip_by_global_norm(grad, opts.clip_norm);
  return policy.with_params(sgd_step(policy.params(), grad, lr));
}

Policy meta_step(const Policy& policy, const std::vector<PolicyTaskData>& tasks, double inner_lr,
                 double meta_lr, const PolicyStepOptions& opts) {
  if (tasks.empty()) throw ContractViolation("meta_step: no tasks");
  Gradient meta_grad(policy.params().layout());
  const double w = 1.0 / static_cast<double>(tasks.size());
  for (const auto& task : tasks) {
    require_sampled_from(policy, task.test, "policy meta_step");
    const auto adapted = adapt(policy, task.train, inner_lr, opts);
    auto g = policy_gradient(adapted, task.test, opts.gamma, opts.baseline);
    clip_by_global_norm(g, opts.clip_norm);
    add_scaled(meta_grad, g, w);
  }
  return policy.with_params(sgd_step(policy.params(), meta_grad, meta_lr));
}

}  // namespace dmrl
