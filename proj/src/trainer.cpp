#include "dmrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dmrl {

namespace {

constexpr std::uint64_t kStreamLoop = 1;
constexpr std::uint64_t kStreamPolicyInit = 2;
constexpr std::uint64_t kStreamModelInit = 3;

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ContractViolation(std::string("hyperparameter ") + name + " must be > 0");
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0)) throw ContractViolation(std::string("hyperparameter ") + name + " must be >= 0");
}

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Normalizer over every transition currently in the buffer.
Normalizer buffer_statistics(const DataBuffer& buffer) {
  TransitionBatch all;
  for (int id : buffer.task_ids()) {
    auto b = transitions_of(buffer.task(id));
    all.insert(all.end(), b.begin(), b.end());
  }
  return fit_normalizer(all);
}

}  // namespace

void Hyperparams::validate() const {
  require_positive(meta_batch_size, "meta_batch_size");
  require_positive(n_candidate, "n_candidate");
  require_positive(mpc_horizon, "mpc_horizon");
  require_positive(max_rollout_len, "max_rollout_len");
  require_positive(n_iterations, "n_iterations");
  require_positive(mc_trials, "mc_trials");
  require_non_negative(model_inner_lr, "model_inner_lr");
  require_non_negative(policy_inner_lr, "policy_inner_lr");
  require_non_negative(model_meta_lr, "model_meta_lr");
  require_non_negative(policy_meta_lr, "policy_meta_lr");
  require_positive(gamma, "gamma");
  if (gamma > 1.0) throw ContractViolation("hyperparameter gamma must be <= 1");
  require_positive(clip_norm, "clip_norm");
  require_positive(rollouts_per_task, "rollouts_per_task");
  require_positive(sim_rollouts_per_task, "sim_rollouts_per_task");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractViolation("hyperparameter train_fraction must lie in (0, 1)");
  }
  require_positive(model_inner_steps, "model_inner_steps");
  require_positive(phase2_model_steps, "phase2_model_steps");
  require_positive(phase2_model_stop_loss, "phase2_model_stop_loss");
  if (convergence_window < 2) throw ContractViolation("hyperparameter convergence_window must be >= 2");
  require_positive(convergence_tol, "convergence_tol");
  if (switch_iteration < 0) throw ContractViolation("hyperparameter switch_iteration must be >= 0");
  require_positive(return_window, "return_window");
  require_positive(return_tol, "return_tol");
  require_positive(adaptation_budget, "adaptation_budget");
  require_positive(adaptation_batch, "adaptation_batch");
}

PlanConfig Hyperparams::plan_config() const {
  PlanConfig cfg;
  cfg.n_candidate = n_candidate;
  cfg.horizon = mpc_horizon;
  cfg.gamma = gamma;
  return cfg;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::one: return "1";
    case Phase::two: return "2";
    case Phase::mf: return "mf";
    case Phase::mb: return "mb";
  }
  return "?";
}

bool model_converged(const std::vector<double>& history, int window, double tol) {
  if (window < 2) throw ContractViolation("model_converged: window must be >= 2");
  if (history.size() < static_cast<std::size_t>(window)) return false;
  const auto first = history.end() - window;
  const auto [lo, hi] = std::minmax_element(first, history.end());
  double mean = 0.0;
  for (auto it = first; it != history.end(); ++it) mean += *it;
  mean /= static_cast<double>(window);
  if (!std::isfinite(mean)) return false;
  if (mean == 0.0) return *hi == *lo;
  return (*hi - *lo) / std::abs(mean) <= tol;
}

Trajectory simulate_rollout(const TransitionPredictor& model, const ActionSampler& policy, Rng& rng,
                            int max_len, RolloutTag tag) {
  if (max_len < 1) throw ContractViolation("simulate_rollout: max_len must be >= 1");
  Trajectory traj(tag.task_id, Provenance::sim, tag.policy_tag);
  Observation s = observe(reset(TaskSpec{}, rng));
  for (int t = 0;; ++t) {
    const Action a = policy(s, rng);
    const Observation next = model.predict(s, a, t);
    if (!std::ranges::all_of(next, [](double v) { return std::isfinite(v); })) {
      // A diverged prediction ends the episode as out of bounds.
      traj.append(s, a, step_reward(s, a, TerminalKind::out_of_bounds));
      traj.finish(s, TerminalKind::out_of_bounds);
      return traj;
    }
    const auto kind = classify(next, t + 1, max_len);
    traj.append(s, a, step_reward(next, a, kind));
    s = next;
    if (kind != TerminalKind::none) {
      traj.finish(s, kind);
      return traj;
    }
  }
}

DmrlTrainer::DmrlTrainer(Hyperparams hp, std::uint64_t seed, bool with_model)
    : hp_(std::move(hp)),
      rng_(derive_seed(seed, kStreamLoop)),
      policy_([&] {
        Rng init(derive_seed(seed, kStreamPolicyInit));
        return Policy::initialize(init);
      }()) {
  hp_.validate();
  if (with_model) {
    Rng init(derive_seed(seed, kStreamModelInit));
    model_ = DynamicsModel::initialize(init);
  }
}

const DynamicsModel& DmrlTrainer::model() const {
  if (!model_) throw ContractViolation("this trainer runs without a dynamics model");
  return *model_;
}

bool DmrlTrainer::model_converged() const {
  return dmrl::model_converged(val_history_, hp_.convergence_window, hp_.convergence_tol);
}

TrainRecord DmrlTrainer::phase1_iteration() {
  if (phase2_) throw ContractViolation("phase1_iteration called after the phase switch");
  const Stopwatch clock;
  const SplitRule rule{hp_.train_fraction};

  std::vector<PolicyTaskData> policy_tasks;
  std::vector<ModelTaskData> model_tasks;
  std::vector<Trajectory> collected;
  for (int i = 0; i < hp_.meta_batch_size; ++i) {
    const TaskSpec task = sample_task(rng_);
    const int id = next_task_id_++;
    task_specs_[id] = task;
    const WindyLander env(task, &meter_);
    std::vector<Trajectory> trajs;
    for (int k = 0; k < hp_.rollouts_per_task; ++k) {
      trajs.push_back(rollout(env, policy_.sampler(), rng_, hp_.max_rollout_len, {id, policy_.tag()}));
    }
    for (const auto& t : trajs) {
      if (model_) buffer_.append(t);
      collected.push_back(t);
    }
    auto parts = split(trajs, rule);
    if (model_) model_tasks.push_back({transitions_of(parts.train), transitions_of(parts.test)});
    policy_tasks.push_back({std::move(parts.train), std::move(parts.test)});
  }
  env_batches_ += static_cast<std::uint64_t>(hp_.meta_batch_size);

  TrainRecord rec;
  rec.iteration = iteration_++;
  rec.phase = model_ ? Phase::one : Phase::mf;
  rec.mean_return = mean_total_reward(collected);

  policy_ = meta_step(policy_, policy_tasks, hp_.policy_inner_lr, hp_.policy_meta_lr,
                      hp_.policy_step_options());
  if (model_) {
    model_ = model_->with_normalizer(buffer_statistics(buffer_));
    auto update = meta_step(*model_, model_tasks, hp_.model_inner_lr, hp_.model_meta_lr,
                            hp_.model_inner_steps);
    model_ = std::move(update.model);
    val_history_.push_back(update.query_loss);
    rec.model_val_loss = update.query_loss;
  } else {
    rec.model_val_loss = std::numeric_limits<double>::quiet_NaN();
  }
  rec.env_batches = env_batches_;
  rec.sim_batches = sim_batches_;
  rec.wall_ms = clock.elapsed_ms();
  return rec;
}

void DmrlTrainer::switch_to_phase2() {
  if (!model_) throw ContractViolation("the model-free trainer has no second phase");
  if (buffer_.empty()) throw ContractViolation("phase switch with an empty data buffer");
  buffer_.freeze();
  meter_.seal();
  phase2_ = true;
}

TrainRecord DmrlTrainer::phase2_iteration() {
  if (!phase2_) throw ContractViolation("phase2_iteration called before the phase switch");
  const Stopwatch clock;
  const SplitRule rule{hp_.train_fraction};
  const auto ids = buffer_.task_ids();

  std::vector<PolicyTaskData> policy_tasks;
  std::vector<Trajectory> simulated;
  double support_loss = 0.0;
  for (int i = 0; i < hp_.meta_batch_size; ++i) {
    const int id = ids[rng_.below(ids.size())];
    const auto data = transitions_of(buffer_.task(id));
    std::shared_ptr<const TransitionPredictor> sim;
    if (provider_) {
      sim = provider_(id, task_specs_.at(id), data);
    } else {
      auto adapted = adapt(*model_, data, hp_.model_inner_lr, hp_.phase2_model_steps,
                           hp_.phase2_model_stop_loss);
      support_loss += model_loss(adapted, data) / hp_.meta_batch_size;
      sim = std::make_shared<DynamicsModel>(std::move(adapted));
    }
    std::vector<Trajectory> trajs;
    for (int k = 0; k < hp_.sim_rollouts_per_task; ++k) {
      trajs.push_back(
          simulate_rollout(*sim, policy_.sampler(), rng_, hp_.max_rollout_len, {id, policy_.tag()}));
    }
    simulated.insert(simulated.end(), trajs.begin(), trajs.end());
    auto parts = split(trajs, rule);
    policy_tasks.push_back({std::move(parts.train), std::move(parts.test)});
  }
  sim_batches_ += static_cast<std::uint64_t>(hp_.meta_batch_size);

  TrainRecord rec;
  rec.iteration = iteration_++;
  rec.phase = Phase::two;
  rec.mean_return = mean_total_reward(simulated);
  rec.model_val_loss = provider_ ? std::numeric_limits<double>::quiet_NaN() : support_loss;

  policy_ = meta_step(policy_, policy_tasks, hp_.policy_inner_lr, hp_.policy_meta_lr,
                      hp_.policy_step_options());
  rec.env_batches = env_batches_;
  rec.sim_batches = sim_batches_;
  rec.wall_ms = clock.elapsed_ms();
  return rec;
}

TrainResult train_dmrl(const Hyperparams& hp, std::uint64_t seed) {
  DmrlTrainer trainer(hp, seed, true);
  TrainResult result{trainer.policy(), std::nullopt, {}, -1};
  for (int it = 0; it < hp.n_iterations; ++it) {
    if (!trainer.in_phase2()) {
      const bool switch_now = hp.switch_iteration > 0 ? it >= hp.switch_iteration
                                                      : trainer.model_converged();
      if (switch_now) {
        trainer.switch_to_phase2();
        result.switch_iteration = it;
      }
    }
    result.trace.push_back(trainer.in_phase2() ? trainer.phase2_iteration()
                                               : trainer.phase1_iteration());
  }
  result.policy = trainer.policy();
  result.model = trainer.model();
  return result;
}

TrainResult train_mf_baseline(const Hyperparams& hp, std::uint64_t seed) {
  DmrlTrainer trainer(hp, seed, false);
  TrainResult result{trainer.policy(), std::nullopt, {}, -1};
  for (int it = 0; it < hp.n_iterations; ++it) result.trace.push_back(trainer.phase1_iteration());
  result.policy = trainer.policy();
  return result;
}

MbTrainer::MbTrainer(Hyperparams hp, std::uint64_t seed)
    : hp_(std::move(hp)), rng_(derive_seed(seed, kStreamLoop)), model_([&] {
        Rng init(derive_seed(seed, kStreamModelInit));
        return DynamicsModel::initialize(init);
      }()) {
  hp_.validate();
}

TrainRecord MbTrainer::iteration() {
  const Stopwatch clock;
  const SplitRule rule{hp_.train_fraction};
  const auto cfg = hp_.plan_config();

  std::vector<std::vector<Trajectory>> per_task;
  std::vector<Trajectory> collected;
  for (int i = 0; i < hp_.meta_batch_size; ++i) {
    const TaskSpec task = sample_task(rng_);
    const int id = next_task_id_++;
    const WindyLander env(task, &meter_);
    std::vector<Trajectory> trajs;
    for (int k = 0; k < hp_.rollouts_per_task; ++k) {
      trajs.push_back(mb_rollout(env, model_, cfg, rng_, hp_.max_rollout_len, id));
    }
    for (const auto& t : trajs) {
      buffer_.append(t);
      collected.push_back(t);
    }
    per_task.push_back(std::move(trajs));
  }
  env_batches_ += static_cast<std::uint64_t>(hp_.meta_batch_size);

  model_ = model_.with_normalizer(buffer_statistics(buffer_));
  std::vector<ModelTaskData> tasks;
  for (const auto& trajs : per_task) {
    const auto parts = split(trajs, rule);
    tasks.push_back({transitions_of(parts.train), transitions_of(parts.test)});
  }
  auto update = meta_step(model_, tasks, hp_.model_inner_lr, hp_.model_meta_lr, hp_.model_inner_steps);
  model_ = std::move(update.model);

  TrainRecord rec;
  rec.iteration = iteration_++;
  rec.phase = Phase::mb;
  rec.mean_return = mean_total_reward(collected);
  rec.model_val_loss = update.query_loss;
  rec.env_batches = env_batches_;
  rec.sim_batches = 0;
  rec.wall_ms = clock.elapsed_ms();
  return rec;
}

TrainResult train_mb_baseline(const Hyperparams& hp, std::uint64_t seed) {
  MbTrainer trainer(hp, seed);
  // the baseline trains no policy; carry a placeholder so the result type is shared
  TrainResult result{Policy::zero(), std::nullopt, {}, -1};
  for (int it = 0; it < hp.n_iterations; ++it) result.trace.push_back(trainer.iteration());
  result.model = trainer.model();
  return result;
}

int convergence_index(const std::vector<double>& curve, int window, double tol) {
  if (window < 1) throw ContractViolation("convergence_index: window must be >= 1");
  const auto n = static_cast<int>(curve.size());
  if (n < window) return -1;
  auto window_mean = [&](int end) {
    double s = 0.0;
    for (int i = end - window + 1; i <= end; ++i) s += curve[static_cast<std::size_t>(i)];
    return s / window;
  };
  const double final_mean = window_mean(n - 1);
  const double band = tol * std::max(std::abs(final_mean), 1.0);
  int idx = n - 1;
  while (idx > window - 1 && std::abs(window_mean(idx - 1) - final_mean) <= band) --idx;
  return idx;
}

ConvergenceSummary summarize(const std::vector<TrainRecord>& trace, int window, double tol) {
  ConvergenceSummary s;
  if (trace.empty()) return s;
  std::vector<double> returns;
  returns.reserve(trace.size());
  for (const auto& r : trace) returns.push_back(r.mean_return);
  const int w = std::min<int>(window, static_cast<int>(returns.size()));
  const int idx = convergence_index(returns, w, tol);
  double tail = 0.0;
  for (std::size_t i = returns.size() - static_cast<std::size_t>(w); i < returns.size(); ++i) tail += returns[i];
  s.return_after_convergence = tail / w;
  s.iterations_to_converge = idx + 1;
  s.env_batches_to_converge = trace[static_cast<std::size_t>(idx)].env_batches;
  return s;
}

}  // namespace dmrl
