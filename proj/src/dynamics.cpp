#include "dmrl/dynamics.hpp"

#include <climits>
#include <cmath>

namespace dmrl {

ModelInput encode_model_input(const Observation& s, Action a) {
  ModelInput in{};
  for (std::size_t i = 0; i < kObsDim; ++i) in[i] = s[i];
  in[kObsDim + static_cast<std::size_t>(index_of(a))] = 1.0;
  return in;
}

Normalizer Normalizer::identity() {
  Normalizer n;
  n.mean.fill(0.0);
  n.stddev.fill(1.0);
  return n;
}

ModelInput Normalizer::apply(const ModelInput& in) const {
  ModelInput out{};
  for (std::size_t i = 0; i < kModelInputDim; ++i) out[i] = (in[i] - mean[i]) / stddev[i];
  return out;
}

TransitionBatch transitions_of(const Trajectory& traj) {
  TransitionBatch batch;
  batch.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    batch.push_back({traj.steps()[i].obs, traj.steps()[i].action, traj.next_obs(i)});
  }
  return batch;
}

TransitionBatch transitions_of(const std::vector<Trajectory>& trajs) {
  TransitionBatch batch;
  for (const auto& t : trajs) {
    auto b = transitions_of(t);
    batch.insert(batch.end(), b.begin(), b.end());
  }
  return batch;
}

Normalizer fit_normalizer(const TransitionBatch& batch) {
  Normalizer n = Normalizer::identity();
  if (batch.empty()) return n;
  const double count = static_cast<double>(batch.size());
  std::array<double, kModelInputDim> sum{};
  std::array<double, kModelInputDim> sq{};
  for (const auto& tr : batch) {
    const auto in = encode_model_input(tr.s, tr.a);
    for (std::size_t i = 0; i < kModelInputDim; ++i) sum[i] += in[i];
  }
  for (std::size_t i = 0; i < kModelInputDim; ++i) n.mean[i] = sum[i] / count;
  for (const auto& tr : batch) {
    const auto in = encode_model_input(tr.s, tr.a);
    for (std::size_t i = 0; i < kModelInputDim; ++i) {
      const double d = in[i] - n.mean[i];
      sq[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < kModelInputDim; ++i) {
    const double sd = std::sqrt(sq[i] / count);
    n.stddev[i] = sd < 1e-6 ? 1.0 : sd;
  }
  return n;
}

MlpSpec dynamics_spec() {
  return MlpSpec{kModelInputDim, {{64, Activation::relu}, {32, Activation::relu}}, kObsDim,
                 Head::linear};
}

DynamicsModel::DynamicsModel(MlpSpec spec, ParamVector params, Normalizer norm)
    : spec_(std::move(spec)), params_(std::move(params)), norm_(norm) {
  spec_.validate();
  if (spec_.input_dim != kModelInputDim || spec_.output_dim != kObsDim ||
      spec_.head != Head::linear) {
    throw ShapeError("dynamics model: network must map 9 inputs to 5 outputs with a linear head");
  }
  check_same_layout(spec_.layout(), params_.layout(), "dynamics model");
}

DynamicsModel DynamicsModel::initialize(Rng& rng) {
  auto spec = dynamics_spec();
  auto params = init_params(spec, rng);
  return DynamicsModel(std::move(spec), std::move(params));
}

DynamicsModel DynamicsModel::zero() {
  auto spec = dynamics_spec();
  auto params = zero_params(spec);
  return DynamicsModel(std::move(spec), std::move(params));
}

DynamicsModel DynamicsModel::with_params(ParamVector params) const {
  return DynamicsModel(spec_, std::move(params), norm_);
}

DynamicsModel DynamicsModel::with_normalizer(const Normalizer& norm) const {
  return DynamicsModel(spec_, params_, norm);
}

Observation DynamicsModel::predict(const Observation& s, Action a, int) const {
  const auto in = norm_.apply(encode_model_input(s, a));
  const auto delta = forward(spec_, params_, in);
  Observation next{};
  for (std::size_t i = 0; i < kObsDim; ++i) next[i] = s[i] + delta[i];
  return next;
}

Observation predict_next(const DynamicsModel& model, const Observation& s, Action a) {
  return model.predict(s, a, 0);
}

double model_loss(const DynamicsModel& model, const TransitionBatch& batch) {
  if (batch.empty()) throw ContractViolation("model_loss: empty transition batch");
  double total = 0.0;
  for (const auto& tr : batch) {
    const auto pred = model.predict(tr.s, tr.a, 0);
    for (std::size_t i = 0; i < kObsDim; ++i) {
      const double e = tr.next[i] - pred[i];
      total += e * e;
    }
  }
  return total / static_cast<double>(batch.size());
}

Gradient model_loss_gradient(const DynamicsModel& model, const TransitionBatch& batch) {
  if (batch.empty()) throw ContractViolation("model_loss: empty transition batch");
  Gradient grad(model.params().layout());
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::array<double, kObsDim> upstream{};
  for (const auto& tr : batch) {
    const auto in = model.normalizer().apply(encode_model_input(tr.s, tr.a));
    const auto trace = forward_trace(model.spec(), model.params(), in);
    // d/d out of |next - s - out|^2
    for (std::size_t i = 0; i < kObsDim; ++i) {
      upstream[i] = 2.0 * (tr.s[i] + trace.output[i] - tr.next[i]);
    }
    accumulate_gradient(model.spec(), model.params(), trace, upstream, GradientSite::output, scale,
                        grad);
  }
  return grad;
}

DynamicsModel adapt(const DynamicsModel& model, const TransitionBatch& support, double lr,
                    int steps, double stop_below) {
  if (steps < 1) throw ContractViolation("adapt: steps must be >= 1");
  if (!(lr >= 0.0)) throw ContractViolation("adapt: learning rate must be >= 0");
  DynamicsModel current = model;
  for (int k = 0; k < steps; ++k) {
    if (model_loss(current, support) < stop_below) break;
    current = current.with_params(sgd_step(current.params(), model_loss_gradient(current, support), lr));
  }
  return current;
}

ModelMetaUpdate meta_step(const DynamicsModel& model, const std::vector<ModelTaskData>& tasks,
                          double inner_lr, double meta_lr, int inner_steps) {
  if (tasks.empty()) throw ContractViolation("meta_step: no tasks");
  Gradient meta_grad(model.params().layout());
  double query_loss = 0.0;
  const double w = 1.0 / static_cast<double>(tasks.size());
  for (const auto& task : tasks) {
    const auto adapted = adapt(model, task.support, inner_lr, inner_steps);
    query_loss += w * model_loss(adapted, task.query);
    add_scaled(meta_grad, model_loss_gradient(adapted, task.query), w);
  }
  return {model.with_params(sgd_step(model.params(), meta_grad, meta_lr)), query_loss};
}

Observation SimulatorOracle::predict(const Observation& s, Action a, int t) const {
  LanderState state;
  state.x = s[0];
  state.y = s[1];
  state.vx = s[2];
  state.vy = s[3];
  // fuel is integral in the simulator, so rounding recovers it exactly
  state.fuel = std::round(s[4] * lander::kInitialFuel);
  state.t = t;
  return observe(step(task_, state, a, INT_MAX).next_state);
}

}  // namespace dmrl
