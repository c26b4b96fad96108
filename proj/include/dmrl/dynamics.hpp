#pragma once

#include <array>
#include <limits>
#include <vector>

#include "dmrl/lander.hpp"
#include "dmrl/mlp.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

// Model input is the observation followed by a one-hot action code.
inline constexpr std::size_t kModelInputDim = kObsDim + kNumActions;
using ModelInput = std::array<double, kModelInputDim>;

ModelInput encode_model_input(const Observation& s, Action a);

// Per-feature standardization of model inputs.
struct Normalizer {
  std::array<double, kModelInputDim> mean{};
  std::array<double, kModelInputDim> stddev{};

  static Normalizer identity();
  ModelInput apply(const ModelInput& in) const;
  bool operator==(const Normalizer&) const = default;
};

struct TransitionSample {
  Observation s;
  Action a = Action::noop;
  Observation next;
};
using TransitionBatch = std::vector<TransitionSample>;

TransitionBatch transitions_of(const std::vector<Trajectory>& trajs);
TransitionBatch transitions_of(const Trajectory& traj);

// Mean/std over the batch's inputs; features with std below 1e-6 keep std 1.
Normalizer fit_normalizer(const TransitionBatch& batch);

// Anything that maps (s, a) to a next observation; `t` is the step index of s.
class TransitionPredictor {
 public:
  virtual ~TransitionPredictor() = default;
  virtual Observation predict(const Observation& s, Action a, int t) const = 0;
};

// 9 -> 64 -> 32 -> 5, relu hidden layers, linear head.
MlpSpec dynamics_spec();

// Residual next-state model: s' = s + f_theta(normalize(s ++ onehot(a))).
class DynamicsModel final : public TransitionPredictor {
 public:
  DynamicsModel(MlpSpec spec, ParamVector params, Normalizer norm = Normalizer::identity());

  static DynamicsModel initialize(Rng& rng);
  static DynamicsModel zero();

  const MlpSpec& spec() const { return spec_; }
  const ParamVector& params() const { return params_; }
  const Normalizer& normalizer() const { return norm_; }

  DynamicsModel with_params(ParamVector params) const;
  DynamicsModel with_normalizer(const Normalizer& norm) const;

  Observation predict(const Observation& s, Action a, int t) const override;

 private:
  MlpSpec spec_;
  ParamVector params_;
  Normalizer norm_;
};

Observation predict_next(const DynamicsModel& model, const Observation& s, Action a);

// Mean squared L2 one-step prediction error. Throws ContractViolation when empty.
double model_loss(const DynamicsModel& model, const TransitionBatch& batch);
Gradient model_loss_gradient(const DynamicsModel& model, const TransitionBatch& batch);

// `steps` gradient steps on the support loss; stops early once the support
// loss drops below `stop_below`. The input model is not modified.
DynamicsModel adapt(const DynamicsModel& model, const TransitionBatch& support, double lr,
                    int steps, double stop_below = -std::numeric_limits<double>::infinity());

struct ModelTaskData {
  TransitionBatch support;
  TransitionBatch query;
};

struct ModelMetaUpdate {
  DynamicsModel model;
  // mean over tasks of the query loss at the adapted parameters
  double query_loss = 0.0;
};

// First-order MAML update of theta.
ModelMetaUpdate meta_step(const DynamicsModel& model, const std::vector<ModelTaskData>& tasks,
                          double inner_lr, double meta_lr, int inner_steps = 1);

// The true simulator behind the predictor interface. Used as a perfect model.
class SimulatorOracle final : public TransitionPredictor {
 public:
  explicit SimulatorOracle(TaskSpec task) : task_(task) {}
  Observation predict(const Observation& s, Action a, int t) const override;

 private:
  TaskSpec task_;
};

}  // namespace dmrl
