#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dmrl/checkpoint.hpp"
#include "dmrl/cli.hpp"
#include "dmrl/config.hpp"
#include "dmrl/eval.hpp"
#include "dmrl/oracles.hpp"
#include "dmrl/trainer.hpp"

namespace py = pybind11;
using namespace dmrl;

namespace {

std::vector<double> to_list(const ParamVector& p) { return {p.values().begin(), p.values().end()}; }
std::vector<double> to_list(const Gradient& g) { return {g.values().begin(), g.values().end()}; }

ParamVector from_list(const MlpSpec& spec, std::vector<double> values) {
  return ParamVector(spec.layout(), std::move(values));
}

}  // namespace

PYBIND11_MODULE(_dmrl, m) {
  m.doc() = "Double meta-RL on a windy lander: environment, networks, planners, trainers";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::enum_<Action>(m, "Action")
      .value("noop", Action::noop)
      .value("thrust_left", Action::thrust_left)
      .value("thrust_main", Action::thrust_main)
      .value("thrust_right", Action::thrust_right);
  py::enum_<TerminalKind>(m, "TerminalKind")
      .value("none", TerminalKind::none)
      .value("landed", TerminalKind::landed)
      .value("crashed", TerminalKind::crashed)
      .value("out_of_bounds", TerminalKind::out_of_bounds)
      .value("timeout", TerminalKind::timeout);
  py::enum_<Provenance>(m, "Provenance").value("env", Provenance::env).value("sim", Provenance::sim);
  py::enum_<Phase>(m, "Phase")
      .value("one", Phase::one)
      .value("two", Phase::two)
      .value("mf", Phase::mf)
      .value("mb", Phase::mb);
  py::enum_<Scenario>(m, "Scenario").value("static", Scenario::static_wind).value("sine", Scenario::sine);
  py::enum_<ArtifactKind>(m, "ArtifactKind")
      .value("policy", ArtifactKind::policy)
      .value("dynamics", ArtifactKind::dynamics);
  py::enum_<Baseline>(m, "Baseline")
      .value("batch_return", Baseline::batch_return)
      .value("per_step", Baseline::per_step);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("uniform", py::overload_cast<double, double>(&Rng::uniform), py::arg("lo") = 0.0, py::arg("hi") = 1.0)
      .def("below", &Rng::below)
      .def("next_u64", &Rng::next_u64)
      .def("split", &Rng::split);
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"), py::arg("index") = 0);

  // environment
  py::class_<TaskSpec>(m, "TaskSpec")
      .def_static("constant", &TaskSpec::constant, py::arg("wx"), py::arg("wy"))
      .def_static("sinusoidal", &TaskSpec::sinusoidal, py::arg("amp_x"), py::arg("amp_y"), py::arg("freq_x"),
                  py::arg("freq_y"))
      .def_readonly("wx", &TaskSpec::wx)
      .def_readonly("wy", &TaskSpec::wy)
      .def_property_readonly("sinusoidal_wind", [](const TaskSpec& t) { return t.kind == WindKind::sinusoidal; })
      .def("__eq__", [](const TaskSpec& a, const TaskSpec& b) { return a == b; })
      .def("__repr__", &describe);
  py::class_<LanderState>(m, "LanderState")
      .def(py::init<>())
      .def_readwrite("x", &LanderState::x)
      .def_readwrite("y", &LanderState::y)
      .def_readwrite("vx", &LanderState::vx)
      .def_readwrite("vy", &LanderState::vy)
      .def_readwrite("fuel", &LanderState::fuel)
      .def_readwrite("t", &LanderState::t)
      .def("__eq__", [](const LanderState& a, const LanderState& b) { return a == b; });
  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("next_state", &StepOutcome::next_state)
      .def_readonly("reward", &StepOutcome::reward)
      .def_readonly("terminal", &StepOutcome::terminal)
      .def_readonly("terminal_kind", &StepOutcome::terminal_kind);
  m.def("sample_task", &sample_task);
  m.def("reset", &reset, py::arg("task"), py::arg("rng"));
  m.def("step", &step, py::arg("task"), py::arg("state"), py::arg("action"),
        py::arg("max_steps") = lander::kDefaultMaxSteps);
  m.def("observe", &observe);
  m.def("wind_at", &wind_at, py::arg("task"), py::arg("t"));
  m.def("step_reward", &step_reward, py::arg("next_obs"), py::arg("action"), py::arg("kind"));

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("task_id", &Trajectory::task_id)
      .def_property_readonly("provenance", &Trajectory::provenance)
      .def_property_readonly("terminal_kind", &Trajectory::terminal_kind)
      .def_property_readonly("final_obs", &Trajectory::final_obs)
      .def_property_readonly("observations",
                             [](const Trajectory& t) {
                               std::vector<Observation> out;
                               for (const auto& s : t.steps()) out.push_back(s.obs);
                               return out;
                             })
      .def_property_readonly("actions",
                             [](const Trajectory& t) {
                               std::vector<Action> out;
                               for (const auto& s : t.steps()) out.push_back(s.action);
                               return out;
                             })
      .def_property_readonly("rewards",
                             [](const Trajectory& t) {
                               std::vector<double> out;
                               for (const auto& s : t.steps()) out.push_back(s.reward);
                               return out;
                             })
      .def("total_reward", &Trajectory::total_reward)
      .def("discounted_return", &Trajectory::discounted_return)
      .def("__len__", &Trajectory::size)
      .def("__eq__", [](const Trajectory& a, const Trajectory& b) { return a == b; });

  // networks
  py::class_<MlpSpec>(m, "MlpSpec")
      .def_property_readonly("dims",
                             [](const MlpSpec& s) {
                               std::vector<std::size_t> d{s.input_dim};
                               for (const auto& l : s.hidden) d.push_back(l.width);
                               d.push_back(s.output_dim);
                               return d;
                             })
      .def_property_readonly("head", [](const MlpSpec& s) { return to_string(s.head); })
      .def_property_readonly("param_count", &MlpSpec::param_count);
  m.def("policy_spec", &policy_spec);
  m.def("dynamics_spec", &dynamics_spec);
  m.def(
      "mlp_forward",
      [](const MlpSpec& spec, std::vector<double> params, std::vector<double> input) {
        return forward(spec, from_list(spec, std::move(params)), input);
      },
      py::arg("spec"), py::arg("params"), py::arg("input"));
  m.def(
      "mlp_backward",
      [](const MlpSpec& spec, std::vector<double> params, std::vector<double> input, std::vector<double> upstream) {
        return to_list(backward(spec, from_list(spec, std::move(params)), input, upstream));
      },
      py::arg("spec"), py::arg("params"), py::arg("input"), py::arg("upstream"));

  py::class_<Policy>(m, "Policy")
      .def_static("initialize", [](std::uint64_t seed) {
        Rng rng(seed);
        return Policy::initialize(rng);
      })
      .def_static("zero", &Policy::zero)
      .def_property_readonly("spec", &Policy::spec)
      .def_property_readonly("params", [](const Policy& p) { return to_list(p.params()); })
      .def_property_readonly("tag", &Policy::tag)
      .def("with_params", [](const Policy& p, std::vector<double> v) {
        return p.with_params(from_list(p.spec(), std::move(v)));
      })
      .def("distribution", &Policy::distribution)
      .def("sample", &Policy::sample);
  m.def("rl_loss", &rl_loss, py::arg("trajectories"), py::arg("gamma"));
  m.def(
      "policy_gradient",
      [](const Policy& p, const std::vector<Trajectory>& trajs, double gamma, Baseline b) {
        return to_list(policy_gradient(p, trajs, gamma, b));
      },
      py::arg("policy"), py::arg("trajectories"), py::arg("gamma"), py::arg("baseline") = Baseline::batch_return);
  m.def(
      "adapt_policy",
      [](const Policy& p, const std::vector<Trajectory>& trajs, double lr, double gamma, Baseline b) {
        return adapt(p, trajs, lr, {gamma, 10.0, b});
      },
      py::arg("policy"), py::arg("trajectories"), py::arg("lr"), py::arg("gamma") = 0.99,
      py::arg("baseline") = Baseline::batch_return);

  py::class_<TransitionPredictor, std::shared_ptr<TransitionPredictor>>(m, "TransitionPredictor")
      .def("predict", &TransitionPredictor::predict, py::arg("obs"), py::arg("action"), py::arg("t") = 0);
  py::class_<SimulatorOracle, TransitionPredictor, std::shared_ptr<SimulatorOracle>>(m, "SimulatorOracle")
      .def(py::init<TaskSpec>());
  py::class_<DynamicsModel, TransitionPredictor, std::shared_ptr<DynamicsModel>>(m, "DynamicsModel")
      .def_static("initialize", [](std::uint64_t seed) {
        Rng rng(seed);
        return DynamicsModel::initialize(rng);
      })
      .def_static("zero", &DynamicsModel::zero)
      .def_property_readonly("spec", &DynamicsModel::spec)
      .def_property_readonly("params", [](const DynamicsModel& d) { return to_list(d.params()); })
      .def_property_readonly("normalizer_mean", [](const DynamicsModel& d) { return d.normalizer().mean; })
      .def_property_readonly("normalizer_std", [](const DynamicsModel& d) { return d.normalizer().stddev; })
      .def("with_params", [](const DynamicsModel& d, std::vector<double> v) {
        return d.with_params(from_list(d.spec(), std::move(v)));
      });
  m.def(
      "model_loss",
      [](const DynamicsModel& d, const std::vector<Trajectory>& trajs) { return model_loss(d, transitions_of(trajs)); },
      py::arg("model"), py::arg("trajectories"));
  m.def(
      "adapt_model",
      [](const DynamicsModel& d, const std::vector<Trajectory>& trajs, double lr, int steps) {
        return adapt(d, transitions_of(trajs), lr, steps);
      },
      py::arg("model"), py::arg("trajectories"), py::arg("lr"), py::arg("steps") = 1);

  // rollouts and planning
  m.def(
      "rollout",
      [](const TaskSpec& task, const Policy& p, Rng& rng, int max_len) {
        return rollout(WindyLander(task), p.sampler(), rng, max_len, {0, p.tag()});
      },
      py::arg("task"), py::arg("policy"), py::arg("rng"), py::arg("max_len"));
  m.def(
      "simulate_rollout",
      [](const TransitionPredictor& model, const Policy& p, Rng& rng, int max_len) {
        return simulate_rollout(model, p.sampler(), rng, max_len, {0, p.tag()});
      },
      py::arg("model"), py::arg("policy"), py::arg("rng"), py::arg("max_len"));

  py::class_<PlanConfig>(m, "PlanConfig")
      .def(py::init<>())
      .def_readwrite("n_candidate", &PlanConfig::n_candidate)
      .def_readwrite("horizon", &PlanConfig::horizon)
      .def_readwrite("gamma", &PlanConfig::gamma)
      .def_readwrite("actions", &PlanConfig::actions);
  m.def(
      "score_sequence",
      [](const TransitionPredictor& model, const Observation& s0, const std::vector<Action>& seq, double gamma) {
        return score_sequence(model, s0, seq, gamma);
      },
      py::arg("model"), py::arg("s0"), py::arg("sequence"), py::arg("gamma"));
  m.def(
      "plan", [](const TransitionPredictor& model, const Observation& s0, const PlanConfig& cfg, Rng& rng) {
        return plan(model, s0, cfg, rng);
      },
      py::arg("model"), py::arg("s0"), py::arg("config"), py::arg("rng"));
  m.def(
      "mb_rollout",
      [](const TaskSpec& task, const TransitionPredictor& model, const PlanConfig& cfg, Rng& rng, int max_len) {
        return mb_rollout(WindyLander(task), model, cfg, rng, max_len);
      },
      py::arg("task"), py::arg("model"), py::arg("config"), py::arg("rng"), py::arg("max_len"));

  // training
  auto hp = py::class_<Hyperparams>(m, "Hyperparams").def(py::init<>());
  hp.def_readwrite("meta_batch_size", &Hyperparams::meta_batch_size)
      .def_readwrite("n_candidate", &Hyperparams::n_candidate)
      .def_readwrite("mpc_horizon", &Hyperparams::mpc_horizon)
      .def_readwrite("max_rollout_len", &Hyperparams::max_rollout_len)
      .def_readwrite("n_iterations", &Hyperparams::n_iterations)
      .def_readwrite("mc_trials", &Hyperparams::mc_trials)
      .def_readwrite("model_inner_lr", &Hyperparams::model_inner_lr)
      .def_readwrite("policy_inner_lr", &Hyperparams::policy_inner_lr)
      .def_readwrite("model_meta_lr", &Hyperparams::model_meta_lr)
      .def_readwrite("policy_meta_lr", &Hyperparams::policy_meta_lr)
      .def_readwrite("gamma", &Hyperparams::gamma)
      .def_readwrite("clip_norm", &Hyperparams::clip_norm)
      .def_readwrite("per_step_baseline", &Hyperparams::per_step_baseline)
      .def_readwrite("rollouts_per_task", &Hyperparams::rollouts_per_task)
      .def_readwrite("sim_rollouts_per_task", &Hyperparams::sim_rollouts_per_task)
      .def_readwrite("train_fraction", &Hyperparams::train_fraction)
      .def_readwrite("switch_iteration", &Hyperparams::switch_iteration)
      .def_readwrite("convergence_window", &Hyperparams::convergence_window)
      .def_readwrite("convergence_tol", &Hyperparams::convergence_tol)
      .def_readwrite("adaptation_budget", &Hyperparams::adaptation_budget)
      .def_readwrite("adaptation_batch", &Hyperparams::adaptation_batch)
      .def("validate", &Hyperparams::validate)
      .def("to_json", &hyperparams_to_json)
      .def_static("from_json", [](const std::string& text) {
        RunConfig cfg;
        apply_config_json(text, cfg);
        return cfg.hp;
      });

  py::class_<TrainRecord>(m, "TrainRecord")
      .def_readonly("iteration", &TrainRecord::iteration)
      .def_readonly("phase", &TrainRecord::phase)
      .def_readonly("mean_return", &TrainRecord::mean_return)
      .def_readonly("model_val_loss", &TrainRecord::model_val_loss)
      .def_readonly("env_batches", &TrainRecord::env_batches)
      .def_readonly("sim_batches", &TrainRecord::sim_batches)
      .def_readonly("wall_ms", &TrainRecord::wall_ms);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("policy", &TrainResult::policy)
      .def_readonly("model", &TrainResult::model)
      .def_readonly("trace", &TrainResult::trace)
      .def_readonly("switch_iteration", &TrainResult::switch_iteration)
      .def("trace_csv", [](const TrainResult& r) { return trace_csv(r.trace); });
  auto release = py::call_guard<py::gil_scoped_release>();
  m.def("train_dmrl", &train_dmrl, py::arg("hp"), py::arg("seed"), release);
  m.def("train_mf_baseline", &train_mf_baseline, py::arg("hp"), py::arg("seed"), release);
  m.def("train_mb_baseline", &train_mb_baseline, py::arg("hp"), py::arg("seed"), release);
  m.def("model_converged", py::overload_cast<const std::vector<double>&, int, double>(&model_converged),
        py::arg("history"), py::arg("window"), py::arg("tol"));
  m.def("convergence_index", &convergence_index, py::arg("curve"), py::arg("window"), py::arg("tol"));

  // evaluation
  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("scenario", &EvalReport::scenario)
      .def_readonly("returns", &EvalReport::returns)
      .def_readonly("mean", &EvalReport::mean)
      .def_readonly("stddev", &EvalReport::stddev)
      .def_readonly("env_rollouts", &EvalReport::env_rollouts)
      .def_readonly("batches_to_converge", &EvalReport::batches_to_converge)
      .def_readonly("return_after_convergence", &EvalReport::return_after_convergence)
      .def("csv", [](const EvalReport& r) { return eval_csv(r); });
  m.def("eval_policy_adaptation", &eval_policy_adaptation, py::arg("policy"), py::arg("scenario"), py::arg("hp"),
        py::arg("seed"), release);
  m.def("eval_model_adaptation", &eval_model_adaptation, py::arg("model"), py::arg("scenario"), py::arg("hp"),
        py::arg("seed"), release);

  // checkpoints
  m.def("save_policy", [](const std::filesystem::path& p, const Policy& pol) { save_checkpoint(p, to_checkpoint(pol)); });
  m.def("save_model", [](const std::filesystem::path& p, const DynamicsModel& d) { save_checkpoint(p, to_checkpoint(d)); });
  m.def("load_policy", [](const std::filesystem::path& p) {
    return policy_from(load_checkpoint(p, ArtifactKind::policy, policy_spec()));
  });
  m.def("load_model", [](const std::filesystem::path& p) {
    return model_from(load_checkpoint(p, ArtifactKind::dynamics, dynamics_spec()));
  });

  // front end
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"dmrl"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
  m.def(
      "selftest",
      [](int gradient_cases, int mpc_cases) {
        std::ostringstream out;
        oracle::SelftestOptions opts;
        opts.gradient_cases = gradient_cases;
        opts.mpc_cases = mpc_cases;
        const bool ok = oracle::run_selftest(out, opts);
        return py::make_tuple(ok, out.str());
      },
      py::arg("gradient_cases") = 20, py::arg("mpc_cases") = 10);
}
