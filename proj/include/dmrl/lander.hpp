#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "dmrl/errors.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

// Planar lander with four discrete thrusters under a wind process.
namespace lander {
inline constexpr double kDt = 0.1;
inline constexpr double kGravity = 1.0;
inline constexpr double kDrag = 0.5;
inline constexpr double kMainThrust = 2.0;
inline constexpr double kSideThrust = 1.0;
inline constexpr double kInitialHeight = 10.0;
inline constexpr double kInitialFuel = 100.0;
inline constexpr double kSpawnHalfWidth = 0.5;
inline constexpr double kPadHalfWidth = 1.0;
inline constexpr double kSafeSpeed = 1.0;
inline constexpr double kBoundsHalfWidth = 10.0;
inline constexpr double kMaxTrainWind = 2.0;
inline constexpr double kShapingWeight = 0.01;
inline constexpr double kThrustCost = 0.05;
inline constexpr double kTerminalBonus = 100.0;
inline constexpr int kDefaultMaxSteps = 150;
}  // namespace lander

enum class Action : int { noop = 0, thrust_left = 1, thrust_main = 2, thrust_right = 3 };
inline constexpr int kNumActions = 4;

// (x, y, vx, vy, fuel / 100): what learners see. The step index and the
// wind are hidden.
inline constexpr std::size_t kObsDim = 5;
using Observation = std::array<double, kObsDim>;

Action action_from_index(int code);
inline int index_of(Action a) { return static_cast<int>(a); }
inline bool is_thrust(Action a) { return a != Action::noop; }

enum class WindKind { constant, sinusoidal };

struct TaskSpec {
  WindKind kind = WindKind::constant;
  double wx = 0.0;
  double wy = 0.0;
  // sinusoidal only: amplitudes (m/s) and frequencies (Hz)
  double amp_x = 0.0;
  double amp_y = 0.0;
  double freq_x = 0.0;
  double freq_y = 0.0;

  // Throws ContractViolation when a component lies outside [-2, 2].
  static TaskSpec constant(double wx, double wy);
  static TaskSpec sinusoidal(double amp_x, double amp_y, double freq_x, double freq_y);

  bool operator==(const TaskSpec&) const = default;
};

std::string describe(const TaskSpec& task);

struct LanderState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double fuel = 0.0;
  int t = 0;
  bool operator==(const LanderState&) const = default;
};

enum class TerminalKind { none, landed, crashed, out_of_bounds, timeout };
std::string to_string(TerminalKind k);

struct StepOutcome {
  LanderState next_state;
  double reward = 0.0;
  bool terminal = false;
  TerminalKind terminal_kind = TerminalKind::none;
};

// Training task distribution: constant wind, each component ~ U[-2, 2].
TaskSpec sample_task(Rng& rng);

LanderState reset(const TaskSpec& task, Rng& rng);

std::pair<double, double> wind_at(const TaskSpec& task, int t);

// One semi-implicit Euler step. Throws ContractViolation for a terminal input
// state. A thrust action with an empty tank applies no force.
StepOutcome step(const TaskSpec& task, const LanderState& state, Action action,
                 int max_steps = lander::kDefaultMaxSteps);

Observation observe(const LanderState& s);

// Terminal classification and reward as functions of the post-step
// observation; shared by the simulator and model-predicted rollouts.
TerminalKind classify(const Observation& next, int next_t, int max_steps);
double step_reward(const Observation& next, Action action, TerminalKind kind);

// Counts environment steps and can be sealed so that any further step is a
// hard error. The trainer seals it while learning from simulated data.
class EnvMeter {
 public:
  void record_step() {
    if (sealed_) throw ContractViolation("environment stepped while access is sealed");
    ++steps_;
  }
  void record_rollout() {
    if (sealed_) throw ContractViolation("environment rollout while access is sealed");
    ++rollouts_;
  }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t rollouts() const { return rollouts_; }
  void seal() { sealed_ = true; }
  void unseal() { sealed_ = false; }
  bool sealed() const { return sealed_; }

 private:
  std::uint64_t steps_ = 0;
  std::uint64_t rollouts_ = 0;
  bool sealed_ = false;
};

// A task bound to an optional meter; the unit rollout workers hold.
class WindyLander {
 public:
  explicit WindyLander(TaskSpec task, EnvMeter* meter = nullptr) : task_(task), meter_(meter) {}

  const TaskSpec& task() const { return task_; }
  LanderState reset(Rng& rng) const;
  StepOutcome step(const LanderState& state, Action action, int max_steps) const;

 private:
  TaskSpec task_;
  EnvMeter* meter_;
};

}  // namespace dmrl
