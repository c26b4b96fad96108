#include "dmrl/lander.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dmrl {

using namespace lander;

Action action_from_index(int code) {
  if (code < 0 || code >= kNumActions) {
    throw ContractViolation("action code " + std::to_string(code) + " out of range");
  }
  return static_cast<Action>(code);
}

TaskSpec TaskSpec::constant(double wx, double wy) {
  if (!(std::abs(wx) <= kMaxTrainWind) || !(std::abs(wy) <= kMaxTrainWind)) {
    throw ContractViolation("constant wind components must lie in [-2, 2]");
  }
  TaskSpec t;
  t.kind = WindKind::constant;
  t.wx = wx;
  t.wy = wy;
  return t;
}

TaskSpec TaskSpec::sinusoidal(double amp_x, double amp_y, double freq_x, double freq_y) {
  TaskSpec t;
  t.kind = WindKind::sinusoidal;
  t.amp_x = amp_x;
  t.amp_y = amp_y;
  t.freq_x = freq_x;
  t.freq_y = freq_y;
  return t;
}

std::string describe(const TaskSpec& task) {
  std::ostringstream os;
  if (task.kind == WindKind::constant) {
    os << "constant(" << task.wx << ", " << task.wy << ")";
  } else {
    os << "sinusoidal(A=" << task.amp_x << "/" << task.amp_y << ", f=" << task.freq_x << "/"
       << task.freq_y << ")";
  }
  return os.str();
}

std::string to_string(TerminalKind k) {
  switch (k) {
    case TerminalKind::none: return "none";
    case TerminalKind::landed: return "landed";
    case TerminalKind::crashed: return "crashed";
    case TerminalKind::out_of_bounds: return "out_of_bounds";
    case TerminalKind::timeout: return "timeout";
  }
  return "?";
}

TaskSpec sample_task(Rng& rng) {
  const double wx = rng.uniform(-kMaxTrainWind, kMaxTrainWind);
  const double wy = rng.uniform(-kMaxTrainWind, kMaxTrainWind);
  return TaskSpec::constant(wx, wy);
}

LanderState reset(const TaskSpec&, Rng& rng) {
  LanderState s;
  s.x = rng.uniform(-kSpawnHalfWidth, kSpawnHalfWidth);
  s.y = kInitialHeight;
  s.fuel = kInitialFuel;
  return s;
}

std::pair<double, double> wind_at(const TaskSpec& task, int t) {
  if (task.kind == WindKind::constant) return {task.wx, task.wy};
  const double time = static_cast<double>(t) * kDt;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return {task.amp_x * std::sin(two_pi * task.freq_x * time),
          task.amp_y * std::sin(two_pi * task.freq_y * time)};
}

Observation observe(const LanderState& s) {
  return {s.x, s.y, s.vx, s.vy, s.fuel / kInitialFuel};
}

TerminalKind classify(const Observation& next, int next_t, int max_steps) {
  const double x = next[0];
  const double y = next[1];
  if (y <= 0.0) {
    const double speed = std::hypot(next[2], next[3]);
    return (std::abs(x) <= kPadHalfWidth && speed <= kSafeSpeed) ? TerminalKind::landed
                                                                  : TerminalKind::crashed;
  }
  if (std::abs(x) > kBoundsHalfWidth) return TerminalKind::out_of_bounds;
  if (next_t >= max_steps) return TerminalKind::timeout;
  return TerminalKind::none;
}

double step_reward(const Observation& next, Action action, TerminalKind kind) {
  double r = -kShapingWeight * (std::abs(next[0]) + std::abs(next[2]) + std::abs(next[3]));
  if (is_thrust(action)) r -= kThrustCost;
  if (kind == TerminalKind::landed) r += kTerminalBonus;
  if (kind == TerminalKind::crashed || kind == TerminalKind::out_of_bounds) r -= kTerminalBonus;
  return r;
}

StepOutcome step(const TaskSpec& task, const LanderState& state, Action action, int max_steps) {
  const auto pre = classify(observe(state), state.t, max_steps);
  if (pre != TerminalKind::none) {
    throw ContractViolation("step called on a terminal state (" + to_string(pre) + ")");
  }

  double thrust_x = 0.0;
  double thrust_y = 0.0;
  const bool fires = is_thrust(action) && state.fuel > 0.0;
  if (fires) {
    switch (action) {
      case Action::thrust_main: thrust_y = kMainThrust; break;
      case Action::thrust_left: thrust_x = kSideThrust; break;
      case Action::thrust_right: thrust_x = -kSideThrust; break;
      case Action::noop: break;
    }
  }
  const auto [wx, wy] = wind_at(task, state.t);
  const double ax = thrust_x + kDrag * (wx - state.vx);
  const double ay = -kGravity + thrust_y + kDrag * (wy - state.vy);

  StepOutcome out;
  LanderState& n = out.next_state;
  n.vx = state.vx + ax * kDt;
  n.vy = state.vy + ay * kDt;
  n.x = state.x + n.vx * kDt;
  n.y = state.y + n.vy * kDt;
  n.fuel = fires ? state.fuel - 1.0 : state.fuel;
  n.t = state.t + 1;

  const auto obs = observe(n);
  out.terminal_kind = classify(obs, n.t, max_steps);
  out.terminal = out.terminal_kind != TerminalKind::none;
  out.reward = step_reward(obs, action, out.terminal_kind);
  return out;
}

LanderState WindyLander::reset(Rng& rng) const {
  if (meter_) meter_->record_rollout();
  return dmrl::reset(task_, rng);
}

StepOutcome WindyLander::step(const LanderState& state, Action action, int max_steps) const {
  if (meter_) meter_->record_step();
  return dmrl::step(task_, state, action, max_steps);
}

}  // namespace dmrl
