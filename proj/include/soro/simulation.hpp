#pragma once

#include <functional>

#include "soro/control.hpp"

namespace soro {

struct Toggles {
  bool gravity = true;
  bool drag = true;
  bool viscosity = true;
  bool tip_load = true;
};

struct Scenario {
  RobotModel model;
  JointState initial_state;
  Reference reference;
  double duration = 5.0;
  double fast_dt = 1e-3;
  double slow_dt = 1e-2;
  Toggles toggles;
  unsigned long seed = 0;
  double initial_perturbation = 0.0;  // seeded bending deviation per section
  // Replace the initial strain rate with the quasi-steady velocity at q(0),
  // which places the plant on the slow manifold and leaves the boundary
  // layer unexcited.
  bool start_on_manifold = false;

  /// Defaults from the config: rest setpoint reference, seeded initial
  /// bending perturbation of the configured amplitude.
  static Scenario from_model(const RobotModel& m);
};

/// Model with the scenario toggles folded in (zeroed gravity, drag
/// coefficient, viscosity modulus, or tip load).
RobotModel effective_model(const Scenario& sc);

struct TrajectorySample {
  double t = 0.0;
  VecX q, qd, qdot, z2bar, z2tilde, us, uf, e1, e2;
  double V = 0.0, W = 0.0, Sigma = 0.0, epsilon = 0.0;
};

struct Trajectory {
  int dof = 0;
  std::vector<TrajectorySample> samples;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using RhsFn = std::function<VecX(double t, const VecX& y)>;

/// Classical 4th-order Runge-Kutta step; controller inputs are held constant
/// inside the step by the caller (zero-order hold). Throws IntegrationError
/// when the rhs produces non-finite values.
VecX rk4_step(const VecX& state, double t, double dt, const RhsFn& rhs);

/// Full-plant closed-loop run under the layered controller; records every
/// fast-step sample. Deterministic given the scenario (including seed).
Trajectory run_closed_loop(const Scenario& sc);

/// Open-loop run (u = 0); controller columns are recorded as zeros.
Trajectory run_passive(const Scenario& sc);

/// Kinetic plus elastic energy at a state; drag/viscosity/gravity/tip load
/// are not part of this functional.
double total_energy(const RobotModel& m, const JointState& state);

}  // namespace soro
