#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "soro/perturbation.hpp"

namespace soro {

struct Gains {
  VecX kp_diag;      // slow Lyapunov weight K_p, all entries > 0
  double phi = 0.5;  // composite weight, 0 < phi < 1

  static Gains from_model(const RobotModel& m) { return {m.kp_diag, m.phi}; }
  void validate() const;
};

/// Desired joint trajectory; setpoints use zero derivatives.
struct Reference {
  VecX qd;
  VecX qd_dot;
  VecX qd_ddot;

  static Reference setpoint(const VecX& target);
};

struct Rates {
  double slow_dt = 1e-2;
  double fast_dt = 1e-3;
};

struct LyapunovSample {
  double t = 0.0;
  double V = 0.0;
  double W = 0.0;
  double Sigma = 0.0;
};

/// Multi-rate controller memory: held inputs and the Lyapunov log. Single
/// owner; multirate_step is the only mutator.
struct ControllerState {
  VecX held_us;
  VecX held_uf;
  double last_slow_sample_time = -std::numeric_limits<double>::infinity();
  double last_fast_sample_time = -std::numeric_limits<double>::infinity();
  std::vector<LyapunovSample> lyapunov_log;

  bool slow_due(double t, const Rates& r) const;
  bool fast_due(double t, const Rates& r) const;
};

/// e1 = z1 - qd, e2 = z2tilde - us (us is the virtual input).
std::pair<VecX, VecX> errors_of(const VecX& z1, const VecX& z2tilde,
                                const Reference& ref, const VecX& us);

/// Slow backstepping law u_s = qd_dot - e1 - 2 z2tilde.
VecX slow_control(const VecX& z1, const VecX& z2tilde, const Reference& ref);

/// Fast boundary-layer torque law
///   u_f = M^c (qd_ddot + e1) + (C^c + D) z2tilde - C^c e2 - F - N^c Ad^-1 G
/// with C^c = C1^c + C2^c, assembled at (z1, z2tilde).
VecX fast_control(const RobotModel& m, const MassSplit& split, const VecX& z1,
                  const VecX& z2tilde, const Reference& ref, const VecX& e1,
                  const VecX& e2);

/// Proof-form variant u_f = M^c (us_dot - e2) + C^c us + D z2tilde - (F + N^c Ad^-1 G);
/// equals fast_control under us_dot = qd_ddot + e1 + e2, us = z2tilde - e2.
VecX fast_control_backstep(const RobotModel& m, const MassSplit& split,
                           const VecX& z1, const VecX& z2tilde,
                           const VecX& us_dot, const VecX& us);

struct LyapunovValues {
  double V = 0.0;
  double W = 0.0;
  double Sigma = 0.0;
};

/// V = 1/2 e1' Kp e1, W = 1/2 e2' M^c(z1) e2, Sigma = (1-phi) V + phi W.
LyapunovValues lyapunov_values(const RobotModel& m, const MassSplit& split,
                               const VecX& z1, const VecX& z2tilde,
                               const Reference& ref, const VecX& us,
                               const Gains& gains);

struct MultirateOutput {
  VecX u_applied;
  double V = 0.0;
  double W = 0.0;
  double Sigma = 0.0;
  double epsilon = 0.0;  // ||M^p||_F / ||M^c||_F at the sampled state
};

/// Zero-order-hold multi-rate update: the slow law refreshes at slow sampling
/// instants (the caller refreshes z2bar first, see ControllerState::slow_due),
/// the fast law at fast instants; u_applied is the held fast torque. The fast
/// torque uses the proof-form law (fast_control_backstep) with
/// us_dot = qd_ddot + e1 - e2 from the error dynamics. Logs (t, V, W, Sigma)
/// once per fast instant.
MultirateOutput multirate_step(const RobotModel& m, const MassSplit& split,
                               ControllerState& cs, double t, const VecX& z1,
                               const VecX& z2, const VecX& z2bar,
                               const Reference& ref, const Gains& gains,
                               const Rates& rates);

}  // namespace soro
