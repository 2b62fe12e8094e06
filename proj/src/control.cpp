#include "soro/control.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace soro {

namespace {

constexpr double kDueTol = 1e-9;

struct CoreEval {
  SplitTerms st;
  MatX c_breve;  // C1^c + C2^c
  MatX d_full;
  VecX load_ff;  // F + N^c Ad^-1 G
};

CoreEval eval_core(const RobotModel& m, const MassSplit& split, const VecX& z1,
                   const VecX& z2tilde) {
  CoreEval e;
  e.st = assemble_split(m, JointState{z1, z2tilde}, split.core_mask, split.pert_mask);
  e.c_breve = e.st.core.coriolis1 + e.st.core.coriolis2;
  e.d_full = e.st.core.drag + e.st.pert.drag;
  e.load_ff = e.st.core.tip_force + e.st.core.buoyancy * m.gravity_in_base();
  return e;
}

}  // namespace

void Gains::validate() const {
  if ((kp_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("all K_p entries must be positive");
  }
  if (!(phi > 0.0 && phi < 1.0)) {
    throw std::invalid_argument("phi must lie in (0, 1)");
  }
}

Reference Reference::setpoint(const VecX& target) {
  Reference r;
  r.qd = target;
  r.qd_dot = VecX::Zero(target.size());
  r.qd_ddot = VecX::Zero(target.size());
  return r;
}

bool ControllerState::slow_due(double t, const Rates& r) const {
  return t >= last_slow_sample_time + r.slow_dt - kDueTol * r.slow_dt;
}

bool ControllerState::fast_due(double t, const Rates& r) const {
  return t >= last_fast_sample_time + r.fast_dt - kDueTol * r.fast_dt;
}

std::pair<VecX, VecX> errors_of(const VecX& z1, const VecX& z2tilde,
                                const Reference& ref, const VecX& us) {
  return {z1 - ref.qd, z2tilde - us};
}

VecX slow_control(const VecX& z1, const VecX& z2tilde, const Reference& ref) {
  return ref.qd_dot - (z1 - ref.qd) - 2.0 * z2tilde;
}

VecX fast_control(const RobotModel& m, const MassSplit& split, const VecX& z1,
                  const VecX& z2tilde, const Reference& ref, const VecX& e1,
                  const VecX& e2) {
  const CoreEval e = eval_core(m, split, z1, z2tilde);
  return e.st.core.mass * (ref.qd_ddot + e1) + (e.c_breve + e.d_full) * z2tilde -
         e.c_breve * e2 - e.load_ff;
}

VecX fast_control_backstep(const RobotModel& m, const MassSplit& split,
                           const VecX& z1, const VecX& z2tilde,
                           const VecX& us_dot, const VecX& us) {
  const CoreEval e = eval_core(m, split, z1, z2tilde);
  const VecX e2 = z2tilde - us;
  return e.st.core.mass * (us_dot - e2) + e.c_breve * us + e.d_full * z2tilde -
         e.load_ff;
}

LyapunovValues lyapunov_values(const RobotModel& m, const MassSplit& split,
                               const VecX& z1, const VecX& z2tilde,
                               const Reference& ref, const VecX& us,
                               const Gains& gains) {
  gains.validate();
  const auto [e1, e2] = errors_of(z1, z2tilde, ref, us);
  const SplitTerms st = assemble_split(m, JointState{z1, VecX::Zero(z1.size())},
                                       split.core_mask, split.pert_mask);
  Eigen::LLT<MatX> llt(st.core.mass);
  if (llt.info() != Eigen::Success) {
    throw AssemblyError("lyapunov_values: core mass matrix not SPD");
  }
  LyapunovValues v;
  v.V = 0.5 * e1.dot(gains.kp_diag.asDiagonal() * e1);
  v.W = 0.5 * e2.dot(st.core.mass * e2);
  v.Sigma = (1.0 - gains.phi) * v.V + gains.phi * v.W;
  return v;
}

MultirateOutput multirate_step(const RobotModel& m, const MassSplit& split,
                               ControllerState& cs, double t, const VecX& z1,
                               const VecX& z2, const VecX& z2bar,
                               const Reference& ref, const Gains& gains,
                               const Rates& rates) {
  if (rates.fast_dt > rates.slow_dt) {
    throw std::invalid_argument("fast_dt must not exceed slow_dt");
  }
  const int dof = static_cast<int>(z1.size());
  if (cs.held_us.size() != dof) cs.held_us = VecX::Zero(dof);
  if (cs.held_uf.size() != dof) cs.held_uf = VecX::Zero(dof);

  const VecX z2tilde = z2 - z2bar;

  if (cs.slow_due(t, rates)) {
    cs.held_us = slow_control(z1, z2tilde, ref);
    cs.last_slow_sample_time = t;
  }

  MultirateOutput out;
  if (cs.fast_due(t, rates)) {
    const auto [e1, e2] = errors_of(z1, z2tilde, ref, cs.held_us);
    const CoreEval e = eval_core(m, split, z1, z2tilde);
    // Proof-form torque law M^c (us_dot - e2) + C^c us + D z2tilde - loads
    // with the virtual-input derivative us_dot = qd_ddot + e1 - e2 taken from
    // the error dynamics. Substituting us_dot - e2 = qd_ddot + e1 would drop
    // one -e2 and turn the position feedback unstable on the full plant.
    const VecX us_dot = ref.qd_ddot + e1 - e2;
    cs.held_uf = e.st.core.mass * (us_dot - e2) + e.c_breve * cs.held_us +
                 e.d_full * z2tilde - e.load_ff;
    cs.last_fast_sample_time = t;

    out.V = 0.5 * e1.dot(gains.kp_diag.asDiagonal() * e1);
    out.W = 0.5 * e2.dot(e.st.core.mass * e2);
    out.Sigma = (1.0 - gains.phi) * out.V + gains.phi * out.W;
    out.epsilon = epsilon_of(split, e.st.core, e.st.pert);
    cs.lyapunov_log.push_back({t, out.V, out.W, out.Sigma});
  } else if (!cs.lyapunov_log.empty()) {
    const auto& last = cs.lyapunov_log.back();
    out.V = last.V;
    out.W = last.W;
    out.Sigma = last.Sigma;
    out.epsilon = split.epsilon;
  }

  out.u_applied = cs.held_uf;
  return out;
}

}  // namespace soro
