#include "soro/perturbation.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include <Eigen/LU>

namespace soro {

namespace {

// Generalized Kelvin-Voigt damping: block diagonal L_k * Upsilon_k. This is
// the velocity gradient of the internal term tau, so the implicit slow
// equation (C1^p + C2^p + D) v = tau(z1, v) + F + N^p G rearranges to
// (C1^p + C2^p + D + Uv) v = tau_el(z1) + F + N^p G with Uv SPD, which keeps
// the fixed point well defined at rest where the Coriolis and drag terms
// vanish.
MatX viscous_generalized(const RobotModel& m) {
  MatX u = MatX::Zero(m.dof(), m.dof());
  for (int k = 0; k < m.num_sections(); ++k) {
    const DerivedSection d = derived_quantities(m.sections[k]);
    u.block<6, 6>(6 * k, 6 * k) =
        (m.sections[k].length * d.viscosity_diag).asDiagonal();
  }
  return u;
}

MatX slow_matrix(const RobotModel& m, const MassSplit& split, const VecX& z1,
                 const VecX& v) {
  JointState s{z1, v};
  const SplitTerms st = assemble_split(m, s, split.core_mask, split.pert_mask);
  return st.pert.coriolis1 + st.pert.coriolis2 + st.core.drag + st.pert.drag;
}

}  // namespace

VecX elastic_generalized_force(const RobotModel& m, const VecX& q) {
  VecX tau = VecX::Zero(m.dof());
  for (int k = 0; k < m.num_sections(); ++k) {
    const DerivedSection d = derived_quantities(m.sections[k]);
    const Vec6 dev = q.segment<6>(6 * k) - m.sections[k].rest_strain;
    tau.segment<6>(6 * k) =
        -m.sections[k].length * (d.stiffness_diag.asDiagonal() * dev);
  }
  return tau;
}

MassSplit split_by_fraction(const RobotModel& m, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie strictly inside (0, 1)");
  }
  const double L = m.total_length();
  const double target = L * (1.0 - fraction);

  // Snap the boundary to the nearest quadrature node.
  double best = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& node : quadrature_grid(m)) {
    const double d = std::abs(node.abscissa - target);
    if (d < best_dist) {
      best_dist = d;
      best = node.abscissa;
    }
  }

  MassSplit split;
  split.fraction = fraction;
  split.boundary = best;
  split.core_mask.intervals.push_back({best, L, true});
  if (best > 0.0) {
    split.pert_mask.intervals.push_back({0.0, best, false});
  }

  const JointState rest = JointState::rest(m);
  const SplitTerms st = assemble_split(m, rest, split.core_mask, split.pert_mask);
  split.epsilon = epsilon_of(split, st.core, st.pert);
  if (!(split.epsilon > 0.0 && split.epsilon < 1.0)) {
    std::cerr << "warning: perturbation parameter epsilon = " << split.epsilon
              << " outside (0, 1); time-scale separation is questionable\n";
  }
  return split;
}

double epsilon_of(const MassSplit&, const DynamicsTerms& terms_core,
                  const DynamicsTerms& terms_pert) {
  const double core_norm = terms_core.mass.norm();
  if (core_norm <= 0.0) {
    throw std::invalid_argument("epsilon_of: core mass has zero norm");
  }
  return terms_pert.mass.norm() / core_norm;
}

QuasiSteadyResult quasi_steady_velocity(const RobotModel& m, const MassSplit& split,
                                        const VecX& z1, const VecX& guess) {
  const int dof = m.dof();
  const JointState at_rest_vel{z1, VecX::Zero(dof)};
  const SplitTerms st0 = assemble_split(m, at_rest_vel, split.core_mask,
                                        split.pert_mask);
  const VecX rhs = elastic_generalized_force(m, z1) + st0.core.tip_force +
                   st0.pert.buoyancy * m.gravity_in_base();
  const double rhs_norm = rhs.norm();
  const double lambda0 = 1e-6 * (1.0 + rhs_norm);

  QuasiSteadyResult res;
  res.rhs_norm = rhs_norm;
  res.z2bar = VecX::Zero(dof);
  if (rhs_norm == 0.0) {
    res.iterations = 1;
    return res;  // zero is the exact root
  }

  const MatX visc = viscous_generalized(m);
  const auto matrix_at = [&](const VecX& v) -> MatX {
    return slow_matrix(m, split, z1, v) + visc;
  };

  // One continuation stage: damped Picard while the viscous block dominates,
  // then damped Newton with a finite-difference Jacobian once Picard stalls.
  const auto solve_stage = [&](const VecX& b, VecX v, double tol,
                               double& residual) -> VecX {
    MatX A = matrix_at(v);
    residual = (A * v - b).norm();
    for (int iter = 0; iter < 100 && residual > tol; ++iter) {
      ++res.iterations;
      const double lambda = std::min(lambda0, residual);
      res.lambda_applied = std::max(res.lambda_applied, lambda);
      Eigen::PartialPivLU<MatX> lu(A + lambda * MatX::Identity(dof, dof));
      const VecX target = lu.solve(b);
      if (!target.allFinite()) break;
      double alpha = 1.0;
      bool accepted = false;
      VecX v_try;
      MatX A_try;
      double r_try = residual;
      for (int back = 0; back < 30; ++back) {
        v_try = v + alpha * (target - v);
        A_try = matrix_at(v_try);
        r_try = (A_try * v_try - b).norm();
        if (r_try < residual) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;  // Picard stalled
      const double step = (v_try - v).norm();
      v = v_try;
      A = A_try;
      residual = r_try;
      if (step <= 1e-8) break;
    }
    if (residual <= tol) return v;

    const auto H = [&](const VecX& x) -> VecX { return matrix_at(x) * x - b; };
    VecX h = matrix_at(v) * v - b;
    residual = h.norm();
    for (int iter = 0; iter < 40 && residual > tol; ++iter) {
      ++res.iterations;
      MatX J(dof, dof);
      const double fd = 1e-7 * (1.0 + v.norm());
      for (int c = 0; c < dof; ++c) {
        VecX vp = v;
        vp[c] += fd;
        J.col(c) = (H(vp) - h) / fd;
      }
      const double lambda = std::min(lambda0, residual);
      res.lambda_applied = std::max(res.lambda_applied, lambda);
      const VecX dv =
          (J + lambda * MatX::Identity(dof, dof)).partialPivLu().solve(-h);
      if (!dv.allFinite()) break;
      bool accepted = false;
      double alpha = 1.0;
      for (int back = 0; back < 30; ++back) {
        const VecX v_try = v + alpha * dv;
        const VecX h_try = H(v_try);
        if (h_try.norm() < residual) {
          v = v_try;
          h = h_try;
          residual = h_try.norm();
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
    }
    return v;
  };

  const double tol = 1e-8 * (1.0 + rhs_norm);
  double residual = 0.0;
  VecX v0 = guess.size() == dof ? guess : VecX::Zero(dof);
  res.z2bar = solve_stage(rhs, v0, tol, residual);

  if (residual > 1e-6 * (1.0 + rhs_norm)) {
    // Load continuation from the unloaded root, warm-starting each stage.
    VecX v = VecX::Zero(dof);
    for (double s : {0.25, 0.5, 0.75, 1.0}) {
      const double stage_tol = s < 1.0 ? 1e-6 * (1.0 + s * rhs_norm) : tol;
      v = solve_stage(s * rhs, v, stage_tol, residual);
    }
    if (residual < (matrix_at(res.z2bar) * res.z2bar - rhs).norm()) {
      res.z2bar = v;
    } else {
      residual = (matrix_at(res.z2bar) * res.z2bar - rhs).norm();
    }
  }

  res.residual = residual;
  if (residual > 1e-6 * (1.0 + rhs_norm)) {
    std::ostringstream os;
    os << "quasi-steady velocity did not converge: residual " << residual
       << " exceeds 1e-6 * (1 + " << rhs_norm << ") after " << res.iterations
       << " iterations";
    throw QuasiSteadyError(os.str());
  }
  return res;
}

VecX boundary_layer_rhs(const RobotModel& m, const MassSplit& split,
                        const VecX& z1, const VecX& z2tilde, const VecX& u_f) {
  const JointState s{z1, z2tilde};
  const SplitTerms st = assemble_split(m, s, split.core_mask, split.pert_mask);
  const MatX vel = st.core.coriolis1 + st.core.coriolis2 + st.core.drag + st.pert.drag;
  const VecX rhs = u_f + elastic_generalized_force(m, z1) + st.core.tip_force +
                   st.core.buoyancy * m.gravity_in_base() - vel * z2tilde;

  Eigen::LLT<MatX> llt(st.core.mass);
  if (llt.info() != Eigen::Success) {
    throw AssemblyError("boundary layer: core mass matrix not SPD");
  }
  return llt.solve(rhs);
}

VecX slow_rhs(const RobotModel&, const MassSplit&, const VecX&, const VecX& u_s) {
  return u_s;
}

}  // namespace soro
