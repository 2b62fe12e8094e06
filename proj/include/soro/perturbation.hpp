#pragma once

#include "soro/dynamics.hpp"

namespace soro {

/// Core/perturbed partition of the quadrature grid. The core covers the given
/// mass fraction measured from the tip inward; the boundary is snapped to the
/// nearest quadrature node so that masked assembly is additive.
struct MassSplit {
  AbscissaMask core_mask;
  AbscissaMask pert_mask;
  double fraction = 0.6;
  double boundary = 0.0;  // snapped abscissa separating pert [0,b) and core [b,L]
  double epsilon = 0.0;   // ||M_pert||_F / ||M_core||_F at rest strain
};

/// Two-time-scale bookkeeping: z2 = z2_bar + z2_tilde at all times.
struct TwoTimeScaleState {
  VecX z1;
  VecX z2;
  VecX z2_bar;
  VecX z2_tilde;
  double tau_scale = 0.0;  // T = t / epsilon
};

struct QuasiSteadyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

MassSplit split_by_fraction(const RobotModel& m, double fraction);

/// epsilon = ||M_pert(q)||_F / ||M_core(q)||_F, both assembled at one state.
double epsilon_of(const MassSplit& split, const DynamicsTerms& terms_core,
                  const DynamicsTerms& terms_pert);

struct QuasiSteadyResult {
  VecX z2bar;
  double residual = 0.0;    // ||(C1p + C2p + D) z2bar - rhs||
  double rhs_norm = 0.0;
  int iterations = 0;
  double lambda_applied = 0.0;  // largest Tikhonov term used
};

/// Solves the quasi-steady algebraic equation
///   (C1^p + C2^p + D)(z1, z2bar) z2bar = tau(z1, z2bar) + F(z1) + N^p Ad_{gr}^{-1} G
/// by damped Picard iteration with Tikhonov regularization that is phased out
/// as the residual shrinks. tau carries the elastic force at z1 and the
/// Kelvin-Voigt viscous force at the quasi-steady velocity itself; the
/// viscous gradient moves to the iteration matrix, which keeps the root well
/// defined at rest where Coriolis and drag vanish. Throws QuasiSteadyError on
/// non-convergence, carrying the last residual.
QuasiSteadyResult quasi_steady_velocity(const RobotModel& m, const MassSplit& split,
                                        const VecX& z1, const VecX& guess);

/// Boundary-layer dynamics at frozen z1 on the stretched scale T:
///   M^c dz2tilde/dT = u_f + tau(z1) + F(z1) + N^c Ad_{gr}^{-1} G
///                     - (C1^c + C2^c + D) z2tilde.
VecX boundary_layer_rhs(const RobotModel& m, const MassSplit& split,
                        const VecX& z1, const VecX& z2tilde, const VecX& u_f);

/// The slow channel is a pure integrator under the layered input assignment.
VecX slow_rhs(const RobotModel& m, const MassSplit& split, const VecX& z1bar,
              const VecX& u_s);

/// Elastic part of the internal generalized force, -L_k Pi_k (xi_k - xi*).
VecX elastic_generalized_force(const RobotModel& m, const VecX& q);

}  // namespace soro
