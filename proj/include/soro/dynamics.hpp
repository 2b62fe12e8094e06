#pragma once

#include <stdexcept>
#include <vector>

#include "soro/kinematics.hpp"
#include "soro/model.hpp"

namespace soro {

/// Selects quadrature nodes by abscissa intervals. Intervals are half-open
/// [lo, hi) unless closed_right is set (used when hi reaches the tip).
struct AbscissaMask {
  struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool closed_right = true;
  };
  std::vector<Interval> intervals;

  static AbscissaMask full(double L);
  static AbscissaMask empty() { return {}; }

  bool contains(double X) const;
  void validate(double L) const;  // disjoint, within [0, L]
};

/// Generalized terms of the Newton-Euler form
///   M qdd + (C1 + C2 + D) qd = internal + tip_force + buoyancy * Ad_{gr}^{-1} G + u
/// assembled by trapezoidal quadrature over the masked nodes.
struct DynamicsTerms {
  MatX mass;        // 6N x 6N
  MatX coriolis1;   // 6N x 6N
  MatX coriolis2;   // 6N x 6N
  MatX drag;        // 6N x 6N
  MatX buoyancy;    // 6N x 6, premultiplies Ad_{gr}^{-1} G
  VecX tip_force;   // 6N, J(Xbar)^T F_p; independent of the mask
  VecX internal;    // 6N, elastic + viscous generalized force over the mask

  int dof() const { return static_cast<int>(mass.rows()); }
  MatX velocity_matrix() const { return coriolis1 + coriolis2 + drag; }
};

struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Core/perturbed pair assembled in a single sweep over the grid.
struct SplitTerms {
  DynamicsTerms core;
  DynamicsTerms pert;
  /// Entrywise sum of the masked integrals; tip_force is carried unchanged.
  DynamicsTerms combined() const;
};

/// Microsolid drag operator at X for body twist eta: D(X) * ||nu||, positive
/// semidefinite and linear in the translation speed; zero when nu = 0.
Mat6 drag_matrix_at(const RobotModel& m, const Vec6& eta, double X);

/// Internal wrench F_i = Pi (xi - xi*) + Upsilon xidot for one section.
Vec6 internal_wrench(const RobotModel& m, const Vec6& xi, const Vec6& xidot,
                     int section);

/// F = J(Xbar)^T F_p.
VecX tip_wrench_force(const RobotModel& m, const VecX& q);

DynamicsTerms assemble_terms(const RobotModel& m, const JointState& state,
                             const AbscissaMask& mask);

SplitTerms assemble_split(const RobotModel& m, const JointState& state,
                          const AbscissaMask& core_mask,
                          const AbscissaMask& pert_mask);

/// Buffer-reusing variants for hot loops; the outputs are fully overwritten.
void assemble_terms_into(const RobotModel& m, const JointState& state,
                         const AbscissaMask& mask, DynamicsTerms& out_terms);
void assemble_split_into(const RobotModel& m, const JointState& state,
                         const AbscissaMask& core_mask,
                         const AbscissaMask& pert_mask, SplitTerms& out_terms);

/// Solves M qdd = u + internal + tip_force + buoyancy * gravity_base
///               - (C1 + C2 + D) qdot
/// with an SPD factorization; falls back to a pivoted factorization and
/// throws "mass matrix not SPD" (with a smallest-eigenvalue estimate) when
/// that also fails.
VecX forward_dynamics(const DynamicsTerms& terms, const VecX& qdot,
                      const VecX& u, const Vec6& gravity_base);

/// 1/2 sum_k L_k (xi_k - xi*)^T Pi_k (xi_k - xi*).
double elastic_potential(const RobotModel& m, const VecX& q);

/// Worker count for the assembly's per-section phase. The SORO_SPT_THREADS
/// environment variable caps any requested value; results are bit-identical
/// regardless of the count.
void set_assembly_threads(int n);
int assembly_threads();

}  // namespace soro
