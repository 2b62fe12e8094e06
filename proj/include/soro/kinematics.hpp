#pragma once

#include <vector>

#include "soro/model.hpp"
#include "soro/screw.hpp"

namespace soro {

/// Stacked sectional strains q = (xi_1 ... xi_N) and their rates.
struct JointState {
  VecX q;
  VecX qdot;

  static JointState rest(const RobotModel& m);
  void require_dims(const RobotModel& m) const;
};

/// Everything the quadrature sweep needs about one constant-twist arc:
/// the pose exp(xi s), its inverse adjoint A, the tangent operator
/// T(xi, s) = integral of Ad_{exp(xi tau)}^{-1} over [0, s], and the
/// directional derivative of T along xidot.
struct ArcData {
  Pose pose;
  Mat6 ad_inv = Mat6::Identity();
  Mat6 tangent = Mat6::Zero();
  Mat6 tangent_dot = Mat6::Zero();
};

/// T satisfies d/de exp((xi + e*delta) s)|_0 = exp(xi s) hat(T(xi,s) delta).
/// Series branch below ||gamma|| s < 1e-6; larger arguments are halved until
/// the series applies, then recombined with the one-parameter subgroup rule.
Mat6 tangent_exp(const Vec6& xi, double s);

/// d/dt T(xi(t), s) along xidot.
Mat6 tangent_exp_dot(const Vec6& xi, const Vec6& xidot, double s);

ArcData eval_arc(const Vec6& xi, double s);
ArcData eval_arc(const Vec6& xi, const Vec6& xidot, double s);

/// Per-section full-arc data and base-relative prefix poses, computed once
/// per joint state and shared across every abscissa evaluation.
struct SectionArcs {
  std::vector<ArcData> full;    // arc over each whole section
  std::vector<Pose> prefix_rel; // P_0 = I, P_k = E_1 ... E_k (excludes g_r)
};
SectionArcs section_arcs(const RobotModel& m, const VecX& q, const VecX& qdot);
SectionArcs section_arcs(const RobotModel& m, const VecX& q);

/// g(X) = g_r * exp(xi_1 L_1) ... exp(xi_i (X - X_{i-1})). Throws
/// std::domain_error outside [0, L].
Pose global_config(const RobotModel& m, const VecX& q, double X);

/// Body-frame geometric Jacobian, 6 x 6N: eta(X) = J(X) qdot. Blocks for
/// sections strictly downstream of X are zero.
MatX jacobian(const RobotModel& m, const VecX& q, double X);

/// Time derivative of jacobian along (q, qdot).
MatX jacobian_dot(const RobotModel& m, const VecX& q, const VecX& qdot, double X);

}  // namespace soro
