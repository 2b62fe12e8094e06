#pragma once

#include <random>

#include "soro/kinematics.hpp"
#include "soro/model.hpp"
#include "soro/screw.hpp"

namespace soro::testutil {

inline Vec6 random_twist(std::mt19937_64& rng, double ang_scale = 1.0,
                         double lin_scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec6 v;
  for (int i = 0; i < 3; ++i) v[i] = ang_scale * u(rng);
  for (int i = 3; i < 6; ++i) v[i] = lin_scale * u(rng);
  return v;
}

inline Pose random_pose(std::mt19937_64& rng) {
  return exp_se3(random_twist(rng, 1.5, 1.0), 1.0);
}

/// High-accuracy reference for the exponential: classical RK4 on the raw
/// 4x4 ODE dg/ds = g hat(xi) from the identity.
inline Mat4 rk4_exp_oracle(const Vec6& xi, double s, double h) {
  const Mat4 x = hat(xi);
  Mat4 g = Mat4::Identity();
  const long steps = std::lround(s / h);
  const double hh = s / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    const Mat4 k1 = g * x;
    const Mat4 k2 = (g + 0.5 * hh * k1) * x;
    const Mat4 k3 = (g + 0.5 * hh * k2) * x;
    const Mat4 k4 = (g + hh * k3) * x;
    g += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return g;
}

/// Body twist by central differencing of the configuration along q(t) = q + t qdot.
inline Vec6 fd_body_twist(const RobotModel& m, const VecX& q, const VecX& qdot,
                          double X, double h = 1e-6) {
  const Mat4 gp = global_config(m, q + h * qdot, X).matrix();
  const Mat4 gm = global_config(m, q - h * qdot, X).matrix();
  const Mat4 g = global_config(m, q, X).matrix();
  const Mat4 omega = g.inverse() * ((gp - gm) / (2.0 * h));
  // Project onto se(3): antisymmetrize the rotation block before vee.
  const Mat3 a = 0.5 * (omega.topLeftCorner<3, 3>() -
                        omega.topLeftCorner<3, 3>().transpose().eval());
  return screw(vee3(a), omega.topRightCorner<3, 1>());
}

inline RobotModel paper_model(int n_sections = 4, double total_length = 2.0) {
  RobotModel m;
  m.sections.assign(n_sections, SectionSpec{});
  for (auto& s : m.sections) s.length = total_length / n_sections;
  Mat4 gr;
  gr << 0, -1, 0, 0,
        1, 0, 0, 0,
        0, 0, 1, 0,
        0, 0, 0, 1;
  m.base_transform = Pose::from_matrix(gr);
  m.actuation_abscissa = total_length;
  m.tip_load = Vec6::Zero();
  m.kp_diag = VecX::Constant(6 * n_sections, 10.0);
  return m;
}

inline VecX rest_q(const RobotModel& m) { return JointState::rest(m).q; }

/// Random strain state with ||xi - xi*|| bounded per section.
inline VecX random_strain(std::mt19937_64& rng, const RobotModel& m,
                          double ang_dev, double lin_dev) {
  VecX q = rest_q(m);
  for (int k = 0; k < m.num_sections(); ++k) {
    q.segment<6>(6 * k) += random_twist(rng, ang_dev, lin_dev);
  }
  return q;
}

}  // namespace soro::testutil
