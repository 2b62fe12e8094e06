#pragma once

#include <Eigen/Dense>

namespace soro {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// A screw 6-vector stacks the angular part first, the linear part last:
// strain twists xi = (gamma, eps), velocity twists eta = (omega, nu),
// wrenches (moment, force). Every 6x6 operator below follows this block order.
inline Eigen::VectorBlock<Vec6, 3> angular(Vec6& v) { return v.head<3>(); }
inline Eigen::VectorBlock<Vec6, 3> linear(Vec6& v) { return v.tail<3>(); }
inline Vec3 angular(const Vec6& v) { return v.head<3>(); }
inline Vec3 linear(const Vec6& v) { return v.tail<3>(); }

inline Vec6 screw(const Vec3& ang, const Vec3& lin) {
  Vec6 v;
  v << ang, lin;
  return v;
}

/// Element of SE(3): rotation matrix plus position.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  static Pose identity() { return {}; }

  Pose compose(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.position + position};
  }
  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * position)};
  }
  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = position;
    return m;
  }
  static Pose from_matrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }
  // ||R^T R - I|| <= 1e-9 and det(R) = 1 within 1e-9
  bool is_valid() const;
};

/// 3-vector -> antisymmetric 3x3 (cross-product matrix).
Mat3 hat3(const Vec3& w);
Vec3 vee3(const Mat3& m);

/// Screw 6-vector -> se(3) 4x4 matrix.
Mat4 hat(const Vec6& v);

/// Exact inverse of hat. Throws std::invalid_argument ("not in se(3)") when
/// the upper-left 3x3 block is not antisymmetric.
Vec6 vee(const Mat4& m);

/// Closed-form exponential of a constant strain twist over arclength s:
/// returns g with dg/ds = g * hat(xi). Switches to a 4th-order Taylor series
/// for the Rodrigues coefficients when ||gamma||*s < 1e-6.
Pose exp_se3(const Vec6& xi, double s);

/// Adjoint Ad_g (or Ad_{g^-1} when inverse is set). Throws on an invalid pose.
Mat6 adjoint_of(const Pose& g, bool inverse = false);

/// Adjoint of g^-1 without the validity check; used on poses we constructed.
Mat6 adjoint_inverse_unchecked(const Pose& g);

/// Small adjoint ad_xi (Lie bracket matrix); with co set, the coadjoint
/// ad*_xi = (ad_xi)^T.
Mat6 ad_small(const Vec6& xi, bool co = false);

}  // namespace soro
