#include "soro/screw.hpp"

#include <cmath>
#include <stdexcept>

namespace soro {

namespace {
constexpr double kSmallAngle = 1e-6;
}

bool Pose::is_valid() const {
  const Mat3 gram = rotation.transpose() * rotation - Mat3::Identity();
  if (gram.norm() > 1e-9) return false;
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) return false;
  return position.allFinite();
}

Mat3 hat3(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Vec3 vee3(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat4 hat(const Vec6& v) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat3(angular(v));
  m.topRightCorner<3, 1>() = linear(v);
  return m;
}

Vec6 vee(const Mat4& m) {
  const Mat3 a = m.topLeftCorner<3, 3>();
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  if ((a + a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("vee: upper-left block not antisymmetric, not in se(3)");
  }
  return screw(vee3(a), m.topRightCorner<3, 1>());
}

Pose exp_se3(const Vec6& xi, double s) {
  const Vec3 gamma = angular(xi);
  const Vec3 eps = linear(xi);
  const double theta = gamma.norm() * s;

  // Rodrigues coefficients for u = gamma*s:
  //   R = I + a*hat(u) + b*hat(u)^2,  p = (I + b*hat(u) + c*hat(u)^2) * eps*s
  double a, b, c;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
    c = (theta - std::sin(theta)) / (theta * theta * theta);
  }

  const Mat3 u_hat = hat3(gamma * s);
  const Mat3 u_hat2 = u_hat * u_hat;
  Pose g;
  g.rotation = Mat3::Identity() + a * u_hat + b * u_hat2;
  g.position = (Mat3::Identity() + b * u_hat + c * u_hat2) * (eps * s);
  return g;
}

Mat6 adjoint_of(const Pose& g, bool inverse) {
  if (!g.is_valid()) {
    throw std::invalid_argument("adjoint_of: pose violates SE(3) invariants");
  }
  if (inverse) return adjoint_inverse_unchecked(g);
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = g.rotation;
  ad.bottomRightCorner<3, 3>() = g.rotation;
  ad.bottomLeftCorner<3, 3>() = hat3(g.position) * g.rotation;
  return ad;
}

Mat6 adjoint_inverse_unchecked(const Pose& g) {
  const Mat3 rt = g.rotation.transpose();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = rt;
  ad.bottomRightCorner<3, 3>() = rt;
  ad.bottomLeftCorner<3, 3>() = -rt * hat3(g.position);
  return ad;
}

Mat6 ad_small(const Vec6& xi, bool co) {
  Mat6 m = Mat6::Zero();
  const Mat3 g = hat3(angular(xi));
  m.topLeftCorner<3, 3>() = g;
  m.bottomRightCorner<3, 3>() = g;
  m.bottomLeftCorner<3, 3>() = hat3(linear(xi));
  if (co) return m.transpose();
  return m;
}

}  // namespace soro
