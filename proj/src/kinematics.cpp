#include "soro/kinematics.hpp"

#include <cmath>
#include <stdexcept>

namespace soro {

JointState JointState::rest(const RobotModel& m) {
  JointState s;
  s.q.resize(m.dof());
  for (int k = 0; k < m.num_sections(); ++k) {
    s.q.segment<6>(6 * k) = m.sections[k].rest_strain;
  }
  s.qdot = VecX::Zero(m.dof());
  return s;
}

void JointState::require_dims(const RobotModel& m) const {
  if (q.size() != m.dof() || qdot.size() != m.dof()) {
    throw std::invalid_argument("JointState dimension must be 6N");
  }
}

namespace {

constexpr double kSeriesThreshold = 1e-6;
constexpr int kSeriesTerms = 10;

// Truncated series for T (and optionally its directional derivative) at a
// small argument sigma:
//   T  = sum_k (-1)^k sigma^{k+1}/(k+1)! ad^k
//   Td = sum_k (-1)^k sigma^{k+1}/(k+1)! sum_{j<k} ad^j ad_dot ad^{k-1-j}
void tangent_series(const Mat6& ad, const Mat6* ad_dot, double sigma,
                    Mat6& T, Mat6* Td) {
  Mat6 pow = Mat6::Identity();        // ad^k
  Mat6 sum_mixed = Mat6::Zero();      // S_k = sum_j ad^j ad_dot ad^{k-1-j}
  T.setZero();
  if (Td) Td->setZero();
  double coef = sigma;                // (-1)^k sigma^{k+1} / (k+1)!
  for (int k = 0; k < kSeriesTerms; ++k) {
    T += coef * pow;
    if (Td) {
      *Td += coef * sum_mixed;
      sum_mixed = sum_mixed * ad + pow * (*ad_dot);
    }
    pow = pow * ad;
    coef *= -sigma / static_cast<double>(k + 2);
  }
}

void tangent_impl(const Vec6& xi, const Vec6* xidot, double s,
                  Mat6& T, Mat6* Td) {
  const double rot = angular(xi).norm() * std::abs(s);
  int halvings = 0;
  if (rot > kSeriesThreshold) {
    // Halve until the base argument is small enough that the series is
    // accurate to machine precision.
    halvings = std::max(0, static_cast<int>(std::ceil(std::log2(rot / 0.0625))));
  }
  const double sigma = std::ldexp(s, -halvings);

  const Mat6 ad = ad_small(xi);
  Mat6 ad_dot;
  if (xidot) ad_dot = ad_small(*xidot);
  tangent_series(ad, xidot ? &ad_dot : nullptr, sigma, T, Td);

  double arc = sigma;
  for (int l = 0; l < halvings; ++l) {
    const Mat6 a = adjoint_inverse_unchecked(exp_se3(xi, arc));
    if (Td) {
      const Vec6 u = T * (*xidot);
      const Mat6 a_dot = -ad_small(u) * a;
      *Td = (*Td) * (Mat6::Identity() + a) + T * a_dot;
    }
    T = T + T * a;
    arc *= 2.0;
  }
}

int section_of(const RobotModel& m, const std::vector<double>& bounds, double X) {
  const double L = bounds.back();
  if (!(X >= -1e-12 * (1.0 + L) && X <= L + 1e-12 * (1.0 + L))) {
    throw std::domain_error("abscissa outside [0, L]");
  }
  X = std::min(std::max(X, 0.0), L);
  int i = m.num_sections() - 1;
  for (int k = 0; k < m.num_sections(); ++k) {
    if (X <= bounds[k + 1]) { i = k; break; }
  }
  return i;
}

}  // namespace

Mat6 tangent_exp(const Vec6& xi, double s) {
  Mat6 T;
  tangent_impl(xi, nullptr, s, T, nullptr);
  return T;
}

Mat6 tangent_exp_dot(const Vec6& xi, const Vec6& xidot, double s) {
  Mat6 T, Td;
  tangent_impl(xi, &xidot, s, T, &Td);
  return Td;
}

ArcData eval_arc(const Vec6& xi, double s) {
  ArcData a;
  a.pose = exp_se3(xi, s);
  a.ad_inv = adjoint_inverse_unchecked(a.pose);
  tangent_impl(xi, nullptr, s, a.tangent, nullptr);
  return a;
}

ArcData eval_arc(const Vec6& xi, const Vec6& xidot, double s) {
  ArcData a;
  a.pose = exp_se3(xi, s);
  a.ad_inv = adjoint_inverse_unchecked(a.pose);
  tangent_impl(xi, &xidot, s, a.tangent, &a.tangent_dot);
  return a;
}

SectionArcs section_arcs(const RobotModel& m, const VecX& q, const VecX& qdot) {
  SectionArcs out;
  const int n = m.num_sections();
  out.full.reserve(n);
  out.prefix_rel.reserve(n + 1);
  out.prefix_rel.push_back(Pose::identity());
  for (int k = 0; k < n; ++k) {
    const Vec6 xi = q.segment<6>(6 * k);
    const Vec6 xidot = qdot.segment<6>(6 * k);
    out.full.push_back(eval_arc(xi, xidot, m.sections[k].length));
    out.prefix_rel.push_back(out.prefix_rel.back().compose(out.full.back().pose));
  }
  return out;
}

SectionArcs section_arcs(const RobotModel& m, const VecX& q) {
  return section_arcs(m, q, VecX::Zero(q.size()));
}

Pose global_config(const RobotModel& m, const VecX& q, double X) {
  const auto bounds = m.boundaries();
  const int i = section_of(m, bounds, X);
  Pose g = m.base_transform;
  for (int k = 0; k < i; ++k) {
    g = g.compose(exp_se3(q.segment<6>(6 * k), m.sections[k].length));
  }
  return g.compose(exp_se3(q.segment<6>(6 * i), X - bounds[i]));
}

MatX jacobian(const RobotModel& m, const VecX& q, double X) {
  const auto bounds = m.boundaries();
  const int i = section_of(m, bounds, X);

  MatX J = MatX::Zero(6, m.dof());
  // Blocks 1..i-1 evaluated at the start of section i, then pulled through
  // the partial arc of section i.
  MatX jprev(6, 6 * i);
  for (int k = 0; k < i; ++k) {
    const ArcData arc = eval_arc(q.segment<6>(6 * k), m.sections[k].length);
    jprev.leftCols(6 * k) = arc.ad_inv * jprev.leftCols(6 * k).eval();
    jprev.middleCols(6 * k, 6) = arc.tangent;
  }
  const ArcData tail = eval_arc(q.segment<6>(6 * i), X - bounds[i]);
  J.leftCols(6 * i) = tail.ad_inv * jprev;
  J.middleCols(6 * i, 6) = tail.tangent;
  return J;
}

MatX jacobian_dot(const RobotModel& m, const VecX& q, const VecX& qdot, double X) {
  const auto bounds = m.boundaries();
  const int i = section_of(m, bounds, X);

  MatX jprev = MatX::Zero(6, 6 * i);
  MatX jdprev = MatX::Zero(6, 6 * i);
  for (int k = 0; k < i; ++k) {
    const Vec6 xi = q.segment<6>(6 * k);
    const Vec6 xidot = qdot.segment<6>(6 * k);
    const ArcData arc = eval_arc(xi, xidot, m.sections[k].length);
    const Vec6 u = arc.tangent * xidot;
    const Mat6 ad_u = ad_small(u);
    jdprev.leftCols(6 * k) =
        arc.ad_inv * jdprev.leftCols(6 * k).eval() -
        ad_u * (arc.ad_inv * jprev.leftCols(6 * k)).eval();
    jdprev.middleCols(6 * k, 6) = arc.tangent_dot;
    jprev.leftCols(6 * k) = arc.ad_inv * jprev.leftCols(6 * k).eval();
    jprev.middleCols(6 * k, 6) = arc.tangent;
  }
  const Vec6 xi = q.segment<6>(6 * i);
  const Vec6 xidot = qdot.segment<6>(6 * i);
  const ArcData tail = eval_arc(xi, xidot, X - bounds[i]);
  const Vec6 u = tail.tangent * xidot;

  MatX Jd = MatX::Zero(6, m.dof());
  Jd.leftCols(6 * i) = tail.ad_inv * jdprev - ad_small(u) * (tail.ad_inv * jprev).eval();
  Jd.middleCols(6 * i, 6) = tail.tangent_dot;
  return Jd;
}

}  // namespace soro
