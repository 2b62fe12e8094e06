#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "soro/dynamics.hpp"
#include "soro/perturbation.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>

using namespace soro;
using namespace soro::testutil;

namespace {

JointState random_state(std::mt19937_64& rng, const RobotModel& m,
                        double ang = 0.6, double lin = 0.25, double rate = 0.4) {
  JointState s;
  s.q = random_strain(rng, m, ang, lin);
  s.qdot.resize(m.dof());
  for (int i = 0; i < s.qdot.size(); ++i) s.qdot[i] = rate * random_twist(rng)[i % 6];
  return s;
}

}  // namespace

TEST_CASE("drag operator: zero flow, speed linearity, dissipativity") {
  const RobotModel m = paper_model(2, 2.0);
  CHECK(drag_matrix_at(m, Vec6::Zero(), 0.5).norm() == 0.0);

  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    const Vec6 eta = random_twist(rng, 1.0, 2.0);
    const Mat6 d1 = drag_matrix_at(m, eta, 1.2);
    const Mat6 d2 = drag_matrix_at(m, 2.0 * eta, 1.2);
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + d1.norm()));
  }
  for (int i = 0; i < 1000; ++i) {
    const Vec6 eta = random_twist(rng, 2.0, 3.0);
    CHECK(eta.dot(drag_matrix_at(m, eta, 0.8) * eta) >= 0.0);
  }
}

TEST_CASE("internal wrench: rest state, bending value, linearity") {
  const RobotModel m = paper_model(1, 2.0);
  const Vec6 rest = m.sections[0].rest_strain;
  CHECK(internal_wrench(m, rest, Vec6::Zero(), 0).norm() == 0.0);

  Vec6 bent = rest;
  bent[2] += 0.1;
  const Vec6 w = internal_wrench(m, bent, Vec6::Zero(), 0);
  CHECK(w[2] == doctest::Approx(0.8639379797371932).epsilon(1e-12));
  for (int i : {0, 1, 3, 4, 5}) CHECK(w[i] == 0.0);

  Vec6 bent2 = rest;
  bent2[2] += 0.2;
  const Vec6 w2 = internal_wrench(m, bent2, Vec6::Zero(), 0);
  CHECK((w2 - 2.0 * w).norm() < 1e-12);
}

TEST_CASE("assembly additivity: full equals core plus perturbed") {
  std::mt19937_64 rng(53);
  const RobotModel m = paper_model(4, 2.0);
  const JointState st = random_state(rng, m);
  const MassSplit split = split_by_fraction(m, 0.6);
  const AbscissaMask full = AbscissaMask::full(2.0);

  const DynamicsTerms t_full = assemble_terms(m, st, full);
  const DynamicsTerms t_core = assemble_terms(m, st, split.core_mask);
  const DynamicsTerms t_pert = assemble_terms(m, st, split.pert_mask);
  const SplitTerms both = assemble_split(m, st, split.core_mask, split.pert_mask);

  auto check_add = [&](const MatX& whole, const MatX& a, const MatX& b) {
    CHECK(((a + b) - whole).cwiseAbs().maxCoeff() < 1e-12);
  };
  check_add(t_full.mass, t_core.mass, t_pert.mass);
  check_add(t_full.coriolis1, t_core.coriolis1, t_pert.coriolis1);
  check_add(t_full.coriolis2, t_core.coriolis2, t_pert.coriolis2);
  check_add(t_full.drag, t_core.drag, t_pert.drag);
  check_add(t_full.buoyancy, t_core.buoyancy, t_pert.buoyancy);
  CHECK(((t_core.internal + t_pert.internal) - t_full.internal).cwiseAbs().maxCoeff() < 1e-12);

  // The one-sweep split path matches the two independent assemblies exactly.
  CHECK((both.core.mass - t_core.mass).cwiseAbs().maxCoeff() == 0.0);
  CHECK((both.pert.coriolis2 - t_pert.coriolis2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((both.combined().mass - (t_core.mass + t_pert.mass)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembled terms match direct quadrature over public kinematics") {
  std::mt19937_64 rng(57);
  const RobotModel m = paper_model(3, 2.0);
  const JointState st = random_state(rng, m, 0.6, 0.25, 0.5);
  const DynamicsTerms t = assemble_terms(m, st, AbscissaMask::full(2.0));

  const int dof = m.dof();
  MatX mass = MatX::Zero(dof, dof), c1 = MatX::Zero(dof, dof),
       c2 = MatX::Zero(dof, dof), drag = MatX::Zero(dof, dof),
       buoy = MatX::Zero(dof, 6);
  for (const auto& node : quadrature_grid(m)) {
    const MatX J = jacobian(m, st.q, node.abscissa);
    const MatX Jd = jacobian_dot(m, st.q, st.qdot, node.abscissa);
    const Vec6 eta = J * st.qdot;
    const DerivedSection d = derived_quantities(m.sections[node.section]);
    const Vec6 ma = d.screw_inertia_diag;
    mass += node.weight * J.transpose() * ma.asDiagonal() * J;
    c1 += node.weight * J.transpose() * ad_small(eta, true) * ma.asDiagonal() * J;
    c2 += node.weight * J.transpose() * ma.asDiagonal() * Jd;
    drag += node.weight * J.transpose() * drag_matrix_at(m, eta, node.abscissa) * J;
    const double bf = 1.0 - m.fluid.water_density / m.sections[node.section].density;
    const Pose rel = m.base_transform.inverse().compose(
        global_config(m, st.q, node.abscissa));
    buoy += node.weight * bf * J.transpose() * ma.asDiagonal() *
            adjoint_inverse_unchecked(rel);
  }
  const double scale = 1.0 + mass.norm();
  CHECK((t.mass - mass).norm() <= 1e-9 * scale);
  CHECK((t.coriolis1 - c1).norm() <= 1e-9 * (1.0 + c1.norm()));
  CHECK((t.coriolis2 - c2).norm() <= 1e-9 * (1.0 + c2.norm()));
  CHECK((t.drag - drag).norm() <= 1e-9 * (1.0 + drag.norm()));
  CHECK((t.buoyancy - buoy).norm() <= 1e-9 * (1.0 + buoy.norm()));
}

TEST_CASE("velocity-dependent terms vanish at rest rate") {
  std::mt19937_64 rng(59);
  const RobotModel m = paper_model(3, 2.0);
  JointState st;
  st.q = random_strain(rng, m, 0.6, 0.25);
  st.qdot = VecX::Zero(m.dof());
  const DynamicsTerms t = assemble_terms(m, st, AbscissaMask::full(2.0));
  CHECK(t.coriolis1.norm() == 0.0);
  CHECK(t.coriolis2.norm() == 0.0);
  CHECK(t.drag.norm() == 0.0);
}

TEST_CASE("mass matrix symmetric positive definite on random states") {
  std::mt19937_64 rng(61);
  for (int n : {1, 2, 4}) {
    const RobotModel m = paper_model(n, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
      const JointState st = random_state(rng, m, 0.8, 0.4, 0.0);
      const DynamicsTerms t = assemble_terms(m, st, AbscissaMask::full(2.0));
      CHECK((t.mass - t.mass.transpose()).norm() <= 1e-9 * t.mass.norm());
      Eigen::SelfAdjointEigenSolver<MatX> es(t.mass, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("gravity-buoyancy column matches direct microsolid weight summation") {
  RobotModel m = paper_model(1, 2.0);
  const JointState rest = JointState::rest(m);
  const DynamicsTerms t = assemble_terms(m, rest, AbscissaMask::full(2.0));
  const VecX fg = t.buoyancy * m.gravity_in_base();

  const DerivedSection d = derived_quantities(m.sections[0]);
  const double fbar =
      (1.0 - m.fluid.water_density / m.sections[0].density) *
      m.sections[0].density * d.area * 9.81;  // N per metre, +y in base frame

  // Direct summation over the same microsolid grid.
  double shear = 0.0, moment = 0.0, net = 0.0;
  for (const auto& node : quadrature_grid(m)) {
    shear += node.weight * node.abscissa * fbar;
    moment += node.weight * 0.5 * node.abscissa * node.abscissa * fbar;
    net += node.weight * fbar;
  }
  CHECK(fg[4] == doctest::Approx(shear).epsilon(1e-10));
  CHECK(fg[2] == doctest::Approx(moment).epsilon(1e-10));
  // Net buoyant weight of the arm: (1 - rho_f/rho) rho A L g.
  CHECK(net == doctest::Approx(fbar * 2.0).epsilon(1e-12));
  CHECK(net == doctest::Approx(618.23).epsilon(1e-4));
}

TEST_CASE("forward dynamics: force balance, oracle solve, linearity in u") {
  std::mt19937_64 rng(67);
  const RobotModel m = paper_model(2, 2.0);
  const JointState st = random_state(rng, m);
  const DynamicsTerms t = assemble_terms(m, st, AbscissaMask::full(2.0));
  const Vec6 grav = m.gravity_in_base();

  // Choose u to cancel every other generalized force.
  const VecX u_bal = -(t.internal + t.tip_force + t.buoyancy * grav) +
                     t.velocity_matrix() * st.qdot;
  CHECK(forward_dynamics(t, st.qdot, u_bal, grav).norm() < 1e-9);

  // Dense-inverse oracle on a handmade SPD system.
  const int dof = 12;
  MatX a = MatX::Random(dof, dof);
  DynamicsTerms hand;
  hand.mass = a * a.transpose() + 5.0 * MatX::Identity(dof, dof);
  hand.coriolis1 = hand.coriolis2 = hand.drag = MatX::Zero(dof, dof);
  hand.buoyancy = MatX::Zero(dof, 6);
  hand.tip_force = VecX::Zero(dof);
  hand.internal = VecX::Zero(dof);
  const VecX rhs = VecX::Random(dof);
  const VecX sol = forward_dynamics(hand, VecX::Zero(dof), rhs, Vec6::Zero());
  CHECK((sol - hand.mass.inverse() * rhs).norm() < 1e-9);

  // Linearity in u at a fixed state.
  const VecX u1 = VecX::Random(m.dof());
  const VecX u2 = VecX::Random(m.dof());
  const VecX f1 = forward_dynamics(t, st.qdot, u1, grav);
  const VecX f2 = forward_dynamics(t, st.qdot, u2, grav);
  const VecX f12 = forward_dynamics(t, st.qdot, u1 + u2, grav);
  const VecX f0 = forward_dynamics(t, st.qdot, VecX::Zero(m.dof()), grav);
  CHECK((f12 - (f1 + f2 - f0)).norm() < 1e-8 * (1.0 + f12.norm()));
}

TEST_CASE("forward dynamics rejects an indefinite mass matrix") {
  DynamicsTerms bad;
  bad.mass = -MatX::Identity(6, 6);
  bad.coriolis1 = bad.coriolis2 = bad.drag = MatX::Zero(6, 6);
  bad.buoyancy = MatX::Zero(6, 6);
  bad.tip_force = VecX::Zero(6);
  bad.internal = VecX::Zero(6);
  VecX rhs = VecX::Ones(6);
  CHECK_THROWS_WITH_AS(
      forward_dynamics(bad, VecX::Zero(6), rhs, Vec6::Zero()),
      doctest::Contains("not SPD"), AssemblyError);
}

TEST_CASE("tip wrench force: lever arm at rest, zero load, rate independence") {
  RobotModel m = paper_model(1, 2.0);
  CHECK(tip_wrench_force(m, rest_q(m)).norm() == 0.0);

  m.tip_load[4] = 5.0;  // +y force in the body frame at the tip
  m.actuation_abscissa = 2.0;
  const VecX f = tip_wrench_force(m, rest_q(m));
  // Straight-rod lever-arm oracle: integral of (Xbar - X) dX over [0, Xbar]
  // for the bending row, Xbar for the shear row.
  const double xbar = 2.0;
  CHECK(f[2] == doctest::Approx(0.5 * xbar * xbar * 5.0).epsilon(1e-12));
  CHECK(f[4] == doctest::Approx(xbar * 5.0).epsilon(1e-12));

  std::mt19937_64 rng(71);
  const JointState s1 = random_state(rng, m);
  JointState s2 = s1;
  s2.qdot *= -3.7;
  const DynamicsTerms t1 = assemble_terms(m, s1, AbscissaMask::full(2.0));
  const DynamicsTerms t2 = assemble_terms(m, s2, AbscissaMask::full(2.0));
  CHECK((t1.tip_force - t2.tip_force).norm() == 0.0);
}

TEST_CASE("skew-symmetry surrogate along the trajectory velocity") {
  std::mt19937_64 rng(73);
  const RobotModel m = paper_model(1, 2.0);
  const AbscissaMask full = AbscissaMask::full(2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const JointState st = random_state(rng, m, 0.5, 0.2, 0.5);
    const double h = 1e-6;
    JointState plus{st.q + h * st.qdot, st.qdot};
    JointState minus{st.q - h * st.qdot, st.qdot};
    const MatX mdot = (assemble_terms(m, plus, full).mass -
                       assemble_terms(m, minus, full).mass) / (2.0 * h);
    const DynamicsTerms t = assemble_terms(m, st, full);
    const double lhs = std::abs(
        st.qdot.dot((mdot - 2.0 * (t.coriolis1 + t.coriolis2)) * st.qdot));
    const double scale = st.qdot.squaredNorm() * (1.0 + st.qdot.norm()) *
                         (1.0 + t.mass.norm());
    MESSAGE("skew surrogate |e'(Mdot - 2C)e| / scale = ", lhs / scale);
    CHECK(lhs <= 1e-6 * scale);
  }
}

TEST_CASE("assembly is bit-identical across worker counts") {
  std::mt19937_64 rng(79);
  const RobotModel m = paper_model(4, 2.0);
  const JointState st = random_state(rng, m);
  const AbscissaMask full = AbscissaMask::full(2.0);

  set_assembly_threads(1);
  const DynamicsTerms serial = assemble_terms(m, st, full);
  set_assembly_threads(3);
  const DynamicsTerms threaded = assemble_terms(m, st, full);
  set_assembly_threads(1);

  CHECK((serial.mass - threaded.mass).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.coriolis1 - threaded.coriolis1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.coriolis2 - threaded.coriolis2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.drag - threaded.drag).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.buoyancy - threaded.buoyancy).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.internal - threaded.internal).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("abscissa mask validation") {
  AbscissaMask overlapping;
  overlapping.intervals.push_back({0.0, 1.0, true});
  overlapping.intervals.push_back({0.5, 2.0, true});
  CHECK_THROWS_AS(overlapping.validate(2.0), std::invalid_argument);

  AbscissaMask outside;
  outside.intervals.push_back({-0.5, 1.0, true});
  CHECK_THROWS_AS(outside.validate(2.0), std::invalid_argument);
}
