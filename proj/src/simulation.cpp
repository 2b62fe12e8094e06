#include "soro/simulation.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace soro {

Scenario Scenario::from_model(const RobotModel& m) {
  Scenario sc;
  sc.model = m;
  sc.duration = m.duration;
  sc.fast_dt = m.fast_dt;
  sc.slow_dt = m.slow_dt;
  sc.seed = m.seed;
  sc.toggles = {m.gravity_on, m.drag_on, m.viscosity_on, m.tip_load_on};
  sc.initial_perturbation = m.initial_perturbation;
  sc.start_on_manifold = m.start_on_manifold;

  JointState st = JointState::rest(m);
  if (sc.initial_perturbation != 0.0) {
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < m.num_sections(); ++k) {
      // Perturb the bending strains only; axial/shear modes are much stiffer.
      st.q[6 * k + 1] += sc.initial_perturbation * u(rng);
      st.q[6 * k + 2] += sc.initial_perturbation * u(rng);
    }
  }
  sc.initial_state = st;
  sc.reference = Reference::setpoint(JointState::rest(m).q);
  return sc;
}

RobotModel effective_model(const Scenario& sc) {
  RobotModel m = sc.model;
  if (!sc.toggles.gravity) m.gravity.setZero();
  if (!sc.toggles.drag) m.fluid.drag_coefficient = 0.0;
  if (!sc.toggles.viscosity) {
    for (auto& s : m.sections) s.shear_viscosity = 0.0;
  }
  if (!sc.toggles.tip_load) m.tip_load.setZero();
  return m;
}

VecX rk4_step(const VecX& state, double t, double dt, const RhsFn& rhs) {
  if (!(dt > 0.0)) throw IntegrationError("rk4_step requires dt > 0");
  const VecX k1 = rhs(t, state);
  const VecX k2 = rhs(t + 0.5 * dt, state + (0.5 * dt) * k1);
  const VecX k3 = rhs(t + 0.5 * dt, state + (0.5 * dt) * k2);
  const VecX k4 = rhs(t + dt, state + dt * k3);
  VecX next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    std::ostringstream os;
    os << "non-finite state produced by integration step at t = " << t;
    throw IntegrationError(os.str());
  }
  return next;
}

namespace {

void validate_scenario(const Scenario& sc) {
  if (!(sc.duration > 0.0)) throw std::invalid_argument("scenario duration must be > 0");
  if (!(sc.fast_dt > 0.0 && sc.slow_dt > 0.0)) {
    throw std::invalid_argument("scenario dt values must be > 0");
  }
  if (sc.fast_dt > sc.slow_dt) {
    throw std::invalid_argument("fast_dt must not exceed slow_dt");
  }
  sc.initial_state.require_dims(sc.model);
}

Trajectory run_impl(const Scenario& sc, bool closed_loop) {
  validate_scenario(sc);
  const RobotModel m = effective_model(sc);
  const int dof = m.dof();
  const MassSplit split = split_by_fraction(m, m.split_fraction);
  const Vec6 grav = m.gravity_in_base();
  const AbscissaMask full = AbscissaMask::full(m.total_length());
  const Gains gains = Gains::from_model(m);
  const Rates rates{sc.slow_dt, sc.fast_dt};

  VecX z1 = sc.initial_state.q;
  VecX z2 = sc.initial_state.qdot;
  VecX z2bar = VecX::Zero(dof);
  if (sc.start_on_manifold) {
    z2bar = quasi_steady_velocity(m, split, z1, VecX::Zero(dof)).z2bar;
    z2 = z2bar;
  }
  ControllerState cs;

  Trajectory traj;
  traj.dof = dof;
  const long steps = std::lround(sc.duration / sc.fast_dt);
  traj.samples.reserve(steps + 1);

  DynamicsTerms plant_buf;
  const auto plant_rhs = [&](const VecX& u) {
    return [&m, &full, &grav, &plant_buf, u, dof](double t_inner,
                                                  const VecX& y) -> VecX {
      JointState s{y.head(dof), y.tail(dof)};
      VecX dy(2 * dof);
      try {
        assemble_terms_into(m, s, full, plant_buf);
        dy.head(dof) = s.qdot;
        dy.tail(dof) = forward_dynamics(plant_buf, s.qdot, u, grav);
      } catch (const AssemblyError& e) {
        std::ostringstream os;
        os << e.what() << " (at t = " << t_inner << ")";
        throw IntegrationError(os.str());
      }
      return dy;
    };
  };

  for (long i = 0; i <= steps; ++i) {
    const double t = i * sc.fast_dt;

    TrajectorySample sample;
    sample.t = t;
    sample.q = z1;
    sample.qd = closed_loop ? sc.reference.qd : VecX::Zero(dof);
    sample.qdot = z2;

    if (closed_loop) {
      if (cs.slow_due(t, rates)) {
        z2bar = quasi_steady_velocity(m, split, z1, z2bar).z2bar;
      }
      const MultirateOutput out =
          multirate_step(m, split, cs, t, z1, z2, z2bar, sc.reference, gains, rates);
      sample.z2bar = z2bar;
      sample.z2tilde = z2 - z2bar;
      sample.us = cs.held_us;
      sample.uf = cs.held_uf;
      const auto [e1, e2] = errors_of(z1, sample.z2tilde, sc.reference, cs.held_us);
      sample.e1 = e1;
      sample.e2 = e2;
      sample.V = out.V;
      sample.W = out.W;
      sample.Sigma = out.Sigma;
      sample.epsilon = out.epsilon;
    } else {
      sample.z2bar = VecX::Zero(dof);
      sample.z2tilde = VecX::Zero(dof);
      sample.us = VecX::Zero(dof);
      sample.uf = VecX::Zero(dof);
      sample.e1 = VecX::Zero(dof);
      sample.e2 = VecX::Zero(dof);
      const SplitTerms st = assemble_split(m, JointState{z1, z2}, split.core_mask,
                                           split.pert_mask);
      sample.epsilon = epsilon_of(split, st.core, st.pert);
    }

    if (!sample.q.allFinite() || !sample.qdot.allFinite()) {
      std::ostringstream os;
      os << "non-finite state recorded at t = " << t;
      throw IntegrationError(os.str());
    }
    traj.samples.push_back(std::move(sample));
    if (i == steps) break;

    VecX y(2 * dof);
    y << z1, z2;
    const VecX u = closed_loop ? cs.held_uf : VecX::Zero(dof);
    y = rk4_step(y, t, sc.fast_dt, plant_rhs(u));
    z1 = y.head(dof);
    z2 = y.tail(dof);
  }
  return traj;
}

}  // namespace

Trajectory run_closed_loop(const Scenario& sc) { return run_impl(sc, true); }

Trajectory run_passive(const Scenario& sc) { return run_impl(sc, false); }

double total_energy(const RobotModel& m, const JointState& state) {
  const DynamicsTerms terms =
      assemble_terms(m, state, AbscissaMask::full(m.total_length()));
  return 0.5 * state.qdot.dot(terms.mass * state.qdot) +
         elastic_potential(m, state.q);
}

}  // namespace soro
