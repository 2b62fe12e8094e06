#pragma once

#include <string>
#include <vector>

#include "soro/screw.hpp"

namespace soro {

/// Geometry and material of one constant-strain section.
struct SectionSpec {
  double length = 0.5;            // m
  double radius = 0.1;            // m
  double density = 2000.0;        // kg/m^3
  double young_modulus = 110e3;   // Pa
  double shear_viscosity = 3e3;   // Pa (Kelvin-Voigt modulus, 1 s time constant)
  double poisson_ratio = 0.45;
  Vec6 rest_strain = (Vec6() << 0, 0, 0, 1, 0, 0).finished();

  bool operator==(const SectionSpec&) const = default;
};

struct FluidSpec {
  double water_density = 997.0;   // kg/m^3, also used as rho_f in buoyancy
  double drag_coefficient = 0.82;

  bool operator==(const FluidSpec&) const = default;
};

/// Per-section quantities derived from the cross-section geometry:
/// A = pi r^2, I_y = I_z = pi r^4 / 4, I_x = pi r^4 / 2, G = E / (2(1+nu)),
/// screw_inertia = rho * diag(I_x, I_y, I_z, A, A, A).
struct DerivedSection {
  double area = 0.0;
  double inertia_x = 0.0;
  double inertia_y = 0.0;
  double inertia_z = 0.0;
  double shear_modulus = 0.0;
  Vec6 screw_inertia_diag = Vec6::Zero();
  Vec6 stiffness_diag = Vec6::Zero();   // Pi = diag(G Ix, E Iy, E Iz, E A, G A, G A)
  Vec6 viscosity_diag = Vec6::Zero();   // Upsilon = G_v * diag(Ix, Iy, Iz, A, A, A)
};

DerivedSection derived_quantities(const SectionSpec& s);

struct QuadratureNode {
  double abscissa = 0.0;  // m, global
  double weight = 0.0;    // m
  int section = 0;        // 0-based
};

struct RobotModel {
  std::vector<SectionSpec> sections;
  FluidSpec fluid;
  int microsolids_per_section = 41;
  Pose base_transform;                       // g_r
  double actuation_abscissa = 0.0;           // X-bar; defaults to L on load
  Vec6 tip_load = Vec6::Zero();              // F_p, body frame at X-bar
  Vec6 gravity = (Vec6() << 0, 0, 0, -9.81, 0, 0).finished();  // inertial frame
  Vec6 added_mass_diag = Vec6::Zero();       // fluid added mass M_f (diagonal)
  double split_fraction = 0.6;               // core mass fraction, tip inward

  // Controller / integration defaults carried by the config.
  VecX kp_diag;           // slow Lyapunov weight, size 6N
  double phi = 0.5;
  double duration = 5.0;  // s
  double fast_dt = 1e-3;  // s
  double slow_dt = 1e-2;  // s
  unsigned long seed = 0;
  bool gravity_on = true;
  bool drag_on = true;
  bool viscosity_on = true;
  bool tip_load_on = true;
  double initial_perturbation = 0.0;  // seeded bending deviation per section
  bool start_on_manifold = false;     // qdot(0) = quasi-steady velocity at q(0)

  double total_length() const;
  int num_sections() const { return static_cast<int>(sections.size()); }
  int dof() const { return 6 * num_sections(); }

  /// Boundary abscissas X_0 = 0 < X_1 < ... < X_N = L.
  std::vector<double> boundaries() const;

  /// Gravity twist expressed in the base frame: Ad_{g_r}^{-1} * G.
  Vec6 gravity_in_base() const;

  bool operator==(const RobotModel& other) const;
};

/// Parse and validate a JSON config document. Throws ModelError with
/// line/field diagnostics on parse failure; an invariant violation lists
/// every failing field.
RobotModel load_model(const std::string& config_text);

/// Canonical JSON emission; load_model(emit_config(m)) == m.
std::string emit_config(const RobotModel& m);

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Composite trapezoidal grid: microsolids_per_section uniformly spaced nodes
/// per section (endpoints included), weights summing to the section length.
/// Interior section boundaries appear once per adjacent section.
std::vector<QuadratureNode> quadrature_grid(const RobotModel& m);

}  // namespace soro
