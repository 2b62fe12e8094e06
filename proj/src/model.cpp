#include "soro/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace soro {

using nlohmann::json;

DerivedSection derived_quantities(const SectionSpec& s) {
  DerivedSection d;
  const double r2 = s.radius * s.radius;
  const double r4 = r2 * r2;
  d.area = std::numbers::pi * r2;
  d.inertia_y = std::numbers::pi * r4 / 4.0;
  d.inertia_z = d.inertia_y;
  d.inertia_x = std::numbers::pi * r4 / 2.0;
  d.shear_modulus = s.young_modulus / (2.0 * (1.0 + s.poisson_ratio));

  Vec6 geom;
  geom << d.inertia_x, d.inertia_y, d.inertia_z, d.area, d.area, d.area;
  d.screw_inertia_diag = s.density * geom;
  d.stiffness_diag << d.shear_modulus * d.inertia_x,
      s.young_modulus * d.inertia_y, s.young_modulus * d.inertia_z,
      s.young_modulus * d.area, d.shear_modulus * d.area,
      d.shear_modulus * d.area;
  d.viscosity_diag = s.shear_viscosity * geom;
  return d;
}

double RobotModel::total_length() const {
  double L = 0.0;
  for (const auto& s : sections) L += s.length;
  return L;
}

std::vector<double> RobotModel::boundaries() const {
  std::vector<double> b(sections.size() + 1, 0.0);
  for (size_t i = 0; i < sections.size(); ++i) b[i + 1] = b[i] + sections[i].length;
  return b;
}

Vec6 RobotModel::gravity_in_base() const {
  return adjoint_inverse_unchecked(base_transform) * gravity;
}

bool RobotModel::operator==(const RobotModel& other) const {
  return sections == other.sections && fluid == other.fluid &&
         microsolids_per_section == other.microsolids_per_section &&
         base_transform.rotation == other.base_transform.rotation &&
         base_transform.position == other.base_transform.position &&
         actuation_abscissa == other.actuation_abscissa &&
         tip_load == other.tip_load && gravity == other.gravity &&
         added_mass_diag == other.added_mass_diag &&
         split_fraction == other.split_fraction && kp_diag == other.kp_diag &&
         phi == other.phi && duration == other.duration &&
         fast_dt == other.fast_dt && slow_dt == other.slow_dt &&
         seed == other.seed && gravity_on == other.gravity_on &&
         drag_on == other.drag_on && viscosity_on == other.viscosity_on &&
         tip_load_on == other.tip_load_on &&
         initial_perturbation == other.initial_perturbation &&
         start_on_manifold == other.start_on_manifold;
}

namespace {

Vec6 vec6_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 6) {
    throw ModelError("field '" + field + "' must be an array of 6 numbers");
  }
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j[i].get<double>();
  return v;
}

void append_violation(std::string& msg, const std::string& what) {
  if (!msg.empty()) msg += "; ";
  msg += what;
}

}  // namespace

RobotModel load_model(const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::parse_error& e) {
    // parse_error reports a byte offset; convert it to a line number.
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < config_text.size(); ++i) {
      if (config_text[i] == '\n') ++line;
    }
    throw ModelError("config parse error at line " + std::to_string(line) +
                     ": " + e.what());
  }

  RobotModel m;
  std::string violations;

  if (!j.contains("sections") || !j["sections"].is_array() || j["sections"].empty()) {
    throw ModelError("config requires a non-empty 'sections' array");
  }
  for (const auto& js : j["sections"]) {
    SectionSpec s;
    if (js.contains("length")) s.length = js["length"].get<double>();
    if (js.contains("radius")) s.radius = js["radius"].get<double>();
    if (js.contains("density")) s.density = js["density"].get<double>();
    if (js.contains("young_modulus")) s.young_modulus = js["young_modulus"].get<double>();
    if (js.contains("shear_viscosity")) s.shear_viscosity = js["shear_viscosity"].get<double>();
    if (js.contains("poisson_ratio")) s.poisson_ratio = js["poisson_ratio"].get<double>();
    if (js.contains("rest_strain")) s.rest_strain = vec6_from(js["rest_strain"], "rest_strain");
    m.sections.push_back(s);
  }
  if (j.contains("fluid")) {
    const auto& jf = j["fluid"];
    if (jf.contains("water_density")) m.fluid.water_density = jf["water_density"].get<double>();
    if (jf.contains("drag_coefficient")) m.fluid.drag_coefficient = jf["drag_coefficient"].get<double>();
  }
  if (j.contains("microsolids_per_section")) {
    m.microsolids_per_section = j["microsolids_per_section"].get<int>();
  }
  if (j.contains("base_transform")) {
    const auto& jb = j["base_transform"];
    if (!jb.is_array() || jb.size() != 16) {
      throw ModelError("field 'base_transform' must be a 4x4 row-major array of 16 numbers");
    }
    Mat4 b;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) b(r, c) = jb[4 * r + c].get<double>();
    m.base_transform = Pose::from_matrix(b);
  }
  const double L = m.total_length();
  m.actuation_abscissa = j.value("actuation_abscissa", L);
  if (j.contains("tip_load")) m.tip_load = vec6_from(j["tip_load"], "tip_load");
  if (j.contains("gravity")) m.gravity = vec6_from(j["gravity"], "gravity");
  if (j.contains("added_mass")) m.added_mass_diag = vec6_from(j["added_mass"], "added_mass");
  m.split_fraction = j.value("split_fraction", 0.6);

  const int dof = m.dof();
  m.kp_diag = VecX::Constant(dof, 10.0);
  if (j.contains("gains")) {
    const auto& jg = j["gains"];
    if (jg.contains("kp")) {
      if (jg["kp"].is_number()) {
        m.kp_diag.setConstant(jg["kp"].get<double>());
      } else if (jg["kp"].is_array()) {
        if (static_cast<int>(jg["kp"].size()) != dof) {
          throw ModelError("gains.kp array must have 6N entries");
        }
        for (int i = 0; i < dof; ++i) m.kp_diag[i] = jg["kp"][i].get<double>();
      }
    }
    m.phi = jg.value("phi", 0.5);
  }
  if (j.contains("integration")) {
    const auto& ji = j["integration"];
    m.duration = ji.value("duration", m.duration);
    m.fast_dt = ji.value("fast_dt", m.fast_dt);
    m.slow_dt = ji.value("slow_dt", m.slow_dt);
    m.seed = ji.value("seed", m.seed);
    m.gravity_on = ji.value("gravity", m.gravity_on);
    m.drag_on = ji.value("drag", m.drag_on);
    m.viscosity_on = ji.value("viscosity", m.viscosity_on);
    m.tip_load_on = ji.value("tip_load", m.tip_load_on);
    m.initial_perturbation = ji.value("initial_perturbation", m.initial_perturbation);
    m.start_on_manifold = ji.value("start_on_manifold", m.start_on_manifold);
  }

  // Validation: collect every failing field.
  for (size_t i = 0; i < m.sections.size(); ++i) {
    const auto& s = m.sections[i];
    const std::string tag = "sections[" + std::to_string(i) + "].";
    if (!(s.length > 0.0)) append_violation(violations, tag + "length must be > 0");
    if (!(s.radius > 0.0)) append_violation(violations, tag + "radius must be > 0");
    if (!(s.density > 0.0)) append_violation(violations, tag + "density must be > 0");
    if (!(s.young_modulus > 0.0)) append_violation(violations, tag + "young_modulus must be > 0");
    if (!(s.poisson_ratio >= 0.0 && s.poisson_ratio < 0.5)) {
      append_violation(violations, tag + "poisson_ratio must be in [0, 0.5)");
    }
  }
  if (!(m.fluid.water_density > 0.0)) append_violation(violations, "fluid.water_density must be > 0");
  if (!(m.fluid.drag_coefficient >= 0.0)) append_violation(violations, "fluid.drag_coefficient must be >= 0");
  if (m.microsolids_per_section < 2) append_violation(violations, "microsolids_per_section must be >= 2");
  if (!(m.actuation_abscissa >= 0.0 && m.actuation_abscissa <= L)) {
    append_violation(violations, "actuation_abscissa must lie in [0, L]");
  }
  if (!(m.split_fraction > 0.0 && m.split_fraction < 1.0)) {
    append_violation(violations, "split_fraction must lie in (0, 1)");
  }
  if (!m.base_transform.is_valid()) append_violation(violations, "base_transform is not a rigid transform");
  if (!(m.phi > 0.0 && m.phi < 1.0)) append_violation(violations, "gains.phi must lie in (0, 1)");
  if ((m.kp_diag.array() <= 0.0).any()) append_violation(violations, "gains.kp entries must be > 0");
  if (!(m.duration > 0.0)) append_violation(violations, "integration.duration must be > 0");
  if (!(m.fast_dt > 0.0)) append_violation(violations, "integration.fast_dt must be > 0");
  if (!(m.slow_dt >= m.fast_dt)) append_violation(violations, "integration.slow_dt must be >= fast_dt");

  if (!violations.empty()) throw ModelError("config validation failed: " + violations);
  return m;
}

std::string emit_config(const RobotModel& m) {
  json j;
  for (const auto& s : m.sections) {
    json js;
    js["length"] = s.length;
    js["radius"] = s.radius;
    js["density"] = s.density;
    js["young_modulus"] = s.young_modulus;
    js["shear_viscosity"] = s.shear_viscosity;
    js["poisson_ratio"] = s.poisson_ratio;
    js["rest_strain"] = std::vector<double>(s.rest_strain.data(), s.rest_strain.data() + 6);
    j["sections"].push_back(js);
  }
  j["fluid"]["water_density"] = m.fluid.water_density;
  j["fluid"]["drag_coefficient"] = m.fluid.drag_coefficient;
  j["microsolids_per_section"] = m.microsolids_per_section;
  std::vector<double> b;
  const Mat4 bm = m.base_transform.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) b.push_back(bm(r, c));
  j["base_transform"] = b;
  j["actuation_abscissa"] = m.actuation_abscissa;
  j["tip_load"] = std::vector<double>(m.tip_load.data(), m.tip_load.data() + 6);
  j["gravity"] = std::vector<double>(m.gravity.data(), m.gravity.data() + 6);
  j["added_mass"] = std::vector<double>(m.added_mass_diag.data(), m.added_mass_diag.data() + 6);
  j["split_fraction"] = m.split_fraction;
  j["gains"]["kp"] = std::vector<double>(m.kp_diag.data(), m.kp_diag.data() + m.kp_diag.size());
  j["gains"]["phi"] = m.phi;
  j["integration"]["duration"] = m.duration;
  j["integration"]["fast_dt"] = m.fast_dt;
  j["integration"]["slow_dt"] = m.slow_dt;
  j["integration"]["seed"] = m.seed;
  j["integration"]["gravity"] = m.gravity_on;
  j["integration"]["drag"] = m.drag_on;
  j["integration"]["viscosity"] = m.viscosity_on;
  j["integration"]["tip_load"] = m.tip_load_on;
  j["integration"]["initial_perturbation"] = m.initial_perturbation;
  j["integration"]["start_on_manifold"] = m.start_on_manifold;
  return j.dump(2);
}

std::vector<QuadratureNode> quadrature_grid(const RobotModel& m) {
  std::vector<QuadratureNode> nodes;
  const int per = m.microsolids_per_section;
  nodes.reserve(static_cast<size_t>(per) * m.sections.size());
  double x0 = 0.0;
  for (int k = 0; k < m.num_sections(); ++k) {
    const double len = m.sections[k].length;
    const double h = len / (per - 1);
    for (int i = 0; i < per; ++i) {
      QuadratureNode n;
      n.abscissa = x0 + i * h;
      n.weight = (i == 0 || i == per - 1) ? 0.5 * h : h;
      n.section = k;
      nodes.push_back(n);
    }
    x0 += len;
  }
  return nodes;
}

}  // namespace soro
