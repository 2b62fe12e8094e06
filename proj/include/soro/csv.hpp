#pragma once

#include <string>

#include "soro/simulation.hpp"

namespace soro {

/// Columnar trajectory CSV, one row per fast sample:
///   t, q[6N], qd[6N], qdot[6N], z2bar[6N], z2tilde[6N], us[6N], uf[6N],
///   e1[6N], e2[6N], V, W, Sigma, epsilon
/// Floats are printed with 17 significant digits so a parse-back is
/// bit-exact.
void emit_csv(const Trajectory& traj, const std::string& path);
std::string trajectory_csv(const Trajectory& traj);

/// Inverse of trajectory_csv, used for round-trip checks and downstream
/// tooling.
Trajectory parse_trajectory_csv(const std::string& text);

/// Run manifest: resolved parameters, epsilon, version, mode.
std::string run_manifest(const RobotModel& resolved, const Scenario& sc,
                         double epsilon, const std::string& mode);

}  // namespace soro
