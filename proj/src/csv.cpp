#include "soro/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace soro {

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::vector<std::string> vector_headers(const char* stem, int n) {
  std::vector<std::string> h;
  h.reserve(n);
  for (int i = 1; i <= n; ++i) h.push_back(std::string(stem) + "_" + std::to_string(i));
  return h;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  if (traj.samples.empty()) {
    throw std::invalid_argument("cannot emit an empty trajectory");
  }
  const int dof = traj.dof;
  std::string out;
  out.reserve(traj.samples.size() * (9 * dof + 5) * 26);

  out += "t";
  for (const char* stem : {"q", "qd", "qdot", "z2bar", "z2tilde", "us", "uf", "e1", "e2"}) {
    for (const auto& h : vector_headers(stem, dof)) {
      out += ',';
      out += h;
    }
  }
  out += ",V,W,Sigma,epsilon\n";

  for (const auto& s : traj.samples) {
    append_double(out, s.t);
    for (const VecX* v : {&s.q, &s.qd, &s.qdot, &s.z2bar, &s.z2tilde, &s.us,
                          &s.uf, &s.e1, &s.e2}) {
      for (int i = 0; i < dof; ++i) {
        out += ',';
        append_double(out, (*v)[i]);
      }
    }
    for (double x : {s.V, s.W, s.Sigma, s.epsilon}) {
      out += ',';
      append_double(out, x);
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << trajectory_csv(traj);
  if (!f) throw std::runtime_error("write failed: " + path);
}

Trajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  const size_t cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if ((cols - 5) % 9 != 0) throw std::runtime_error("unexpected CSV column count");
  const int dof = static_cast<int>((cols - 5) / 9);

  Trajectory traj;
  traj.dof = dof;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    vals.reserve(cols);
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      vals.push_back(std::strtod(line.c_str() + pos, nullptr));
      pos = next + 1;
    }
    if (vals.size() != cols) throw std::runtime_error("ragged CSV row");

    TrajectorySample s;
    size_t k = 0;
    s.t = vals[k++];
    for (VecX* v : {&s.q, &s.qd, &s.qdot, &s.z2bar, &s.z2tilde, &s.us, &s.uf, &s.e1, &s.e2}) {
      v->resize(dof);
      for (int i = 0; i < dof; ++i) (*v)[i] = vals[k++];
    }
    s.V = vals[k++];
    s.W = vals[k++];
    s.Sigma = vals[k++];
    s.epsilon = vals[k++];
    traj.samples.push_back(std::move(s));
  }
  return traj;
}

std::string run_manifest(const RobotModel& resolved, const Scenario& sc,
                         double epsilon, const std::string& mode) {
  nlohmann::json j;
  j["tool"] = "soro_spt";
  j["version"] = "0.1.0";
  j["mode"] = mode;
  j["epsilon_at_start"] = epsilon;
  j["duration"] = sc.duration;
  j["fast_dt"] = sc.fast_dt;
  j["slow_dt"] = sc.slow_dt;
  j["seed"] = sc.seed;
  j["toggles"] = {{"gravity", sc.toggles.gravity},
                  {"drag", sc.toggles.drag},
                  {"viscosity", sc.toggles.viscosity},
                  {"tip_load", sc.toggles.tip_load}};
  j["resolved_config"] = nlohmann::json::parse(emit_config(resolved));
  return j.dump(2);
}

}  // namespace soro
