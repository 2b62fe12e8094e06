#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "soro/csv.hpp"
#include "soro/simulation.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace soro;
using namespace soro::testutil;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / "soro_cli_out.txt";
  const std::string cmd =
      std::string(SORO_CLI_PATH) + " " + args + " > " + tmp.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.code = WEXITSTATUS(raw);
  std::ifstream f(tmp);
  std::ostringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

Trajectory tiny_trajectory(int dof, int samples) {
  Trajectory t;
  t.dof = dof;
  for (int i = 0; i < samples; ++i) {
    TrajectorySample s;
    s.t = i * 0.1 + 1.0 / 3.0;
    auto fill = [&](VecX& v, double base) {
      v = VecX::LinSpaced(dof, base, base + 0.987654321012345678 * dof);
    };
    fill(s.q, 0.1 + i);
    fill(s.qd, 0.9 - i);
    fill(s.qdot, -3.7 / (i + 1));
    fill(s.z2bar, 1e-17 * (i + 1));
    fill(s.z2tilde, 1e17 * (i + 1));
    fill(s.us, std::acos(-1.0) * (i + 1));
    fill(s.uf, -1.0 / 7.0 * (i + 1));
    fill(s.e1, 2.0 / 3.0);
    fill(s.e2, -0.0);
    s.V = 1.0 / 3.0;
    s.W = 22.0 / 7.0;
    s.Sigma = s.V + s.W;
    s.epsilon = 0.123456789012345678;
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("trajectory CSV schema and 17-digit round trip") {
  const int dof = 12;
  const Trajectory t = tiny_trajectory(dof, 3);
  const std::string text = trajectory_csv(t);

  // Header plus three sample rows.
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') + 1 == 1 + 9 * dof + 4);
  CHECK(header.substr(0, 4) == "t,q_");
  CHECK(header.find(",V,W,Sigma,epsilon") != std::string::npos);

  const Trajectory back = parse_trajectory_csv(text);
  REQUIRE(back.dof == dof);
  REQUIRE(back.samples.size() == t.samples.size());
  for (size_t i = 0; i < t.samples.size(); ++i) {
    CHECK(back.samples[i].t == t.samples[i].t);
    CHECK((back.samples[i].q - t.samples[i].q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.samples[i].z2tilde - t.samples[i].z2tilde).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.samples[i].W == t.samples[i].W);
    CHECK(back.samples[i].epsilon == t.samples[i].epsilon);
  }
  // Re-emission is byte-identical.
  CHECK(trajectory_csv(back) == text);

  CHECK_THROWS_AS(trajectory_csv(Trajectory{}), std::invalid_argument);
}

TEST_CASE("cli: missing config exits 2 and names the path") {
  const CmdResult r = run_cli("validate --config /nonexistent/no_such.json");
  CHECK(r.code == 2);
  CHECK(r.out.find("/nonexistent/no_such.json") != std::string::npos);
}

TEST_CASE("cli: validate prints paper parameters on the shipped config") {
  const std::string cfg = std::string(SORO_CONFIG_DIR) + "/paper_default.json";
  const CmdResult r = run_cli("validate --config " + cfg);
  CHECK(r.code == 0);
  CHECK(r.out.find("7.853981634e-05") != std::string::npos);
  CHECK(r.out.find("110000") != std::string::npos);
  CHECK(r.out.find("epsilon at rest") != std::string::npos);
  CHECK(r.out.find("smoke assembly") != std::string::npos);
}

TEST_CASE("cli: honors the assembly thread cap from the environment") {
  const std::string cfg = std::string(SORO_CONFIG_DIR) + "/paper_default.json";
  const fs::path tmp = fs::temp_directory_path() / "soro_cli_threads.txt";
  const std::string cmd = std::string("SORO_SPT_THREADS=2 ") + SORO_CLI_PATH +
                          " validate --config " + cfg + " > " + tmp.string() + " 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
}

TEST_CASE("cli: validate rejects an invalid poisson ratio") {
  const fs::path bad = fs::temp_directory_path() / "soro_bad_cfg.json";
  {
    std::ofstream f(bad);
    f << R"({"sections":[{"length":0.5,"radius":0.1,"poisson_ratio":0.6}]})";
  }
  const CmdResult r = run_cli("validate --config " + bad.string());
  CHECK(r.code == 2);
  CHECK(r.out.find("poisson_ratio") != std::string::npos);
}

TEST_CASE("cli: simulate writes a parseable trajectory and manifest") {
  const std::string cfg = std::string(SORO_CONFIG_DIR) + "/paper_default.json";
  const fs::path out = fs::temp_directory_path() / "soro_sim_out";
  fs::remove_all(out);

  const CmdResult r = run_cli("simulate --config " + cfg + " --duration 0.02 --out " +
                              out.string());
  CHECK(r.code == 0);
  std::ifstream csv(out / "trajectory.csv");
  REQUIRE(csv.good());
  std::ostringstream ss;
  ss << csv.rdbuf();
  const Trajectory traj = parse_trajectory_csv(ss.str());
  CHECK(traj.dof == 24);
  CHECK(traj.samples.size() == 21);
  CHECK(fs::exists(out / "manifest.json"));

  // Passive mode zeroes the controller columns.
  const fs::path out2 = fs::temp_directory_path() / "soro_sim_passive";
  fs::remove_all(out2);
  const CmdResult rp = run_cli("simulate --passive --config " + cfg +
                               " --duration 0.02 --out " + out2.string());
  CHECK(rp.code == 0);
  std::ifstream csv2(out2 / "trajectory.csv");
  std::ostringstream ss2;
  ss2 << csv2.rdbuf();
  const Trajectory ptraj = parse_trajectory_csv(ss2.str());
  for (const auto& s : ptraj.samples) {
    CHECK(s.us.norm() == 0.0);
    CHECK(s.uf.norm() == 0.0);
    CHECK(s.e1.norm() == 0.0);
    CHECK(s.V == 0.0);
  }
}
