#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "soro/bench.hpp"
#include "soro/csv.hpp"
#include "soro/simulation.hpp"

namespace fs = std::filesystem;
using namespace soro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ModelError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
}

int cmd_simulate(const std::string& config_path, bool passive,
                 const std::string& out_dir, double duration_override,
                 long seed_override) {
  const RobotModel model = load_model(read_file(config_path));
  Scenario sc = Scenario::from_model(model);
  if (duration_override > 0.0) sc.duration = duration_override;
  if (seed_override >= 0) {
    sc.seed = static_cast<unsigned long>(seed_override);
    RobotModel reseeded = model;
    reseeded.seed = sc.seed;
    sc = Scenario::from_model(reseeded);
    if (duration_override > 0.0) sc.duration = duration_override;
  }

  const Trajectory traj = passive ? run_passive(sc) : run_closed_loop(sc);

  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "trajectory.csv";
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  emit_csv(traj, csv_path.string());
  const double eps0 = traj.samples.front().epsilon;
  write_file(manifest_path, run_manifest(effective_model(sc), sc, eps0,
                                         passive ? "passive" : "closed_loop"));

  std::cout << "wrote " << csv_path.string() << " (" << traj.samples.size()
            << " samples), epsilon at start = " << eps0 << "\n";
  std::cout << "wrote " << manifest_path.string() << "\n";
  return kExitOk;
}

int cmd_benchmark(const std::string& config_path, std::vector<int> n_list,
                  const std::string& out_dir, int trials) {
  const RobotModel model = load_model(read_file(config_path));
  if (n_list.empty()) n_list = {1, 2, 4, 8, 16};
  const BenchReport report = run_benchmark(model, n_list, trials);

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "bench_report.json", bench_report_json(report));
  write_file(fs::path(out_dir) / "bench_report.csv", bench_report_csv(report));

  std::printf("%12s %8s %16s %18s\n", "n_sections", "nodes", "assemble_ns",
              "control_step_ns");
  for (const auto& r : report.rows) {
    std::printf("%12d %8d %16.0f %18.0f\n", r.n_sections, r.nodes, r.assemble_ns,
                r.control_step_ns);
  }
  std::printf("linear fit vs nodes: slope %.1f ns/node, intercept %.1f ns, "
              "r_squared %.6f\n",
              report.fit.slope, report.fit.intercept, report.fit.r_squared);
  return kExitOk;
}

int cmd_validate(const std::string& config_path) {
  const RobotModel m = load_model(read_file(config_path));
  const DerivedSection d = derived_quantities(m.sections.front());
  const MassSplit split = split_by_fraction(m, m.split_fraction);

  std::printf("%-28s %d\n", "sections (N)", m.num_sections());
  std::printf("%-28s %.10g m\n", "total length L", m.total_length());
  std::printf("%-28s %.10g m\n", "radius r", m.sections.front().radius);
  std::printf("%-28s %.10g kg/m^3\n", "density rho", m.sections.front().density);
  std::printf("%-28s %.10g Pa\n", "young modulus E", m.sections.front().young_modulus);
  std::printf("%-28s %.10g Pa\n", "shear viscosity G_v", m.sections.front().shear_viscosity);
  std::printf("%-28s %.10g\n", "poisson ratio nu", m.sections.front().poisson_ratio);
  std::printf("%-28s %.10g kg/m^3\n", "water density rho_w", m.fluid.water_density);
  std::printf("%-28s %.10g\n", "drag coefficient C_d", m.fluid.drag_coefficient);
  std::printf("%-28s %d\n", "microsolids per section", m.microsolids_per_section);
  std::printf("%-28s %.10g / %.10g\n", "split fraction core/pert", m.split_fraction,
              1.0 - m.split_fraction);
  std::printf("%-28s %.10g m^2\n", "derived area A", d.area);
  std::printf("%-28s %.10g m^4\n", "derived I_x", d.inertia_x);
  std::printf("%-28s %.10g m^4\n", "derived I_y", d.inertia_y);
  std::printf("%-28s %.10g m^4\n", "derived I_z", d.inertia_z);
  std::printf("%-28s %.10g Pa\n", "derived shear modulus G", d.shear_modulus);
  std::printf("%-28s %.10g\n", "epsilon at rest", split.epsilon);

  // One-step smoke assembly at rest.
  const JointState rest = JointState::rest(m);
  const DynamicsTerms terms =
      assemble_terms(m, rest, AbscissaMask::full(m.total_length()));
  const VecX qdd = forward_dynamics(terms, rest.qdot, VecX::Zero(m.dof()),
                                    m.gravity_in_base());
  if (!qdd.allFinite()) throw AssemblyError("smoke assembly produced non-finite accelerations");
  std::printf("%-28s ok\n", "smoke assembly");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete Cosserat soft-arm simulator with layered "
               "two-time-scale control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  bool passive = false;
  double duration = -1.0;
  long seed = -1;
  std::vector<int> n_list;
  int trials = 30;

  auto* sim = app.add_subcommand("simulate", "run a scenario and write CSV + manifest");
  sim->add_option("--config", config_path, "config file path")->required();
  sim->add_flag("--passive", passive, "open-loop run (controller disabled)");
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--duration", duration, "override duration [s]");
  sim->add_option("--seed", seed, "override RNG seed");

  auto* bench = app.add_subcommand("benchmark", "time assembly and control step vs N");
  bench->add_option("--config", config_path, "config file path")->required();
  bench->add_option("--n-list", n_list, "comma-separated section counts")->delimiter(',');
  bench->add_option("--out", out_dir, "output directory");
  bench->add_option("--trials", trials, "timing trials per N (min 20)");

  auto* validate = app.add_subcommand("validate", "validate a config and print derived quantities");
  validate->add_option("--config", config_path, "config file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (const char* env = std::getenv("SORO_SPT_THREADS")) {
    (void)env;  // the cap itself is read inside set_assembly_threads
    set_assembly_threads(static_cast<int>(std::thread::hardware_concurrency()));
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, passive, out_dir, duration, seed);
    if (bench->parsed()) return cmd_benchmark(config_path, n_list, out_dir, trials);
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
