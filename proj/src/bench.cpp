#include "soro/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "json.hpp"

namespace soro {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double>& v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (hi + v[mid - 1]);
  }
  return hi;
}

RobotModel scaled_model(const RobotModel& base, int n) {
  RobotModel m = base;
  const double L = base.total_length();
  SectionSpec proto = base.sections.front();
  proto.length = L / n;
  m.sections.assign(n, proto);
  m.kp_diag = VecX::Constant(6 * n, base.kp_diag.size() ? base.kp_diag[0] : 10.0);
  m.actuation_abscissa = std::min(base.actuation_abscissa, L);
  return m;
}

JointState bench_state(const RobotModel& m) {
  JointState s = JointState::rest(m);
  for (int k = 0; k < m.num_sections(); ++k) {
    s.q[6 * k + 2] += 0.4;     // bent, so the velocity terms are exercised
    s.qdot[6 * k + 2] = 0.1;
    s.qdot[6 * k + 4] = 0.05;
  }
  return s;
}

}  // namespace

BenchReport run_benchmark(const RobotModel& base, const std::vector<int>& n_list,
                          int trials) {
  if (n_list.empty()) throw std::invalid_argument("benchmark n-list is empty");
  trials = std::max(trials, 20);

  const int saved_threads = assembly_threads();
  set_assembly_threads(1);

  struct Setup {
    RobotModel model;
    AbscissaMask full;
    MassSplit split;
    JointState state;
    Gains gains;
    Rates rates;
    Reference ref;
    Vec6 grav;
    DynamicsTerms assemble_buf;
    DynamicsTerms plant_buf;
    int assemble_batch = 1;
    int control_batch = 1;
    std::vector<double> assemble_ns;
    std::vector<double> control_ns;
  };

  std::vector<Setup> setups;
  double sink = 0.0;
  for (int n : n_list) {
    Setup s{scaled_model(base, n), AbscissaMask::full(base.total_length()),
            MassSplit{}, JointState{}, Gains{}, Rates{}, Reference{},
            Vec6::Zero()};
    s.split = split_by_fraction(s.model, s.model.split_fraction);
    s.state = bench_state(s.model);
    s.gains = Gains::from_model(s.model);
    s.rates = Rates{s.model.slow_dt, s.model.fast_dt};
    s.ref = Reference::setpoint(JointState::rest(s.model).q);
    s.grav = s.model.gravity_in_base();
    setups.push_back(std::move(s));
  }

  const auto time_assemble = [&](Setup& s, int batch) {
    const auto t0 = Clock::now();
    for (int b = 0; b < batch; ++b) {
      assemble_terms_into(s.model, s.state, s.full, s.assemble_buf);
      sink += s.assemble_buf.mass(0, 0);
    }
    return std::chrono::duration<double, std::nano>(Clock::now() - t0).count() /
           batch;
  };
  const auto time_control = [&](Setup& s, int batch) {
    const int dof = s.model.dof();
    const auto t0 = Clock::now();
    for (int b = 0; b < batch; ++b) {
      ControllerState cs;
      const VecX z2bar = VecX::Zero(dof);
      const MultirateOutput out =
          multirate_step(s.model, s.split, cs, 0.0, s.state.q, s.state.qdot,
                         z2bar, s.ref, s.gains, s.rates);
      VecX y(2 * dof);
      y << s.state.q, s.state.qdot;
      y = rk4_step(y, 0.0, s.model.fast_dt, [&](double, const VecX& yy) -> VecX {
        JointState plant{yy.head(dof), yy.tail(dof)};
        assemble_terms_into(s.model, plant, s.full, s.plant_buf);
        VecX dy(2 * dof);
        dy.head(dof) = plant.qdot;
        dy.tail(dof) = forward_dynamics(s.plant_buf, plant.qdot, out.u_applied, s.grav);
        return dy;
      });
      sink += y[0];
    }
    return std::chrono::duration<double, std::nano>(Clock::now() - t0).count() /
           batch;
  };

  // Batch sizes target ~10 ms per sample so scheduler noise averages into the
  // batch; interleaved rounds keep every N inside the same noise epoch so the
  // per-N medians stay comparable.
  for (auto& s : setups) {
    const double once = time_assemble(s, 1);
    s.assemble_batch = std::max(1, static_cast<int>(10e6 / std::max(once, 1e3)));
    const double once_c = time_control(s, 1);
    s.control_batch = std::max(1, static_cast<int>(10e6 / std::max(once_c, 1e3)));
  }
  const int warmup_rounds = 2;
  for (int round = 0; round < trials + warmup_rounds; ++round) {
    for (auto& s : setups) {
      const double a = time_assemble(s, s.assemble_batch);
      const double c = time_control(s, s.control_batch);
      if (round >= warmup_rounds) {
        s.assemble_ns.push_back(a);
        s.control_ns.push_back(c);
      }
    }
  }
  set_assembly_threads(saved_threads);
  if (!std::isfinite(sink)) throw std::runtime_error("benchmark state diverged");

  BenchReport report;
  for (auto& s : setups) {
    BenchRow row;
    row.n_sections = s.model.num_sections();
    row.nodes = s.model.num_sections() * s.model.microsolids_per_section;
    row.assemble_ns = median(s.assemble_ns);
    row.control_step_ns = median(s.control_ns);
    row.trials = trials;
    report.rows.push_back(row);
  }

  // Least squares of median assemble time against node count.
  const size_t k = report.rows.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : report.rows) {
    sx += r.nodes;
    sy += r.assemble_ns;
    sxx += double(r.nodes) * r.nodes;
    sxy += double(r.nodes) * r.assemble_ns;
  }
  const double denom = k * sxx - sx * sx;
  if (denom > 0 && k >= 2) {
    report.fit.slope = (k * sxy - sx * sy) / denom;
    report.fit.intercept = (sy - report.fit.slope * sx) / k;
    double ss_res = 0.0;
    const double mean_y = sy / k;
    double ss_tot = 0.0;
    for (const auto& r : report.rows) {
      const double pred = report.fit.slope * r.nodes + report.fit.intercept;
      ss_res += (r.assemble_ns - pred) * (r.assemble_ns - pred);
      ss_tot += (r.assemble_ns - mean_y) * (r.assemble_ns - mean_y);
    }
    report.fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return report;
}

std::string bench_report_json(const BenchReport& r) {
  nlohmann::json j;
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"n_sections", row.n_sections},
                         {"nodes", row.nodes},
                         {"assemble_ns", row.assemble_ns},
                         {"control_step_ns", row.control_step_ns},
                         {"trials", row.trials}});
  }
  j["fit"] = {{"slope_ns_per_node", r.fit.slope},
              {"intercept_ns", r.fit.intercept},
              {"r_squared", r.fit.r_squared}};
  return j.dump(2);
}

std::string bench_report_csv(const BenchReport& r) {
  std::string out = "n_sections,nodes,assemble_ns,control_step_ns,trials\n";
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%d\n", row.n_sections,
                  row.nodes, row.assemble_ns, row.control_step_ns, row.trials);
    out += buf;
  }
  return out;
}

}  // namespace soro
