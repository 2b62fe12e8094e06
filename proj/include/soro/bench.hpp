#pragma once

#include <string>
#include <vector>

#include "soro/simulation.hpp"

namespace soro {

struct BenchRow {
  int n_sections = 0;
  int nodes = 0;
  double assemble_ns = 0.0;      // median
  double control_step_ns = 0.0;  // median
  int trials = 0;
};

struct BenchFit {
  double slope = 0.0;      // ns per node
  double intercept = 0.0;  // ns
  double r_squared = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  BenchFit fit;  // least squares of median assemble time vs node count
};

/// Scales the base arm to each N (equal section lengths summing to the same
/// total), times a full-mask assembly and one layered control step plus plant
/// step at a fixed bent state. Monotonic clock, warmup discarded, medians
/// reported; runs serially for timing integrity.
BenchReport run_benchmark(const RobotModel& base, const std::vector<int>& n_list,
                          int trials = 30);

std::string bench_report_json(const BenchReport& r);
std::string bench_report_csv(const BenchReport& r);

}  // namespace soro
