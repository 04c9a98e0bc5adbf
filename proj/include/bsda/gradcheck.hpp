#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bsda/graph.hpp"

namespace bsda {

/// Scalar function of a list of leaves, rebuilt on every evaluation.
using GraphFunction = std::function<ad::Var(ad::Graph&, std::span<const ad::Var>)>;

struct GradcheckOptions {
  double step = 1e-6;
  /// Coordinates checked per input; all when <= 0.
  int max_coordinates = 0;
  std::uint64_t seed = 0;
  /// Installed on the graph whose backward produces the analytic gradient.
  ad::Graph::BackwardHook hook;
};

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-10) over the
/// checked coordinates of every input, using central differences.
double gradient_error(const GraphFunction& f, std::vector<ad::Tensor> inputs, const GradcheckOptions& options = {});

struct GradcheckCase {
  std::string name;
  double tolerance = 1e-4;
};

struct GradcheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int seeds = 0;
  bool passed = false;
};

struct GradcheckSuiteOptions {
  std::uint64_t seed = 0;
  int seeds = 10;
  /// Scales the upstream gradient of this op by 1.5 before its backward runs.
  std::string corrupt_op;
};

std::vector<GradcheckCase> gradcheck_cases();

/// Runs every case over `seeds` random draws.
std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckSuiteOptions& options);
GradcheckResult run_gradcheck_case(const std::string& name, const GradcheckSuiteOptions& options);

/// `op max_rel_error tolerance seeds status` table.
void print_gradcheck_table(std::ostream& os, std::span<const GradcheckResult> results);

}  // namespace bsda
