#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ureg/chart.hpp"
#include "ureg/geodesic.hpp"
#include "ureg/tensor.hpp"

namespace ureg {

enum class BoundTarget { Metric, Inverse, Transitions, Christoffel };

// Sampled estimate of the equivalence constant c >= 1 with
// |xi|^2 / c <= g(xi, xi) <= c |xi|^2 on the sampled chart.
double metric_equivalence_constant(const Chart& chart, const SamplePlan& plan);

// Sampled sup of max_{|a| <= k} |d^a (target entries)| over the chart.
double derivative_bounds(const Chart& chart, BoundTarget target, int k, const SamplePlan& plan,
                         const Atlas* atlas = nullptr);

// Sampled sup over all charts' shrunken balls of | nabla^k R |_g.
double curvature_bounds(const ManifoldDescriptor& M, int k, const SamplePlan& plan);

struct ReportConfig {
  int k_max = 4;
  int grid_levels = 3;
  int base_samples = 24;  // per chart at the coarsest level
  int sample_growth = 4;
  double divergence_ratio = 4.0;
  double abs_floor = 1e-9;
  double sample_radius = 0.95;
  std::uint64_t seed = 12345;
  long budget = 50000000;  // (chart, sample) jet evaluations

  bool run_injectivity = true;
  double inj_cap = 10.0;
  int inj_rays = 8;
  long inj_budget = 600000;

  bool run_completeness = true;
  double completeness_horizon = 1.0;
  int completeness_dirs = 4;
};

struct QuantityTrend {
  std::string name;
  std::vector<double> levels;  // estimate per refinement level
  double growth = 1.0;         // max successive ratio
  int witness_chart = -1;
  Vec witness_point;
};

struct RegularityReport {
  std::string manifold;
  std::string window_note;
  int dim = 0;
  double shrink_radius = 0.0;
  ReportConfig config;

  int multiplicity = 0;
  bool cover_ok = true;
  std::optional<PointRef> cover_witness;

  double equivalence_c = 1.0;
  std::vector<QuantityTrend> quantities;

  std::optional<double> injectivity_lower;
  bool completeness_ok = true;
  std::string completeness_note;

  std::string verdict;  // consistent-with-uniformly-regular | inconsistent | inconclusive
  std::string witness;  // populated when inconsistent
  bool budget_exhausted = false;
};

RegularityReport regularity_report(const ManifoldDescriptor& M, const ReportConfig& config);

// Deterministic serialization (stable key order, shortest-round-trip floats).
std::string report_to_json(const RegularityReport& report);
void print_report_table(const RegularityReport& report, std::ostream& out);

}  // namespace ureg
