#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ureg/chart.hpp"
#include "ureg/rk45.hpp"
#include "ureg/tensor.hpp"
#include "ureg/types.hpp"

namespace ureg {

struct GeodesicState {
  int chart = 0;
  Vec position;  // C in B^m
  Vec velocity;  // Z
  double t = 0.0;
};

enum class Termination { ReachedHorizon, LeftAtlas, StepFailure };

struct SwitchEvent {
  double t;
  int from;
  int to;
};

struct GeodesicPath {
  std::vector<GeodesicState> samples;  // strictly increasing times
  std::vector<SwitchEvent> switches;
  Termination termination = Termination::ReachedHorizon;
  std::string failure_reason;

  const GeodesicState& back() const { return samples.back(); }
};

struct GeodesicOptions {
  StepControl step;
  double switch_threshold = 0.9;
  double switch_hysteresis = 0.05;
  double sample_dt = 0.0;  // 0: record every accepted step
};

// (C', Z') = (Z, -Gamma(C)[Z,Z]).
Vec geodesic_rhs(const Vec& velocity, const ChristoffelField& gamma);

// Integrates the geodesic ODE across charts up to time T.
GeodesicPath integrate_geodesic(const ManifoldDescriptor& M, const PointRef& p, const Vec& v, double T,
                                const GeodesicOptions& opt = {});

// max_t | |gamma'(t)|_g - |gamma'(0)|_g | over the recorded samples.
double speed_drift(const GeodesicPath& path, const ManifoldDescriptor& M);

// Uniform short-time existence check on a single chart: integrates from
// (x_p, V_p) with |V_p| = 1 up to tau* = min(delta/(4 sqrt(m)), 1/(8M)) and
// verifies existence, the alpha envelope, the velocity bound and containment.
struct LemmaReport {
  double tau_star = 0.0;
  double gamma_bound = 0.0;  // sampled sup of |Gamma^k_ij| over the chart
  bool exists = true;
  bool envelope_ok = true;
  bool velocity_ok = true;
  bool containment_ok = true;
  double witness_time = -1.0;
  std::vector<std::pair<double, double>> alpha_trace;  // (alpha(t), alpha1(t))
  bool pass() const { return exists && envelope_ok && velocity_ok && containment_ok; }
};

LemmaReport lemma_existence_check(const ManifoldDescriptor& M, int chart_id, const Vec& x_p,
                                  const Vec& v_p, double delta, const GeodesicOptions& opt = {},
                                  std::uint64_t sample_seed = 12345);

// Distance estimation: graph upper bound over chart sample nodes refined by
// polyline relaxation; combinatorial lower bound.
struct DistanceEstimate {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool upper_known = false;
  std::string lower_method;  // "euclidean-comparison" or "chart-crossings"
};

struct DistanceOptions {
  int nodes_per_chart = 96;
  int refine_sweeps = 60;
  int max_segments = 192;
  double equivalence_constant = 1.0;  // c used for the lower bound
  std::uint64_t seed = 12345;
};

DistanceEstimate distance_estimate(const ManifoldDescriptor& M, const PointRef& p, const PointRef& q,
                                   const DistanceOptions& opt = {});

// Distance-sandwich verification on a chart ball: for sampled points around
// x, checks that intrinsic-distance upper bounds are consistent with
//   B_g(p, delta/c)  inside  psi(B^m(x, delta))  inside  B_g(p, c delta).
struct SandwichResult {
  bool pass = true;
  int checked = 0;
  std::string witness;
};

SandwichResult sandwich_check(const ManifoldDescriptor& M, int chart_id, const Vec& x, double delta,
                              double c, int samples, std::uint64_t seed = 12345,
                              const DistanceOptions& dopt = {});

// Normal (exponential) chart at p: geodesic shooting along a g-orthonormal
// frame. The metric is evaluated through the variational flow, not finite
// differences.
class NormalChart {
 public:
  NormalChart(const ManifoldDescriptor& M, PointRef p, double radius, GeodesicOptions opt = {});

  int dim() const { return frame_.cols(); }
  double radius() const { return radius_; }
  const Mat& frame() const { return frame_; }

  // Pulled-back metric of the normal chart at coordinates u (|u| < radius).
  Mat metric(const Vec& u) const;

  // Endpoint exp_p(u) of the shooting geodesic.
  PointRef point(const Vec& u) const;

 private:
  const ManifoldDescriptor* M_;
  PointRef p_;
  double radius_;
  GeodesicOptions opt_;
  Mat frame_;  // columns: g-orthonormal basis at p
};

// Injectivity radius estimation by first-conjugate-point detection along a
// fan of rays plus pairwise crossing search among the shot geodesics.
struct InjEvidence {
  std::string kind;  // "conjugate" or "crossing"
  double radius;
  int ray_a = -1;
  int ray_b = -1;
};

struct InjectivityEstimate {
  PointRef p;
  double lower = 0.0;
  std::optional<double> upper;
  std::vector<InjEvidence> evidence;
  bool budget_exhausted = false;

  double estimate() const { return upper ? *upper : lower; }
};

struct InjectivityOptions {
  int rays = 32;
  double cap = 10.0;
  long budget = 4000000;  // RHS-evaluation budget across all rays
  double bisect_tol = 1e-4;
  std::uint64_t seed = 12345;
  GeodesicOptions geo;
};

InjectivityEstimate injectivity_radius_estimate(const ManifoldDescriptor& M, const PointRef& p,
                                                const InjectivityOptions& opt = {});

// Behavioral completeness probe: integrates a bundle of unit-speed geodesics
// from probe charts and reports whether any left the atlas before the horizon.
struct CompletenessProbe {
  bool complete_on_window = true;
  int launched = 0;
  std::string note;
};

CompletenessProbe completeness_probe(const ManifoldDescriptor& M, double horizon, int directions_per_chart,
                                     int max_charts, std::uint64_t seed = 12345,
                                     const GeodesicOptions& opt = {});

// |v|_g at a chart point.
double g_norm(const ManifoldDescriptor& M, const PointRef& p, const Vec& v);

}  // namespace ureg
