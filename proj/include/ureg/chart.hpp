#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ureg/expr.hpp"
#include "ureg/jet.hpp"
#include "ureg/sampling.hpp"
#include "ureg/types.hpp"

namespace ureg {

// A point of the manifold, always presented through some chart.
struct PointRef {
  int chart = 0;
  Vec x;
};

// Transition data from the owning chart to chart `to`: the map phi_to o psi_from
// as m expressions in x1..xm, valid on the overlap domain {overlap >= 0}.
struct Transition {
  int to = -1;
  std::vector<Expr> map;
  Expr overlap;
};

// A normalized chart: image is the unit ball B^m. `metric` holds the
// pull-back metric entries g_ij as expressions in chart coordinates,
// row-major m*m, symmetric. `frame`, when present, expresses the chart's
// parameterization in a common coordinate frame of the manifold (used by
// metric rescaling, diffeomorphism pullback and plotting).
struct Chart {
  int id = 0;
  int dim = 0;
  std::vector<Expr> metric;
  std::vector<Transition> neighbors;
  std::vector<Expr> frame;

  // Refinement depth band: charts with depth d are included from refinement
  // level d+1 on, so windowed descriptors can demonstrate how estimates move
  // as the tested window grows toward an end.
  int depth = 0;
  // Boundary charts sit at the edge of a tested window; the cover condition
  // is not required to hold on them (they may still cover others' points).
  bool boundary = false;
  // Probe charts are preferred launch sites for geodesic diagnostics.
  bool probe = true;

  const Expr& metric_entry(int i, int j) const { return metric[i * dim + j]; }
  const Transition* find_neighbor(int to) const;
};

struct Atlas {
  int dim = 0;
  double shrink_radius = 0.6;  // r in (0,1)
  std::vector<Chart> charts;
  std::optional<bool> oriented;  // declared, not verified

  const Chart& chart(int id) const;
};

struct ManifoldDescriptor {
  std::string name;
  Atlas atlas;
  std::string window_note;  // human-readable description of the tested window
  // Metric of the manifold in the common frame coordinates (m*m expressions),
  // when the charts carry frames; enables metric pullback through frame-level
  // diffeomorphisms.
  std::vector<Expr> global_metric;
};

// Pull-back metric at a point with entrywise jets.
struct MetricJets {
  int dim = 0;
  std::vector<Jet> entries;  // row-major dim*dim

  const Jet& at(int i, int j) const { return entries[i * dim + j]; }
  Jet& at(int i, int j) { return entries[i * dim + j]; }
  int order() const { return entries.empty() ? -1 : entries[0].order(); }
  Mat value() const;
};

// y = (phi_to o psi_from)(x). Throws AtlasError when `to` is not a neighbour
// or x lies outside the declared overlap domain.
Vec transition_point(const Atlas& atlas, int from, int to, const Vec& x);

// Same map with jets to the requested order (component jets in x).
std::vector<Jet> transition_jets(const Atlas& atlas, int from, int to, const Vec& x, int order);

// Jacobian d(transition)/dx at x.
Mat transition_jacobian(const Atlas& atlas, int from, int to, const Vec& x);

bool overlap_contains(const Chart& chart, const Transition& t, const Vec& x);

// Neighbour (or the chart itself) whose image of x is deepest inside the
// ball; used for chart switching. Returns nullopt when x maps outside every
// candidate chart.
struct ChartTarget {
  int chart;
  Vec y;
};
std::optional<ChartTarget> deepest_chart(const Atlas& atlas, int from, const Vec& x);

// Pull-back metric with jets to order K; verifies symmetry of the expression
// matrix entries at order 0 and positivity (throws NumericError when the
// evaluated matrix is not SPD).
MetricJets pullback_metric(const Chart& chart, const Vec& x, int order);

// Maximum over sampled points of the number of chart patches containing the
// point; a lower bound for the true multiplicity that grows under refinement.
int multiplicity(const Atlas& atlas, const SamplePlan& plan);

struct CoverCheck {
  bool covered = true;
  std::optional<PointRef> witness;
};

// Verifies that every sampled point of every non-boundary chart lies inside
// psi_kappa(r B^m) for some chart kappa.
CoverCheck shrink_cover_check(const Atlas& atlas, const SamplePlan& plan);

// Structural and sampled consistency checks; returns human-readable findings
// (empty when the atlas is well-formed).
std::vector<std::string> validate_atlas(const Atlas& atlas, std::uint64_t seed = 12345);

}  // namespace ureg
