#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ureg/chart.hpp"

namespace ureg {

// Built-in manifold descriptors with documented atlas constructions and
// expected regularity verdicts. "n/a" marks geodesy-harness entries whose
// single-chart description is not meant to satisfy the atlas conditions.
struct CatalogEntry {
  std::string name;
  std::string summary;
  std::string expected_verdict;  // "consistent" | "inconsistent" | "n/a"
  std::function<ManifoldDescriptor()> make;
};

const std::vector<CatalogEntry>& catalog_entries();
ManifoldDescriptor make_catalog(const std::string& name);

// --- individual constructors -------------------------------------------------

// Unit-ball charts on a lattice covering [-W, W]^m; identity metric. The
// lattice spacing is 1 for m = 1 and shrinks like 1/sqrt(m) so the r-balls
// still cover.
ManifoldDescriptor euclidean_space(int m, double W);

// Round sphere S^m via two scaled stereographic charts (scale 2); transition
// is the inversion x -> x / (4|x|^2).
ManifoldDescriptor sphere(int m);

// Hyperbolic space in the ball model on a window around the origin, covered
// by isometric translated charts (all carry the same pulled-back metric).
ManifoldDescriptor poincare_ball(int m);

// The whole ball model as one chart; geodesy harness entry for deep geodesic,
// distance and injectivity runs (its single chart cannot satisfy uniform
// derivative bounds near the rim).
ManifoldDescriptor poincare_ball_global(int m);

// Funnel surface {(t, t^alpha cos th, t^alpha sin th)} with the induced
// first-fundamental-form metric, charts affine in (log t, th), window
// t in [2, t_max].
ManifoldDescriptor funnel(double alpha, double t_max = 6.0);

// Cylinder end with metric (dt/t)^2 + dth^2 in charts affine in (log t, th);
// window t in [t_min, 1].
ManifoldDescriptor b_manifold(double t_min = 0.05);

struct CornerOptions {
  bool stretched = true;
  // Window floors for t and s.
  double t_min = 0.1;
  double s_min = 0.25;
  // Adapt the chart scale in the s-direction to the stretched geometry
  // (uniform constants for the stretched metric). The unstretched default
  // window keeps plain log charts so deep floors stay representable.
  bool scaled_charts = true;
};

// Corner model on (t, th, s) in (0,1] x S^1 x (0,1]:
//   unstretched  s^2 dt^2 + (ts)^2 dth^2 + ds^2
//   stretched    (dt/t)^2 + dth^2 + (ds/(ts))^2
ManifoldDescriptor corner(const CornerOptions& opt);

// Product manifold with block-diagonal metric and paired charts.
ManifoldDescriptor product(const ManifoldDescriptor& A, const ManifoldDescriptor& B);

// Pull-back of the metric through a diffeomorphism f given in the common
// coordinate frame of the charts (requires frames and a global metric).
// f_inverse is used only to validate that f is invertible on samples.
ManifoldDescriptor pullback(const ManifoldDescriptor& M, const std::vector<Expr>& f,
                            const std::vector<Expr>& f_inverse);

// Metric divided by rho^2, with rho given in the common coordinate frame.
ManifoldDescriptor rescale_singular(const ManifoldDescriptor& M, const Expr& rho);

}  // namespace ureg
