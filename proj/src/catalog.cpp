#include "ureg/catalog.hpp"

#include <cmath>
#include <map>

#include "ureg/errors.hpp"

namespace ureg {

namespace {

Expr lit(double v) { return Expr::constant(v); }
Expr var(int i) { return Expr::variable(i); }

Expr norm2(const std::vector<Expr>& v) {
  Expr acc = v[0] * v[0];
  for (std::size_t i = 1; i < v.size(); ++i) acc = acc + v[i] * v[i];
  return acc;
}

std::vector<Expr> identity_metric(int m) {
  std::vector<Expr> g;
  g.reserve(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g.push_back(lit(i == j ? 1.0 : 0.0));
  return g;
}

std::vector<Expr> vars_of(int m) {
  std::vector<Expr> v;
  for (int i = 0; i < m; ++i) v.push_back(var(i));
  return v;
}

// Mobius translation of the ball model moving 0 to a, applied to expressions.
std::vector<Expr> mobius_translate(const Vec& a, const std::vector<Expr>& u) {
  const int m = static_cast<int>(u.size());
  const double a2 = a.squaredNorm();
  Expr dot = lit(0.0);
  for (int i = 0; i < m; ++i) dot = dot + lit(a[i]) * u[i];
  Expr u2 = norm2(u);
  Expr lead = lit(1.0) + lit(2.0) * dot + u2;           // 1 + 2<a,u> + |u|^2
  Expr den = lit(1.0) + lit(2.0) * dot + lit(a2) * u2;  // 1 + 2<a,u> + |a|^2 |u|^2
  std::vector<Expr> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) out.push_back((lead * lit(a[i]) + lit(1.0 - a2) * u[i]) / den);
  return out;
}

Vec mobius_translate_num(const Vec& a, const Vec& u) {
  const double a2 = a.squaredNorm(), u2 = u.squaredNorm(), dot = a.dot(u);
  const double lead = 1.0 + 2.0 * dot + u2;
  const double den = 1.0 + 2.0 * dot + a2 * u2;
  return (lead * a + (1.0 - a2) * u) / den;
}

double hyperbolic_center_distance(const Vec& a, const Vec& b) {
  const Vec moved = mobius_translate_num(-a, b);
  return 2.0 * std::atanh(std::min(moved.norm(), 1.0 - 1e-15));
}

double wrap_angle(double th) { return std::remainder(th, 2.0 * M_PI); }

// Lattice spacing so that r-shrunken unit-ball charts on the lattice cover.
double lattice_spacing(int m, double r) { return 2.0 * r * 0.95 / std::sqrt(static_cast<double>(m)); }

std::vector<double> linspace_cover(double lo, double hi, double max_step) {
  const int n = std::max(2, static_cast<int>(std::ceil((hi - lo) / max_step)) + 1);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

// --- Euclidean ---------------------------------------------------------------

ManifoldDescriptor euclidean_space(int m, double W) {
  if (m < 1 || m > 4) throw Error("euclidean_space: dimension must be 1..4");
  if (W < 1.0) throw Error("euclidean_space: window half-width must be >= 1");

  const double r = 0.6;
  const double spacing = (m == 1) ? 1.0 : lattice_spacing(m, r);
  const int N = static_cast<int>(std::ceil(W / spacing));

  ManifoldDescriptor M;
  M.name = "euclidean" + std::to_string(m);
  M.window_note = "lattice window [-" + std::to_string(N * spacing) + ", " +
                  std::to_string(N * spacing) + "]^" + std::to_string(m);
  M.atlas.dim = m;
  M.atlas.shrink_radius = r;
  M.atlas.oriented = true;
  M.global_metric = identity_metric(m);

  // Enumerate lattice points k in [-N, N]^m.
  std::vector<std::vector<int>> lattice;
  std::vector<int> k(m, -N);
  while (true) {
    lattice.push_back(k);
    int d = m - 1;
    while (d >= 0 && k[d] == N) {
      k[d] = -N;
      --d;
    }
    if (d < 0) break;
    ++k[d];
  }

  auto center_of = [&](const std::vector<int>& kk) {
    Vec c(m);
    for (int i = 0; i < m; ++i) c[i] = spacing * kk[i];
    return c;
  };

  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    const Vec c = center_of(lattice[idx]);
    Chart chart;
    chart.id = static_cast<int>(idx);
    chart.dim = m;
    chart.metric = identity_metric(m);
    for (int i = 0; i < m; ++i) chart.frame.push_back(lit(c[i]) + var(i));
    chart.boundary = false;
    for (int i = 0; i < m; ++i)
      if (std::abs(lattice[idx][i]) == N) chart.boundary = true;
    chart.probe = true;
    for (int i = 0; i < m; ++i)
      if (lattice[idx][i] != 0) chart.probe = false;
    M.atlas.charts.push_back(std::move(chart));
  }

  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Vec ci = center_of(lattice[i]);
    for (std::size_t j = 0; j < lattice.size(); ++j) {
      if (i == j) continue;
      const Vec cj = center_of(lattice[j]);
      const Vec d = ci - cj;
      if (d.norm() >= 2.0) continue;
      Transition t;
      t.to = static_cast<int>(j);
      std::vector<Expr> shifted;
      for (int a = 0; a < m; ++a) {
        t.map.push_back(var(a) + lit(d[a]));
        shifted.push_back(var(a) + lit(d[a]));
      }
      t.overlap = lit(1.0) - norm2(shifted);
      M.atlas.charts[i].neighbors.push_back(std::move(t));
    }
  }
  return M;
}

// --- Sphere -------------------------------------------------------------------

ManifoldDescriptor sphere(int m) {
  if (m < 1 || m > 3) throw Error("sphere: dimension must be 1..3");
  ManifoldDescriptor M;
  M.name = "sphere" + std::to_string(m);
  M.window_note = "entire sphere; two scaled stereographic charts";
  M.atlas.dim = m;
  M.atlas.shrink_radius = 0.6;
  M.atlas.oriented = false;  // inversion transition reverses orientation

  auto round_metric = [&]() {
    // pull-back of the round metric: 16 / (1 + 4|x|^2)^2 * delta_ij
    std::vector<Expr> g;
    Expr conf = lit(16.0) / pow(lit(1.0) + lit(4.0) * norm2(vars_of(m)), lit(2.0));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g.push_back(i == j ? conf : lit(0.0));
    return g;
  };

  auto inversion = [&]() {
    // y = x / (4 |x|^2), defined for |x| >= 1/4
    std::vector<Expr> map;
    Expr n2 = norm2(vars_of(m));
    for (int i = 0; i < m; ++i) map.push_back(var(i) / (lit(4.0) * n2));
    return map;
  };

  for (int id = 0; id < 2; ++id) {
    Chart chart;
    chart.id = id;
    chart.dim = m;
    chart.metric = round_metric();
    Transition t;
    t.to = 1 - id;
    t.map = inversion();
    t.overlap = norm2(vars_of(m)) - lit(1.0 / 16.0);
    chart.neighbors.push_back(std::move(t));
    chart.probe = (id == 0);
    M.atlas.charts.push_back(std::move(chart));
  }
  return M;
}

// --- Hyperbolic ball ------------------------------------------------------------

namespace {

std::vector<Vec> sphere_directions(int m, int count_hint) {
  std::vector<Vec> dirs;
  if (m == 2) {
    for (int k = 0; k < count_hint; ++k) {
      const double th = 2.0 * M_PI * k / count_hint;
      Vec d(2);
      d << std::cos(th), std::sin(th);
      dirs.push_back(d);
    }
  } else {
    // axes, face diagonals, cube corners: a 26-direction covering set
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = -1; sy <= 1; ++sy)
        for (int sz = -1; sz <= 1; ++sz) {
          if (sx == 0 && sy == 0 && sz == 0) continue;
          Vec d(3);
          d << sx, sy, sz;
          dirs.push_back(d.normalized());
        }
  }
  return dirs;
}

}  // namespace

ManifoldDescriptor poincare_ball(int m) {
  if (m < 2 || m > 3) throw Error("poincare_ball: dimension must be 2 or 3");
  const double R0 = 1.0;                  // hyperbolic chart radius
  const double s = std::tanh(R0 / 2.0);   // Euclidean scale of the chart
  ManifoldDescriptor M;
  M.name = "poincare" + std::to_string(m);
  M.atlas.dim = m;
  M.atlas.shrink_radius = 0.6;
  M.atlas.oriented = true;

  // Chart centers: origin plus shells; the outermost shell is the window rim.
  struct Center {
    Vec a;  // Euclidean position in the ball
    bool boundary;
  };
  std::vector<Center> centers;
  centers.push_back({Vec::Zero(m), false});
  if (m == 2) {
    for (const Vec& d : sphere_directions(2, 8)) centers.push_back({std::tanh(0.55 / 2.0) * d, false});
    for (const Vec& d : sphere_directions(2, 16)) centers.push_back({std::tanh(1.1 / 2.0) * d, true});
    M.window_note = "hyperbolic ball of radius ~1.1 about the origin (rim charts at 1.1)";
  } else {
    for (const Vec& d : sphere_directions(3, 0)) centers.push_back({std::tanh(0.55 / 2.0) * d, true});
    M.window_note = "hyperbolic ball of radius ~0.55 about the origin (rim charts at 0.55)";
  }

  // All charts carry the same pulled-back metric: 4 s^2 / (1 - s^2 |x|^2)^2.
  auto chart_metric = [&]() {
    std::vector<Expr> g;
    Expr conf = lit(4.0 * s * s) / pow(lit(1.0) - lit(s * s) * norm2(vars_of(m)), lit(2.0));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g.push_back(i == j ? conf : lit(0.0));
    return g;
  };

  for (std::size_t i = 0; i < centers.size(); ++i) {
    Chart chart;
    chart.id = static_cast<int>(i);
    chart.dim = m;
    chart.metric = chart_metric();
    chart.boundary = centers[i].boundary;
    chart.probe = (i == 0);
    M.atlas.charts.push_back(std::move(chart));
  }

  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = 0; j < centers.size(); ++j) {
      if (i == j) continue;
      if (hyperbolic_center_distance(centers[i].a, centers[j].a) >= 2.0 * R0) continue;
      // T(x) = (1/s) Mob_{-a_j}( Mob_{a_i}( s x ) )
      std::vector<Expr> u;
      for (int k = 0; k < m; ++k) u.push_back(lit(s) * var(k));
      std::vector<Expr> mid = mobius_translate(centers[i].a, u);
      std::vector<Expr> moved = mobius_translate(-centers[j].a, mid);
      Transition t;
      t.to = static_cast<int>(j);
      for (int k = 0; k < m; ++k) t.map.push_back(moved[k] / lit(s));
      t.overlap = lit(1.0) - norm2(t.map);
      M.atlas.charts[i].neighbors.push_back(std::move(t));
    }
  }
  return M;
}

ManifoldDescriptor poincare_ball_global(int m) {
  if (m < 2 || m > 4) throw Error("poincare_ball_global: dimension must be 2..4");
  ManifoldDescriptor M;
  M.name = "poincare" + std::to_string(m) + "-global";
  M.window_note = "entire ball model as a single chart (geodesy harness entry)";
  M.atlas.dim = m;
  M.atlas.shrink_radius = 0.9;
  Chart chart;
  chart.id = 0;
  chart.dim = m;
  Expr conf = lit(4.0) / pow(lit(1.0) - norm2(vars_of(m)), lit(2.0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) chart.metric.push_back(i == j ? conf : lit(0.0));
  chart.boundary = true;  // the rim is not a window edge we claim to cover
  chart.probe = true;
  M.atlas.charts.push_back(std::move(chart));
  return M;
}

// --- (log t, theta) lattice surfaces ------------------------------------------

namespace {

struct SurfaceLattice {
  std::vector<double> s_centers;
  std::vector<double> th_centers;
  double hs, hth;
};

SurfaceLattice surface_lattice(double s_lo, double s_hi, double hs, double hth, double r) {
  SurfaceLattice lat;
  lat.hs = hs;
  lat.hth = hth;
  const double f = 2.0 * r * 0.95 / std::sqrt(2.0);
  lat.s_centers = linspace_cover(s_lo, s_hi, f * hs);
  const int nth = std::max(3, static_cast<int>(std::ceil(2.0 * M_PI / (f * hth))));
  for (int k = 0; k < nth; ++k) lat.th_centers.push_back(2.0 * M_PI * k / nth);
  return lat;
}

// Builds the affine transitions of a (s, theta) lattice chart family.
void connect_surface_lattice(ManifoldDescriptor& M, const SurfaceLattice& lat) {
  const int ns = static_cast<int>(lat.s_centers.size());
  const int nth = static_cast<int>(lat.th_centers.size());
  auto chart_index = [&](int is, int it) { return is * nth + it; };
  for (int is = 0; is < ns; ++is)
    for (int it = 0; it < nth; ++it)
      for (int js = 0; js < ns; ++js)
        for (int jt = 0; jt < nth; ++jt) {
          if (is == js && it == jt) continue;
          const double ds = (lat.s_centers[is] - lat.s_centers[js]) / lat.hs;
          const double dth = wrap_angle(lat.th_centers[it] - lat.th_centers[jt]) / lat.hth;
          if (ds * ds + dth * dth >= 4.0) continue;
          Transition t;
          t.to = chart_index(js, jt);
          t.map.push_back(var(0) + lit(ds));
          t.map.push_back(var(1) + lit(dth));
          std::vector<Expr> shifted = {var(0) + lit(ds), var(1) + lit(dth)};
          t.overlap = lit(1.0) - norm2(shifted);
          M.atlas.charts[chart_index(is, it)].neighbors.push_back(std::move(t));
        }
}

}  // namespace

ManifoldDescriptor funnel(double alpha, double t_max) {
  if (alpha < 0.0 || alpha > 1.0) throw Error("funnel: alpha must lie in [0,1]");
  if (t_max <= 2.5) throw Error("funnel: t_max must exceed 2.5");
  ManifoldDescriptor M;
  M.name = "funnel";
  M.window_note = "window t in [2, " + std::to_string(t_max) + "], charts affine in (log t, theta)";
  M.atlas.dim = 2;
  M.atlas.shrink_radius = 0.6;
  M.atlas.oriented = true;

  const double hs = 0.8, hth = 0.8;
  SurfaceLattice lat = surface_lattice(std::log(2.0), std::log(t_max), hs, hth, M.atlas.shrink_radius);
  const int ns = static_cast<int>(lat.s_centers.size());
  const int nth = static_cast<int>(lat.th_centers.size());

  for (int is = 0; is < ns; ++is)
    for (int it = 0; it < nth; ++it) {
      Chart chart;
      chart.id = is * nth + it;
      chart.dim = 2;
      Expr S = lit(lat.s_centers[is]) + lit(hs) * var(0);
      // first fundamental form of (t, t^a cos th, t^a sin th) in s = log t:
      //   g11 = hs^2 (1 + a^2 e^{2(a-1)s}) e^{2s},   g22 = hth^2 e^{2 a s}
      Expr g11 = lit(hs * hs) * exp(lit(2.0) * S);
      if (alpha != 0.0)
        g11 = lit(hs * hs) * (lit(1.0) + lit(alpha * alpha) * exp(lit(2.0 * (alpha - 1.0)) * S)) *
              exp(lit(2.0) * S);
      Expr g22 = alpha != 0.0 ? lit(hth * hth) * exp(lit(2.0 * alpha) * S) : lit(hth * hth);
      chart.metric = {g11, lit(0.0), lit(0.0), g22};
      chart.frame = {exp(S), lit(lat.th_centers[it]) + lit(hth) * var(1)};
      chart.boundary = (is == 0 || is == ns - 1);
      chart.probe = (is == ns / 2 && it == 0);
      M.atlas.charts.push_back(std::move(chart));
    }
  connect_surface_lattice(M, lat);
  return M;
}

ManifoldDescriptor b_manifold(double t_min) {
  if (!(t_min > 0.0 && t_min < 0.5)) throw Error("b_manifold: t_min must lie in (0, 0.5)");
  ManifoldDescriptor M;
  M.name = "b-manifold";
  M.window_note = "window t in [" + std::to_string(t_min) + ", 1], charts affine in (log t, theta)";
  M.atlas.dim = 2;
  M.atlas.shrink_radius = 0.6;
  M.atlas.oriented = true;

  const double hs = 0.8, hth = 0.8;
  const double s_lo = std::log(t_min);
  SurfaceLattice lat = surface_lattice(s_lo, 0.0, hs, hth, M.atlas.shrink_radius);
  const int ns = static_cast<int>(lat.s_centers.size());
  const int nth = static_cast<int>(lat.th_centers.size());
  const double band = (-s_lo) / 3.0 + 1e-9;

  for (int is = 0; is < ns; ++is)
    for (int it = 0; it < nth; ++it) {
      Chart chart;
      chart.id = is * nth + it;
      chart.dim = 2;
      // (dt/t)^2 + dth^2 pulled through t = exp(s0 + hs x1): constant diagonal
      chart.metric = {lit(hs * hs), lit(0.0), lit(0.0), lit(hth * hth)};
      Expr S = lit(lat.s_centers[is]) + lit(hs) * var(0);
      chart.frame = {exp(S), lit(lat.th_centers[it]) + lit(hth) * var(1)};
      chart.boundary = (is == 0 || is == ns - 1);
      chart.probe = (is == ns / 2 && it == 0);
      chart.depth = std::min(2, static_cast<int>(std::floor(-lat.s_centers[is] / band)));
      M.atlas.charts.push_back(std::move(chart));
    }
  connect_surface_lattice(M, lat);
  M.global_metric = {lit(1.0) / (var(0) * var(0)), lit(0.0), lit(0.0), lit(1.0)};
  return M;
}

// --- Corner --------------------------------------------------------------------

ManifoldDescriptor corner(const CornerOptions& opt) {
  if (!(opt.t_min > 0.0 && opt.t_min < 1.0) || !(opt.s_min > 0.0 && opt.s_min < 1.0))
    throw Error("corner: window floors must lie in (0,1)");
  ManifoldDescriptor M;
  M.name = opt.stretched ? "corner-stretched" : "corner-unstretched";
  M.window_note = "window t in [" + std::to_string(opt.t_min) + ", 1], s in [" +
                  std::to_string(opt.s_min) + ", 1]";
  M.atlas.dim = 3;
  M.atlas.shrink_radius = 0.6;
  M.atlas.oriented = true;

  const double r = M.atlas.shrink_radius;
  const double f = 2.0 * r * 0.95 / std::sqrt(3.0);
  const double h1 = opt.scaled_charts ? 0.9 : 1.8;
  const double h2 = 1.6;
  const double h3 = opt.scaled_charts ? 0.9 : 1.8;

  const double u_lo = std::log(opt.t_min), w_lo = std::log(opt.s_min);
  const auto u_centers = linspace_cover(u_lo, 0.0, f * h1);
  const int nth = std::max(3, static_cast<int>(std::ceil(2.0 * M_PI / (f * h2))));
  std::vector<double> th_centers;
  for (int k = 0; k < nth; ++k) th_centers.push_back(2.0 * M_PI * k / nth);

  const double depth_band = (-u_lo - w_lo) / 3.0 + 1e-9;

  struct Slot {
    double u0, th0, w0, h3k;
    bool boundary;
    int depth;
  };
  std::vector<Slot> slots;
  for (std::size_t iu = 0; iu < u_centers.size(); ++iu) {
    const double u0 = u_centers[iu];
    const double t0 = std::exp(u0);
    const double h3k = opt.scaled_charts ? h3 * t0 : h3;
    const auto w_centers = linspace_cover(w_lo, 0.0, f * h3k);
    for (double th0 : th_centers)
      for (std::size_t iw = 0; iw < w_centers.size(); ++iw) {
        Slot s;
        s.u0 = u0;
        s.th0 = th0;
        s.w0 = w_centers[iw];
        s.h3k = h3k;
        s.boundary = (iu == 0 || iu + 1 == u_centers.size() || iw == 0 || iw + 1 == w_centers.size());
        s.depth = std::min(2, static_cast<int>(std::floor((-s.u0 - s.w0) / depth_band)));
        slots.push_back(s);
      }
  }

  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    Chart chart;
    chart.id = static_cast<int>(i);
    chart.dim = 3;
    Expr U = lit(s.u0) + lit(h1) * var(0);
    Expr W = lit(s.w0) + lit(s.h3k) * var(2);
    Expr T = exp(U), S = exp(W);
    if (opt.stretched) {
      // (dt/t)^2 + dth^2 + (ds/(ts))^2
      chart.metric = {lit(h1 * h1), lit(0.0), lit(0.0),
                      lit(0.0),     lit(h2 * h2), lit(0.0),
                      lit(0.0),     lit(0.0), lit(s.h3k * s.h3k) * exp(lit(-2.0) * U)};
    } else {
      // s^2 dt^2 + (ts)^2 dth^2 + ds^2
      Expr TS2 = pow(T * S, lit(2.0));
      chart.metric = {lit(h1 * h1) * TS2, lit(0.0), lit(0.0),
                      lit(0.0), lit(h2 * h2) * TS2, lit(0.0),
                      lit(0.0), lit(0.0), lit(s.h3k * s.h3k) * pow(S, lit(2.0))};
    }
    chart.frame = {T, lit(s.th0) + lit(h2) * var(1), S};
    chart.boundary = s.boundary;
    chart.depth = s.depth;
    chart.probe = false;
    M.atlas.charts.push_back(std::move(chart));
  }

  // Pick one non-boundary mid-window probe chart.
  {
    double best = 1e9;
    int best_i = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].boundary) continue;
      const double score = std::abs(slots[i].u0 - u_lo / 2.0) + std::abs(slots[i].w0 - w_lo / 2.0) +
                           std::abs(slots[i].th0);
      if (score < best) {
        best = score;
        best_i = static_cast<int>(i);
      }
    }
    M.atlas.charts[best_i].probe = true;
  }

  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (std::size_t j = 0; j < slots.size(); ++j) {
      if (i == j) continue;
      const Slot& a = slots[i];
      const Slot& b = slots[j];
      const double dth = wrap_angle(a.th0 - b.th0);
      // conservative box test for ellipsoid intersection
      if (std::abs(a.u0 - b.u0) >= 2.0 * h1 || std::abs(dth) >= 2.0 * h2 ||
          std::abs(a.w0 - b.w0) >= a.h3k + b.h3k)
        continue;
      Transition t;
      t.to = static_cast<int>(j);
      t.map.push_back((lit(a.u0 - b.u0) + lit(h1) * var(0)) / lit(h1));
      t.map.push_back((lit(dth) + lit(h2) * var(1)) / lit(h2));
      t.map.push_back((lit(a.w0 - b.w0) + lit(a.h3k) * var(2)) / lit(b.h3k));
      t.overlap = lit(1.0) - norm2(t.map);
      M.atlas.charts[i].neighbors.push_back(std::move(t));
    }
  }

  if (opt.stretched) {
    M.global_metric = {lit(1.0) / (var(0) * var(0)), lit(0.0), lit(0.0),
                       lit(0.0), lit(1.0), lit(0.0),
                       lit(0.0), lit(0.0), lit(1.0) / pow(var(0) * var(2), lit(2.0))};
  } else {
    M.global_metric = {var(2) * var(2), lit(0.0), lit(0.0),
                       lit(0.0), pow(var(0) * var(2), lit(2.0)), lit(0.0),
                       lit(0.0), lit(0.0), lit(1.0)};
  }
  return M;
}

// --- combinators ---------------------------------------------------------------

ManifoldDescriptor product(const ManifoldDescriptor& A, const ManifoldDescriptor& B) {
  const int mA = A.atlas.dim, mB = B.atlas.dim, m = mA + mB;
  if (m > 4) throw Error("product: combined dimension exceeds 4");

  std::vector<Expr> shift;  // substitution list for B's variables
  for (int i = 0; i < mB; ++i) shift.push_back(var(mA + i));
  auto shift_expr = [&](const Expr& e) { return e.substitute(shift); };

  ManifoldDescriptor M;
  M.name = A.name + "x" + B.name;
  M.window_note = A.window_note + " x " + B.window_note;
  M.atlas.dim = m;
  const double rA = A.atlas.shrink_radius, rB = B.atlas.shrink_radius;
  M.atlas.shrink_radius = std::min(0.97, 1.02 * std::hypot(rA, rB));

  const int nB = static_cast<int>(B.atlas.charts.size());
  auto pid = [&](int ia, int ib) { return ia * nB + ib; };

  for (std::size_t ia = 0; ia < A.atlas.charts.size(); ++ia) {
    const Chart& ca = A.atlas.charts[ia];
    for (int ib = 0; ib < nB; ++ib) {
      const Chart& cb = B.atlas.charts[ib];
      Chart chart;
      chart.id = pid(static_cast<int>(ia), ib);
      chart.dim = m;
      chart.metric.assign(m * m, lit(0.0));
      for (int i = 0; i < mA; ++i)
        for (int j = 0; j < mA; ++j) chart.metric[i * m + j] = ca.metric_entry(i, j);
      for (int i = 0; i < mB; ++i)
        for (int j = 0; j < mB; ++j)
          chart.metric[(mA + i) * m + (mA + j)] = shift_expr(cb.metric_entry(i, j));
      if (!ca.frame.empty() && !cb.frame.empty()) {
        chart.frame = ca.frame;
        for (const Expr& e : cb.frame) chart.frame.push_back(shift_expr(e));
      }
      chart.boundary = ca.boundary || cb.boundary;
      chart.probe = ca.probe && cb.probe;
      chart.depth = std::max(ca.depth, cb.depth);

      // neighbours: (na, nb) with at least one factor moving
      auto factor_transitions = [](const Chart& c) {
        std::vector<const Transition*> ts = {nullptr};  // nullptr = identity
        for (const Transition& t : c.neighbors) ts.push_back(&t);
        return ts;
      };
      for (const Transition* ta : factor_transitions(ca))
        for (const Transition* tb : factor_transitions(cb)) {
          if (!ta && !tb) continue;
          Transition t;
          t.to = pid(ta ? ta->to : static_cast<int>(ia), tb ? tb->to : ib);
          for (int i = 0; i < mA; ++i) t.map.push_back(ta ? ta->map[i] : var(i));
          for (int i = 0; i < mB; ++i) t.map.push_back(tb ? shift_expr(tb->map[i]) : var(mA + i));
          // The overlap needs the factor domains AND the mapped point inside
          // the product ball (factor images only bound each block by 1).
          auto min2 = [](const Expr& a, const Expr& b) { return a + b - abs(a - b); };
          Expr domain = ta && tb ? min2(ta->overlap, shift_expr(tb->overlap))
                                 : (ta ? ta->overlap : shift_expr(tb->overlap));
          t.overlap = min2(domain, lit(1.0) - norm2(t.map));
          chart.neighbors.push_back(std::move(t));
        }
      M.atlas.charts.push_back(std::move(chart));
    }
  }

  if (!A.global_metric.empty() && !B.global_metric.empty()) {
    M.global_metric.assign(m * m, lit(0.0));
    for (int i = 0; i < mA; ++i)
      for (int j = 0; j < mA; ++j) M.global_metric[i * m + j] = A.global_metric[i * mA + j];
    for (int i = 0; i < mB; ++i)
      for (int j = 0; j < mB; ++j)
        M.global_metric[(mA + i) * m + (mA + j)] = shift_expr(B.global_metric[i * mB + j]);
  }
  return M;
}

ManifoldDescriptor pullback(const ManifoldDescriptor& M, const std::vector<Expr>& f,
                            const std::vector<Expr>& f_inverse) {
  const int m = M.atlas.dim;
  if (static_cast<int>(f.size()) != m || static_cast<int>(f_inverse.size()) != m)
    throw Error("pullback: f and its inverse must have m components");
  if (M.global_metric.empty()) throw AtlasError("pullback requires a descriptor with a global metric");
  for (const Chart& c : M.atlas.charts)
    if (c.frame.empty()) throw AtlasError("pullback requires charts with frames");

  // Validate that f_inverse o f is the identity on sampled frame points.
  for (const Chart& c : M.atlas.charts) {
    for (const Vec& x : ball_samples({m, 0.9, 16, 7777})) {
      std::vector<double> vars(x.data(), x.data() + x.size());
      std::vector<double> p(m), fp(m), back(m);
      for (int i = 0; i < m; ++i) p[i] = c.frame[i].eval_d(vars);
      for (int i = 0; i < m; ++i) fp[i] = f[i].eval_d(p);
      for (int i = 0; i < m; ++i) back[i] = f_inverse[i].eval_d(fp);
      double err = 0.0;
      for (int i = 0; i < m; ++i) err = std::max(err, std::abs(back[i] - p[i]));
      if (err > 1e-8) throw AtlasError("pullback: declared inverse does not invert f on samples");
    }
    break;  // frames share one global coordinate system; one chart suffices
  }

  auto pulled_metric = [&](std::span<const Expr> base_frame) {
    // F = f o frame; new g_ij = sum_ab dF_a/dx_i G_ab(F) dF_b/dx_j
    std::vector<Expr> F;
    for (int a = 0; a < m; ++a) F.push_back(f[a].substitute(base_frame));
    std::vector<Expr> dF(m * m);  // dF[a*m+i] = dF_a/dx_i
    for (int a = 0; a < m; ++a)
      for (int i = 0; i < m; ++i) dF[a * m + i] = differentiate(F[a], i);
    std::vector<Expr> Gf(m * m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) Gf[a * m + b] = M.global_metric[a * m + b].substitute(F);
    std::vector<Expr> out(m * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Expr acc = lit(0.0);
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) acc = acc + dF[a * m + i] * Gf[a * m + b] * dF[b * m + j];
        out[i * m + j] = acc;
      }
    return out;
  };

  ManifoldDescriptor out = M;
  out.name = M.name + "-pullback";
  for (Chart& c : out.atlas.charts) c.metric = pulled_metric(c.frame);

  std::vector<Expr> id = vars_of(m);
  out.global_metric = pulled_metric(id);
  return out;
}

ManifoldDescriptor rescale_singular(const ManifoldDescriptor& M, const Expr& rho) {
  const int m = M.atlas.dim;
  ManifoldDescriptor out = M;
  out.name = M.name + "-rescaled";
  for (Chart& c : out.atlas.charts) {
    if (c.frame.empty()) throw AtlasError("rescale_singular requires charts with frames");
    Expr rho_chart = rho.substitute(c.frame);
    // validate positivity on samples
    for (const Vec& x : ball_samples({m, 0.95, 24, 4242})) {
      std::vector<double> vars(x.data(), x.data() + x.size());
      if (rho_chart.eval_d(vars) <= 0.0)
        throw DomainError("rescale_singular: rho is not positive on chart " + std::to_string(c.id));
    }
    Expr rho2 = rho_chart * rho_chart;
    for (Expr& e : c.metric) e = e / rho2;
  }
  if (!out.global_metric.empty()) {
    Expr rho2 = rho * rho;
    for (Expr& e : out.global_metric) e = e / rho2;
  }
  return out;
}

// --- registry -------------------------------------------------------------------

const std::vector<CatalogEntry>& catalog_entries() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> v;
    auto add = [&](std::string name, std::string summary, std::string verdict,
                   std::function<ManifoldDescriptor()> make) {
      v.push_back({std::move(name), std::move(summary), std::move(verdict), std::move(make)});
    };

    add("euclidean1", "flat line, unit-ball charts on an integer lattice, W=2", "consistent",
        [] { return euclidean_space(1, 2); });
    add("euclidean2", "flat plane, lattice charts, W=2", "consistent", [] { return euclidean_space(2, 2); });
    add("euclidean3", "flat 3-space, lattice charts, W=1", "consistent", [] { return euclidean_space(3, 1); });
    add("euclidean1-wide", "flat line on a wide window for deep geodesic runs, W=12", "consistent",
        [] { return euclidean_space(1, 12); });
    add("sphere1", "circle via two scaled stereographic charts", "consistent", [] { return sphere(1); });
    add("sphere2", "round 2-sphere via two scaled stereographic charts", "consistent",
        [] { return sphere(2); });
    add("sphere3", "round 3-sphere via two scaled stereographic charts", "consistent",
        [] { return sphere(3); });
    add("poincare2", "hyperbolic plane window, isometric translated charts", "consistent",
        [] { return poincare_ball(2); });
    add("poincare3", "hyperbolic 3-space window, isometric translated charts", "consistent",
        [] { return poincare_ball(3); });
    add("poincare2-global", "ball model as a single chart (geodesy harness)", "n/a",
        [] { return poincare_ball_global(2); });
    add("poincare3-global", "ball model as a single chart (geodesy harness)", "n/a",
        [] { return poincare_ball_global(3); });
    add("funnel0", "cylinder funnel (alpha = 0), window t in [2, 6]", "consistent",
        [] { return funnel(0.0); });
    add("funnel05", "funnel surface alpha = 0.5, window t in [2, 6]", "consistent",
        [] { return funnel(0.5); });
    add("funnel1", "cone funnel (alpha = 1), window t in [2, 6]", "consistent", [] { return funnel(1.0); });
    add("b-manifold", "cylinder end (dt/t)^2 + dths^2 in log charts", "consistent",
        [] { return b_manifold(0.05); });
    add("corner-stretched", "stretched corner metric in adapted log charts", "consistent", [] {
      CornerOptions o;
      o.stretched = true;
      return corner(o);
    });
    add("corner-unstretched", "unstretched corner metric, window floors 1e-3", "inconsistent", [] {
      CornerOptions o;
      o.stretched = false;
      o.t_min = 1e-3;
      o.s_min = 1e-3;
      o.scaled_charts = false;
      return corner(o);
    });
    add("corner-unstretched-shallow", "unstretched corner metric on the adapted charts of the stretched entry",
        "inconsistent", [] {
          CornerOptions o;
          o.stretched = false;
          return corner(o);
        });
    add("torus", "flat torus as a product of two circles", "consistent",
        [] { return product(sphere(1), sphere(1)); });
    add("s2xs2", "product of two unit 2-spheres", "consistent",
        [] { return product(sphere(2), sphere(2)); });
    add("euclidean2-rotated", "flat plane pulled back through a rigid rotation", "consistent", [] {
      const double c = std::cos(0.5), s = std::sin(0.5);
      std::vector<Expr> f = {lit(c) * var(0) - lit(s) * var(1), lit(s) * var(0) + lit(c) * var(1)};
      std::vector<Expr> finv = {lit(c) * var(0) + lit(s) * var(1), lit(-s) * var(0) + lit(c) * var(1)};
      return pullback(euclidean_space(2, 2), f, finv);
    });
    add("euclidean2-scaled", "flat plane pulled back through diag(2, 1)", "consistent", [] {
      std::vector<Expr> f = {lit(2.0) * var(0), var(1)};
      std::vector<Expr> finv = {lit(0.5) * var(0), var(1)};
      return pullback(euclidean_space(2, 2), f, finv);
    });
    return v;
  }();
  return entries;
}

ManifoldDescriptor make_catalog(const std::string& name) {
  for (const CatalogEntry& e : catalog_entries())
    if (e.name == name) {
      ManifoldDescriptor M = e.make();
      M.name = name;
      return M;
    }
  throw Error("unknown catalog entry '" + name + "'");
}

}  // namespace ureg
