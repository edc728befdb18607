#include "ureg/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>

namespace ureg {

namespace {

Mat metric_value(const Chart& chart, const Vec& x) {
  const int m = chart.dim;
  std::vector<double> vars(x.data(), x.data() + x.size());
  Mat G(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G(i, j) = chart.metric_entry(i, j).eval_d(vars);
  return G;
}

// Gamma values only (metric jets of order 1).
std::vector<double> christoffel_values(const Chart& chart, const Vec& x) {
  ChristoffelField gamma = christoffel(chart, x, 0);
  const int m = chart.dim;
  std::vector<double> out(m * m * m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out[(k * m + i) * m + j] = gamma.value(k, i, j);
  return out;
}

Vec geodesic_rhs_values(const std::vector<double>& gamma, const Vec& C, const Vec& Z) {
  const int m = C.size();
  Vec dy(2 * m);
  dy.head(m) = Z;
  for (int k = 0; k < m; ++k) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) acc += gamma[(k * m + i) * m + j] * Z[i] * Z[j];
    dy[m + k] = -acc;
  }
  return dy;
}

}  // namespace

Vec geodesic_rhs(const Vec& velocity, const ChristoffelField& gamma) {
  const int m = gamma.dim;
  std::vector<double> g(m * m * m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g[(k * m + i) * m + j] = gamma.value(k, i, j);
  Vec C = Vec::Zero(m);
  return geodesic_rhs_values(g, C, velocity);
}

double g_norm(const ManifoldDescriptor& M, const PointRef& p, const Vec& v) {
  const Mat G = metric_value(M.atlas.chart(p.chart), p.x);
  return std::sqrt(std::max(0.0, v.dot(G * v)));
}

GeodesicPath integrate_geodesic(const ManifoldDescriptor& M, const PointRef& p, const Vec& v, double T,
                                const GeodesicOptions& opt) {
  const int m = M.atlas.dim;
  if (p.x.size() != m || v.size() != m) throw Error("integrate_geodesic: dimension mismatch");
  if (p.x.norm() >= 1.0) throw AtlasError("start point outside the chart ball");

  GeodesicPath path;
  int chart_id = p.chart;

  auto rhs_for = [&M, m](int cid) {
    const Chart& c = M.atlas.chart(cid);
    return [&M, &c, m](double, const Vec& y) -> Vec {
      Vec C = y.head(m);
      if (C.norm() >= 1.0) throw NumericError("position left the chart ball");
      const auto gamma = christoffel_values(c, C);
      return geodesic_rhs_values(gamma, C, y.tail(m));
    };
  };

  Vec y0(2 * m);
  y0 << p.x, v;
  Rk45Stepper stepper(rhs_for(chart_id), 0.0, y0, opt.step);
  path.samples.push_back({chart_id, p.x, v, 0.0});

  while (stepper.t() < T) {
    bool advanced = false;
    try {
      advanced = stepper.step(T);
    } catch (const Error& e) {
      const Vec C = stepper.y().head(m);
      if (C.norm() >= 1.0 - 5e-3) {
        path.termination = Termination::LeftAtlas;
      } else {
        path.termination = Termination::StepFailure;
        path.failure_reason = e.what();
      }
      return path;
    }
    if (!advanced) break;

    Vec C = stepper.y().head(m);
    Vec Z = stepper.y().tail(m);
    const double t = stepper.t();

    if (C.norm() >= opt.switch_threshold) {
      auto best = deepest_chart(M.atlas, chart_id, C);
      if (best && best->chart != chart_id && best->y.norm() < C.norm() - opt.switch_hysteresis) {
        const Mat J = transition_jacobian(M.atlas, chart_id, best->chart, C);
        const Vec Znew = J * Z;
        path.switches.push_back({t, chart_id, best->chart});
        chart_id = best->chart;
        C = best->y;
        Z = Znew;
        Vec ynew(2 * m);
        ynew << C, Z;
        stepper = Rk45Stepper(rhs_for(chart_id), t, ynew, opt.step);
      } else if (!best) {
        path.termination = Termination::LeftAtlas;
        path.samples.push_back({chart_id, C, Z, t});
        return path;
      }
    }
    path.samples.push_back({chart_id, C, Z, t});
  }
  path.termination = Termination::ReachedHorizon;
  return path;
}

double speed_drift(const GeodesicPath& path, const ManifoldDescriptor& M) {
  if (path.samples.empty()) throw Error("speed_drift of an empty path");
  double s0 = -1.0, drift = 0.0;
  for (const GeodesicState& s : path.samples) {
    const double sp = g_norm(M, PointRef{s.chart, s.position}, s.velocity);
    if (s0 < 0.0)
      s0 = sp;
    else
      drift = std::max(drift, std::abs(sp - s0));
  }
  return drift;
}

LemmaReport lemma_existence_check(const ManifoldDescriptor& M, int chart_id, const Vec& x_p,
                                  const Vec& v_p, double delta, const GeodesicOptions& opt,
                                  std::uint64_t sample_seed) {
  const Chart& chart = M.atlas.chart(chart_id);
  const int m = chart.dim;
  const double r = M.atlas.shrink_radius;
  if (x_p.norm() >= r) throw Error("lemma check requires |x_p| < shrink radius");
  if (!(delta > 0.0 && delta < 1.0 - r)) throw Error("lemma check requires delta in (0, 1-r)");
  if (std::abs(v_p.norm() - 1.0) > 1e-9) throw Error("lemma check requires a Euclidean-unit velocity");

  LemmaReport rep;

  // Sampled sup of |Gamma^k_ij| over the chart.
  double Mbound = 0.0;
  for (const Vec& s : ball_samples({m, 0.95, 160, sample_seed})) {
    const auto g = christoffel_values(chart, s);
    for (double v : g) Mbound = std::max(Mbound, std::abs(v));
  }
  rep.gamma_bound = Mbound;
  const double tau_geom = delta / (4.0 * std::sqrt(static_cast<double>(m)));
  rep.tau_star = Mbound > 1e-12 ? std::min(tau_geom, 1.0 / (8.0 * Mbound)) : tau_geom;

  auto rhs = [&chart, m](double, const Vec& y) -> Vec {
    Vec C = y.head(m);
    if (C.norm() >= 1.0) throw NumericError("left the chart ball");
    return geodesic_rhs_values(christoffel_values(chart, C), C, y.tail(m));
  };

  Vec y0(2 * m);
  y0 << x_p, v_p;
  Rk45Stepper stepper(rhs, 0.0, y0, opt.step);

  const double vel_cap = 2.0 * std::sqrt(static_cast<double>(m));
  double alpha = v_p.cwiseAbs().maxCoeff();

  auto alpha1 = [&](double t) {
    const double disc = 1.0 - 4.0 * t * Mbound;
    return 2.0 / (1.0 + std::sqrt(std::max(0.0, disc)));
  };

  auto check_state = [&](double t, const Vec& y) {
    alpha = std::max(alpha, y.tail(m).cwiseAbs().maxCoeff());
    if (alpha > alpha1(t) + 1e-6 && rep.envelope_ok) {
      rep.envelope_ok = false;
      rep.witness_time = t;
    }
    if (y.tail(m).norm() >= vel_cap && rep.velocity_ok) {
      rep.velocity_ok = false;
      rep.witness_time = t;
    }
    if ((y.head(m) - x_p).norm() > r + delta / 2.0 && rep.containment_ok) {
      rep.containment_ok = false;
      rep.witness_time = t;
    }
  };

  rep.alpha_trace.push_back({alpha, alpha1(0.0)});
  while (stepper.t() < rep.tau_star) {
    bool advanced = false;
    try {
      advanced = stepper.step(rep.tau_star);
    } catch (const Error&) {
      rep.exists = false;
      rep.witness_time = stepper.t();
      return rep;
    }
    if (!advanced) break;
    // Interrogate the interpolant inside the step as well.
    for (int k = 1; k <= 4; ++k) {
      const double ts = stepper.t_prev() + (stepper.t() - stepper.t_prev()) * k / 4.0;
      check_state(ts, stepper.interpolate(ts));
    }
    rep.alpha_trace.push_back({alpha, alpha1(stepper.t())});
  }
  return rep;
}

// --- distance estimation ----------------------------------------------------

namespace {

// Riemannian length of the straight chart segment [a,b] under midpoint
// metrics of `subs` subsegments.
double segment_length(const Chart& chart, const Vec& a, const Vec& b, int subs) {
  const Vec d = (b - a) / subs;
  double L = 0.0;
  for (int s = 0; s < subs; ++s) {
    const Vec mid = a + (s + 0.5) * d;
    const Mat G = metric_value(chart, mid);
    L += std::sqrt(std::max(0.0, d.dot(G * d)));
  }
  return L;
}

struct PathVertex {
  int chart;
  Vec x;
};

double polyline_length(const ManifoldDescriptor& M, const std::vector<PathVertex>& poly, int subs) {
  double L = 0.0;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    if (poly[i].chart == poly[i + 1].chart) {
      L += segment_length(M.atlas.chart(poly[i].chart), poly[i].x, poly[i + 1].x, subs);
    }
    // re-chart pairs are the same geometric point: zero length
  }
  return L;
}

}  // namespace

DistanceEstimate distance_estimate(const ManifoldDescriptor& M, const PointRef& p, const PointRef& q,
                                   const DistanceOptions& opt) {
  const int m = M.atlas.dim;
  DistanceEstimate out;

  // --- combinatorial lower bound -------------------------------------------
  const double c = std::max(1.0, opt.equivalence_constant);
  const double r = M.atlas.shrink_radius;

  // chart hop distance
  std::map<int, int> hops;
  {
    std::queue<int> bfs;
    bfs.push(p.chart);
    hops[p.chart] = 0;
    while (!bfs.empty()) {
      const int cur = bfs.front();
      bfs.pop();
      for (const Transition& t : M.atlas.chart(cur).neighbors)
        if (!hops.count(t.to)) {
          hops[t.to] = hops[cur] + 1;
          bfs.push(t.to);
        }
    }
  }

  const bool same_or_neighbor = p.chart == q.chart || M.atlas.chart(p.chart).find_neighbor(q.chart);
  if (p.chart == q.chart) {
    out.lower = std::min((p.x - q.x).norm(), 1.0 - p.x.norm()) / c;
    out.lower_method = "euclidean-comparison";
  } else if (same_or_neighbor) {
    out.lower = 0.0;
    out.lower_method = "euclidean-comparison";
    // If q is representable in p's chart, the single-chart bound applies.
    const Transition* t = M.atlas.chart(q.chart).find_neighbor(p.chart);
    if (t && overlap_contains(M.atlas.chart(q.chart), *t, q.x)) {
      std::vector<double> vars(q.x.data(), q.x.data() + q.x.size());
      Vec y(m);
      bool ok = true;
      try {
        for (int i = 0; i < m; ++i) y[i] = t->map[i].eval_d(vars);
      } catch (const DomainError&) {
        ok = false;
      }
      if (ok && y.norm() < 1.0) out.lower = std::min((p.x - y).norm(), 1.0 - p.x.norm()) / c;
    }
  } else {
    const int h = hops.count(q.chart) ? hops[q.chart] : 1;
    const double escape = std::max(1.0 - p.x.norm(), 1.0 - q.x.norm());
    out.lower = std::max(escape / c, (h - 1) * (1.0 - r) / (2.0 * c));
    out.lower_method = "chart-crossings";
  }

  // --- graph upper bound ----------------------------------------------------
  struct Node {
    int chart;
    Vec x;
  };
  std::vector<Node> nodes;
  std::vector<std::vector<int>> per_chart(M.atlas.charts.size());
  std::map<int, int> chart_slot;
  for (std::size_t i = 0; i < M.atlas.charts.size(); ++i) chart_slot[M.atlas.charts[i].id] = static_cast<int>(i);

  auto add_node = [&](int chart, const Vec& x) {
    nodes.push_back({chart, x});
    per_chart[chart_slot[chart]].push_back(static_cast<int>(nodes.size()) - 1);
    return static_cast<int>(nodes.size()) - 1;
  };

  const int src = add_node(p.chart, p.x);
  const int dst_base = add_node(q.chart, q.x);

  for (const Chart& chart : M.atlas.charts) {
    add_node(chart.id, Vec::Zero(m));
    for (const Vec& s : ball_samples({m, 0.92, opt.nodes_per_chart, opt.seed}))
      add_node(chart.id, s);
  }

  // Zero-length bridges: every node visible in a neighbour chart gets a twin.
  std::vector<std::pair<int, int>> bridges;
  const int base_count = static_cast<int>(nodes.size());
  for (int i = 0; i < base_count; ++i) {
    const Chart& chart = M.atlas.chart(nodes[i].chart);
    for (const Transition& t : chart.neighbors) {
      if (!overlap_contains(chart, t, nodes[i].x)) continue;
      std::vector<double> vars(nodes[i].x.data(), nodes[i].x.data() + nodes[i].x.size());
      Vec y(m);
      bool ok = true;
      try {
        for (int k = 0; k < m; ++k) y[k] = t.map[k].eval_d(vars);
      } catch (const DomainError&) {
        ok = false;
      }
      if (!ok || y.norm() >= 0.999) continue;
      const int twin = add_node(t.to, y);
      bridges.push_back({i, twin});
    }
  }

  // Intra-chart k-nearest edges.
  struct Edge {
    int to;
    double w;
  };
  std::vector<std::vector<Edge>> adj(nodes.size());
  auto connect = [&](int a, int b, double w) {
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
  };
  for (const auto& [a, b] : bridges) connect(a, b, 0.0);

  const int knn = std::min(2 * m + 6, opt.nodes_per_chart);
  for (const auto& members : per_chart) {
    for (int i : members) {
      std::vector<std::pair<double, int>> cand;
      cand.reserve(members.size());
      for (int j : members)
        if (j != i) cand.push_back({(nodes[i].x - nodes[j].x).squaredNorm(), j});
      const int take = std::min<int>(knn, static_cast<int>(cand.size()));
      std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
      for (int k = 0; k < take; ++k) {
        const int j = cand[k].second;
        if (j < i) continue;  // add each pair once
        const double w =
            segment_length(M.atlas.chart(nodes[i].chart), nodes[i].x, nodes[j].x, 4);
        connect(i, j, w);
      }
    }
  }

  // Dijkstra.
  std::vector<double> dist(nodes.size(), std::numeric_limits<double>::infinity());
  std::vector<int> prev(nodes.size(), -1);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u] + 1e-15) continue;
    for (const Edge& e : adj[u])
      if (dist[u] + e.w < dist[e.to] - 1e-15) {
        dist[e.to] = dist[u] + e.w;
        prev[e.to] = u;
        pq.push({dist[e.to], e.to});
      }
  }

  // The destination may have twins at distance ~0; take the best over q and
  // its bridge copies.
  double best = dist[dst_base];
  int best_node = dst_base;
  for (const auto& [a, b] : bridges) {
    if (a == dst_base && dist[b] < best) {
      best = dist[b];
      best_node = b;
    }
  }
  if (!std::isfinite(best)) {
    out.upper_known = false;
    out.upper = std::numeric_limits<double>::infinity();
    out.lower = std::max(out.lower, 0.0);
    return out;
  }

  // Extract polyline.
  std::vector<PathVertex> poly;
  for (int v = best_node; v != -1; v = prev[v]) poly.push_back({nodes[v].chart, nodes[v].x});
  std::reverse(poly.begin(), poly.end());

  // When q is visible from p's chart, the straight chart segment is a strong
  // starting upper bound; seed the refinement with the shorter of the two.
  {
    Vec q_in_p;
    bool visible = false;
    if (q.chart == p.chart) {
      q_in_p = q.x;
      visible = true;
    } else {
      try {
        q_in_p = transition_point(M.atlas, q.chart, p.chart, q.x);
        visible = q_in_p.norm() < 1.0;
      } catch (const Error&) {
      }
    }
    if (visible) {
      std::vector<PathVertex> direct;
      const int segs = 16;
      for (int s = 0; s <= segs; ++s)
        direct.push_back({p.chart, p.x + (q_in_p - p.x) * (static_cast<double>(s) / segs)});
      bool inside = true;
      for (const PathVertex& v : direct)
        if (v.x.norm() >= 0.995) inside = false;
      if (inside && polyline_length(M, direct, 4) < polyline_length(M, poly, 4)) poly = std::move(direct);
    }
  }

  // --- rubber-band refinement ----------------------------------------------
  auto seg_len = [&](const PathVertex& a, const PathVertex& b) {
    if (a.chart != b.chart) return 0.0;
    return segment_length(M.atlas.chart(a.chart), a.x, b.x, 6);
  };

  for (int sweep = 0; sweep < opt.refine_sweeps; ++sweep) {
    // subdivide long segments
    if (static_cast<int>(poly.size()) < opt.max_segments) {
      std::vector<PathVertex> next;
      next.reserve(poly.size() * 2);
      double total = polyline_length(M, poly, 4);
      const double limit = std::max(total / opt.max_segments * 2.0, 1e-6);
      for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
        next.push_back(poly[i]);
        if (poly[i].chart == poly[i + 1].chart && seg_len(poly[i], poly[i + 1]) > limit &&
            static_cast<int>(next.size()) < opt.max_segments)
          next.push_back({poly[i].chart, 0.5 * (poly[i].x + poly[i + 1].x)});
      }
      next.push_back(poly.back());
      poly = std::move(next);
    }

    // relax interior vertices
    bool improved = false;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
      PathVertex& v = poly[i];
      const PathVertex* a = &poly[i - 1];
      const PathVertex* b = &poly[i + 1];
      Vec ax, bx;
      // Express both neighbours in v's chart when possible.
      auto to_chart = [&](const PathVertex& w, Vec& out_x) {
        if (w.chart == v.chart) {
          out_x = w.x;
          return true;
        }
        try {
          out_x = transition_point(M.atlas, w.chart, v.chart, w.x);
          return out_x.norm() < 1.0;
        } catch (const Error&) {
          return false;
        }
      };
      if (!to_chart(*a, ax) || !to_chart(*b, bx)) continue;
      const double cur = seg_len({v.chart, ax}, v) + seg_len(v, {v.chart, bx});
      const Vec mid = 0.5 * (ax + bx);
      for (double lam : {1.0, 0.5, 0.25}) {
        const Vec cand = v.x + lam * (mid - v.x);
        if (cand.norm() >= 0.995) continue;
        const double trial = seg_len({v.chart, ax}, {v.chart, cand}) + seg_len({v.chart, cand}, {v.chart, bx});
        if (trial < cur - 1e-14) {
          v.x = cand;
          improved = true;
          break;
        }
      }
      // Re-chart drifting vertices so relaxation can continue across charts.
      if (v.x.norm() > 0.9) {
        auto bestc = deepest_chart(M.atlas, v.chart, v.x);
        if (bestc && bestc->chart != v.chart && bestc->y.norm() < v.x.norm() - 0.02) {
          v.chart = bestc->chart;
          v.x = bestc->y;
        }
      }
    }
    if (!improved && sweep > 4) break;
  }

  // Re-chart bookkeeping may have created mixed-chart segments whose length
  // the polyline measure skips; stitch by inserting twins where needed.
  std::vector<PathVertex> stitched;
  stitched.push_back(poly.front());
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const PathVertex& a = stitched.back();
    PathVertex b = poly[i];
    if (a.chart != b.chart) {
      bool ok = false;
      try {
        Vec moved = transition_point(M.atlas, b.chart, a.chart, b.x);
        if (moved.norm() < 1.0) {
          stitched.push_back({a.chart, moved});
          ok = true;
        }
      } catch (const Error&) {
      }
      if (!ok) {
        try {
          Vec moved = transition_point(M.atlas, a.chart, b.chart, a.x);
          if (moved.norm() < 1.0) stitched.push_back({b.chart, moved});
        } catch (const Error&) {
          // leave a zero-measure junction; upper bound stays valid but loose
        }
      }
    }
    stitched.push_back(b);
  }

  out.upper = polyline_length(M, stitched, 12);
  out.upper_known = true;
  out.lower = std::min(out.lower, out.upper);
  return out;
}

SandwichResult sandwich_check(const ManifoldDescriptor& M, int chart_id, const Vec& x, double delta,
                              double c, int samples, std::uint64_t seed, const DistanceOptions& dopt) {
  const Chart& chart = M.atlas.chart(chart_id);
  const int m = chart.dim;
  const double r = M.atlas.shrink_radius;
  if (x.norm() >= r) throw Error("sandwich check requires |x| < shrink radius");
  if (!(delta > 0.0 && delta < 1.0 - r)) throw Error("sandwich check requires delta in (0, 1-r)");

  SandwichResult res;
  const double margin = 0.05;
  Rng rng(seed);

  // In-chart polyline upper bound for short distances.
  auto chart_upper = [&](const Vec& to) {
    std::vector<PathVertex> poly;
    const int segs = 24;
    for (int s = 0; s <= segs; ++s) poly.push_back({chart_id, x + (to - x) * (double(s) / segs)});
    // relax a little within the chart
    for (int sweep = 0; sweep < 20; ++sweep) {
      bool improved = false;
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        const Vec mid = 0.5 * (poly[i - 1].x + poly[i + 1].x);
        for (double lam : {1.0, 0.5}) {
          const Vec cand = poly[i].x + lam * (mid - poly[i].x);
          if (cand.norm() >= 0.999) continue;
          const double cur = segment_length(chart, poly[i - 1].x, poly[i].x, 4) +
                             segment_length(chart, poly[i].x, poly[i + 1].x, 4);
          const double trial = segment_length(chart, poly[i - 1].x, cand, 4) +
                               segment_length(chart, cand, poly[i + 1].x, 4);
          if (trial < cur - 1e-14) {
            poly[i].x = cand;
            improved = true;
            break;
          }
        }
      }
      if (!improved) break;
    }
    return polyline_length(M, poly, 8);
  };
  (void)dopt;

  for (int s = 0; s < samples; ++s) {
    const Vec dir = rng.direction(m);
    for (double scale : {0.95, 1.05}) {
      const Vec y = x + scale * delta * dir;
      if (y.norm() >= 0.99) continue;
      ++res.checked;
      const double U = chart_upper(y);
      const bool inside = scale < 1.0;
      if (inside) {
        // psi(B(x,delta)) must sit inside B_g(p, c delta)
        if (U > c * delta * (1.0 + margin) + 1e-9) {
          res.pass = false;
          res.witness = "outer inclusion violated: |y-x| = " + std::to_string(scale * delta) +
                        ", distance upper bound " + std::to_string(U) + " > c*delta = " +
                        std::to_string(c * delta);
          return res;
        }
      } else {
        // B_g(p, delta/c) must sit inside psi(B(x,delta)): a point with
        // distance provably below delta/c must have |y-x| < delta.
        if (U < delta / c * (1.0 - margin) - 1e-9) {
          res.pass = false;
          res.witness = "inner inclusion violated: |y-x| = " + std::to_string(scale * delta) +
                        " >= delta but distance upper bound " + std::to_string(U) +
                        " < delta/c = " + std::to_string(delta / c);
          return res;
        }
      }
    }
  }
  return res;
}

// --- variational (Jacobi) machinery ------------------------------------------

namespace {

// Augmented state layout: [C(m), Z(m), e(m*m col-major), Y(m*m), Yd(m*m)].
struct VariationalRay {
  const ManifoldDescriptor* M;
  int chart;
  GeodesicOptions opt;

  int m() const { return M->atlas.dim; }
  int dim_state() const { return 2 * m() + 3 * m() * m(); }

  Rk45Stepper::Rhs rhs_for(int cid) const {
    const ManifoldDescriptor* Mp = M;
    const int mm = m();
    return [Mp, cid, mm](double, const Vec& y) -> Vec {
      const Chart& chart = Mp->atlas.chart(cid);
      Vec C = y.head(mm);
      if (C.norm() >= 1.0) throw NumericError("position left the chart ball");
      const Vec Z = y.segment(mm, mm);

      MetricJets g = pullback_metric(chart, C, 2);
      ChristoffelField gamma = christoffel(g);
      CurvatureAtPoint cur = curvature_at(g, PointRef{cid, C});

      Vec dy(y.size());
      dy.head(mm) = Z;
      for (int k = 0; k < mm; ++k) {
        double acc = 0.0;
        for (int i = 0; i < mm; ++i)
          for (int j = 0; j < mm; ++j) acc += gamma.value(k, i, j) * Z[i] * Z[j];
        dy[mm + k] = -acc;
      }

      // Parallel frame: e_k' = -Gamma[Z, e_k].
      const int eoff = 2 * mm;
      for (int col = 0; col < mm; ++col)
        for (int a = 0; a < mm; ++a) {
          double acc = 0.0;
          for (int b = 0; b < mm; ++b)
            for (int cidx = 0; cidx < mm; ++cidx)
              acc += gamma.value(a, b, cidx) * Z[b] * y[eoff + col * mm + cidx];
          dy[eoff + col * mm + a] = -acc;
        }

      // K_pq = R(e_p, Z, Z, e_q) via the lowered tensor.
      Mat K(mm, mm);
      for (int p = 0; p < mm; ++p)
        for (int q = p; q < mm; ++q) {
          double acc = 0.0;
          for (int a = 0; a < mm; ++a)
            for (int b = 0; b < mm; ++b)
              for (int cc = 0; cc < mm; ++cc)
                for (int d = 0; d < mm; ++d)
                  acc += cur.lowered.a[((a * mm + b) * mm + cc) * mm + d] * y[eoff + p * mm + a] *
                         Z[b] * Z[cc] * y[eoff + q * mm + d];
          K(p, q) = acc;
          K(q, p) = acc;
        }

      const int yoff = eoff + mm * mm;
      const int ydoff = yoff + mm * mm;
      // Y' = Yd; Yd' = -K Y.
      for (int col = 0; col < mm; ++col)
        for (int row = 0; row < mm; ++row) {
          dy[yoff + col * mm + row] = y[ydoff + col * mm + row];
          double acc = 0.0;
          for (int p = 0; p < mm; ++p) acc += K(row, p) * y[yoff + col * mm + p];
          dy[ydoff + col * mm + row] = -acc;
        }
      return dy;
    };
  }

  // Transforms the augmented state across a chart switch.
  Vec switch_state(const Vec& y, int from, int to) const {
    const int mm = m();
    Vec C = y.head(mm);
    const Mat J = transition_jacobian(M->atlas, from, to, C);
    Vec out = y;
    out.head(mm) = transition_point(M->atlas, from, to, C);
    out.segment(mm, mm) = J * y.segment(mm, mm);
    const int eoff = 2 * mm;
    for (int col = 0; col < mm; ++col)
      out.segment(eoff + col * mm, mm) = J * y.segment(eoff + col * mm, mm);
    return out;
  }
};

double det_Y(const Vec& y, int m) {
  const int yoff = 2 * m + m * m;
  Mat Y(m, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) Y(row, col) = y[yoff + col * m + row];
  return Y.determinant();
}

double sigma_min_Y(const Vec& y, int m) {
  const int yoff = 2 * m + m * m;
  Mat Y(m, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) Y(row, col) = y[yoff + col * m + row];
  if (m == 1) return std::abs(Y(0, 0));
  Eigen::JacobiSVD<Mat> svd(Y);
  return svd.singularValues().minCoeff();
}

// Hermite interpolation of the propagator block between two stored samples;
// Y and Y' live in the parallel frame and stay smooth across chart switches.
Vec hermite_Y_state(const Vec& y0, const Vec& y1, double t0, double t1, double t, int m) {
  const double dt = t1 - t0;
  const double lam = dt > 0.0 ? (t - t0) / dt : 0.0;
  const double l2 = lam * lam, l3 = l2 * lam;
  const double h00 = 2 * l3 - 3 * l2 + 1, h10 = l3 - 2 * l2 + lam;
  const double h01 = -2 * l3 + 3 * l2, h11 = l3 - l2;
  Vec out = Vec::Zero(y0.size());
  const int yoff = 2 * m + m * m;
  const int ydoff = yoff + m * m;
  const int n = m * m;
  out.segment(yoff, n) = h00 * y0.segment(yoff, n) + h10 * dt * y0.segment(ydoff, n) +
                         h01 * y1.segment(yoff, n) + h11 * dt * y1.segment(ydoff, n);
  return out;
}

// g-orthonormal frame at p: columns E with E^T G E = I.
Mat orthonormal_frame(const Mat& G) {
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) throw NumericError("metric not SPD while building a frame");
  const Mat L = llt.matrixL();
  return L.transpose().inverse();
}

struct RaySample {
  double t;
  int chart;
  Vec state;
};

struct RayResult {
  std::vector<RaySample> samples;
  std::optional<double> conjugate_t;
  double clean_horizon = 0.0;  // integrated this far without evidence
  bool left_atlas = false;
};

RayResult shoot_variational(const ManifoldDescriptor& M, const PointRef& p, const Vec& w_chart,
                            double t_max, const GeodesicOptions& opt, double bisect_tol,
                            long* eval_budget) {
  VariationalRay ray{&M, p.chart, opt};
  const int m = M.atlas.dim;

  Vec y0 = Vec::Zero(ray.dim_state());
  y0.head(m) = p.x;
  y0.segment(m, m) = w_chart;
  const Mat G = metric_value(M.atlas.chart(p.chart), p.x);
  const Mat E = orthonormal_frame(G);
  const int eoff = 2 * m;
  for (int col = 0; col < m; ++col) y0.segment(eoff + col * m, m) = E.col(col);
  const int ydoff = eoff + 2 * m * m;
  for (int col = 0; col < m; ++col) y0[ydoff + col * m + col] = 1.0;  // Yd(0) = I

  RayResult res;
  int chart_id = p.chart;

  auto counted_rhs = [&](int cid) {
    auto base = ray.rhs_for(cid);
    return [base, eval_budget](double t, const Vec& y) {
      if (eval_budget) {
        if (*eval_budget <= 0) throw NumericError("budget exhausted");
        --*eval_budget;
      }
      return base(t, y);
    };
  };

  Rk45Stepper stepper(counted_rhs(chart_id), 0.0, y0, opt.step);
  res.samples.push_back({0.0, chart_id, y0});

  double prev_det = 0.0;
  bool det_initialized = false;

  while (stepper.t() < t_max) {
    bool advanced = false;
    try {
      advanced = stepper.step(t_max);
    } catch (const Error&) {
      res.left_atlas = stepper.y().head(m).norm() >= 1.0 - 5e-3;
      res.clean_horizon = stepper.t();
      return res;
    }
    if (!advanced) break;

    const double t = stepper.t();
    double det = det_Y(stepper.y(), m);

    if (det_initialized && prev_det > 0.0 && det < 0.0) {
      // bisection on the interpolant
      double lo = stepper.t_prev(), hi = t;
      while (hi - lo > bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        if (det_Y(stepper.interpolate(mid), m) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      res.conjugate_t = 0.5 * (lo + hi);
      res.clean_horizon = *res.conjugate_t;
      res.samples.push_back({t, chart_id, stepper.y()});
      return res;
    }
    if (t > 1e-6) {
      prev_det = det;
      det_initialized = true;
    }

    Vec C = stepper.y().head(m);
    if (C.norm() >= opt.switch_threshold) {
      auto best = deepest_chart(M.atlas, chart_id, C);
      if (best && best->chart != chart_id && best->y.norm() < C.norm() - opt.switch_hysteresis) {
        Vec ynew = ray.switch_state(stepper.y(), chart_id, best->chart);
        chart_id = best->chart;
        stepper = Rk45Stepper(counted_rhs(chart_id), t, ynew, opt.step);
      } else if (!best) {
        res.left_atlas = true;
        res.clean_horizon = t;
        return res;
      }
    }
    res.samples.push_back({t, chart_id, stepper.y()});
  }
  res.clean_horizon = stepper.t();
  return res;
}

// Determinant sign changes miss conjugate points of even multiplicity
// (e.g. the antipode on round spheres of dimension 3, where det Y has a
// double zero). Scan the smallest singular value of Y for deep local
// minima and refine them on the Hermite interpolant.
void scan_sigma_minima(RayResult& res, int m) {
  if (!res.conjugate_t && m > 1 && res.samples.size() >= 3) {
    std::vector<double> sig(res.samples.size());
    double scale = 0.0;
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
      sig[i] = sigma_min_Y(res.samples[i].state, m);
      scale = std::max(scale, sig[i]);
    }
    const double tol = 1e-4 * std::max(scale, 1e-12);
    for (std::size_t i = 1; i + 1 < res.samples.size(); ++i) {
      if (!(sig[i] < sig[i - 1] && sig[i] <= sig[i + 1])) continue;
      if (sig[i] > 0.05 * scale) continue;  // shallow dip, not near a zero
      // golden-section minimize sigma_min over the two adjacent intervals
      auto eval = [&](double t) {
        std::size_t k = t <= res.samples[i].t ? i - 1 : i;
        return sigma_min_Y(hermite_Y_state(res.samples[k].state, res.samples[k + 1].state,
                                           res.samples[k].t, res.samples[k + 1].t, t, m),
                           m);
      };
      double lo = res.samples[i - 1].t, hi = res.samples[i + 1].t;
      const double gr = 0.6180339887498949;
      double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
      double fa = eval(a), fb = eval(b);
      while (hi - lo > 1e-6 * std::max(1.0, hi)) {
        if (fa < fb) {
          hi = b;
          b = a;
          fb = fa;
          a = hi - gr * (hi - lo);
          fa = eval(a);
        } else {
          lo = a;
          a = b;
          fa = fb;
          b = lo + gr * (hi - lo);
          fb = eval(b);
        }
      }
      const double tmin = 0.5 * (lo + hi);
      if (eval(tmin) < tol) {
        res.conjugate_t = tmin;
        res.clean_horizon = tmin;
        break;
      }
    }
  }
}

}  // namespace

NormalChart::NormalChart(const ManifoldDescriptor& M, PointRef p, double radius, GeodesicOptions opt)
    : M_(&M), p_(std::move(p)), radius_(radius), opt_(opt) {
  const Mat G = metric_value(M.atlas.chart(p_.chart), p_.x);
  frame_ = orthonormal_frame(G);
}

Mat NormalChart::metric(const Vec& u) const {
  const int m = frame_.cols();
  const double t = u.norm();
  if (t < 1e-12) return Mat::Identity(m, m);
  if (t > radius_) throw Error("normal chart evaluated outside its radius");
  const Vec w = frame_ * (u / t);
  RayResult ray = shoot_variational(*M_, p_, w, t, opt_, 1e-6, nullptr);
  if (ray.clean_horizon < t - 1e-9)
    throw NumericError("geodesic integration failed inside the normal chart radius");
  const Vec& y = ray.samples.back().state;
  const int yoff = 2 * m + m * m;
  Mat Y(m, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) Y(row, col) = y[yoff + col * m + row];
  // g_ij(u) = (Y^T Y)_ij / t^2 in the parallel orthonormal frame.
  return (Y.transpose() * Y) / (t * t);
}

PointRef NormalChart::point(const Vec& u) const {
  const int m = frame_.cols();
  const double t = u.norm();
  if (t < 1e-12) return p_;
  const Vec w = frame_ * (u / t);
  GeodesicPath path = integrate_geodesic(*M_, p_, w, t, opt_);
  if (path.termination != Termination::ReachedHorizon)
    throw NumericError("geodesic integration failed inside the normal chart radius");
  return PointRef{path.back().chart, path.back().position};
}

// --- injectivity ---------------------------------------------------------------

namespace {

// Interpolated chart position along a stored ray near time t; returns false
// when the surrounding samples straddle a chart switch.
bool ray_position(const RayResult& ray, double t, int m, int& chart, Vec& pos) {
  const auto& s = ray.samples;
  if (s.empty()) return false;
  if (t <= s.front().t) {
    chart = s.front().chart;
    pos = s.front().state.head(m);
    return true;
  }
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (t > s[i + 1].t) continue;
    if (s[i].chart != s[i + 1].chart) return false;
    const double dt = s[i + 1].t - s[i].t;
    const double lam = dt > 0.0 ? (t - s[i].t) / dt : 0.0;
    // cubic Hermite with stored velocities
    const Vec C0 = s[i].state.head(m), C1 = s[i + 1].state.head(m);
    const Vec Z0 = s[i].state.segment(m, m), Z1 = s[i + 1].state.segment(m, m);
    const double l2 = lam * lam, l3 = l2 * lam;
    pos = (2 * l3 - 3 * l2 + 1) * C0 + (l3 - 2 * l2 + lam) * dt * Z0 + (-2 * l3 + 3 * l2) * C1 +
          (l3 - l2) * dt * Z1;
    chart = s[i].chart;
    return true;
  }
  chart = s.back().chart;
  pos = s.back().state.head(m);
  return true;
}

// Approximate intrinsic distance between two ray points presented in charts.
double pair_distance(const ManifoldDescriptor& M, int chart_a, const Vec& xa, int chart_b,
                     const Vec& xb) {
  const int m = M.atlas.dim;
  Vec ya;
  if (chart_a == chart_b) {
    ya = xa;
  } else {
    try {
      ya = transition_point(M.atlas, chart_a, chart_b, xa);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
    if (ya.norm() >= 1.0) return std::numeric_limits<double>::infinity();
  }
  const Vec d = xb - ya;
  const Vec mid = 0.5 * (xb + ya);
  if (mid.norm() >= 1.0) return std::numeric_limits<double>::infinity();
  const Mat G = metric_value(M.atlas.chart(chart_b), mid);
  (void)m;
  return std::sqrt(std::max(0.0, d.dot(G * d)));
}

}  // namespace

InjectivityEstimate injectivity_radius_estimate(const ManifoldDescriptor& M, const PointRef& p,
                                                const InjectivityOptions& opt) {
  const int m = M.atlas.dim;
  InjectivityEstimate est;
  est.p = p;

  if (opt.budget <= 0) {
    est.budget_exhausted = true;
    est.lower = 0.0;
    return est;
  }

  // Direction fan (deterministic).
  std::vector<Vec> dirs;
  if (m == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    dirs.push_back(Vec::Constant(1, -1.0));
  } else {
    Rng rng(opt.seed);
    for (int i = 0; i < opt.rays; ++i) dirs.push_back(rng.direction(m));
  }

  const Mat G = metric_value(M.atlas.chart(p.chart), p.x);
  const Mat E = orthonormal_frame(G);

  long budget = opt.budget;
  std::vector<RayResult> rays;
  rays.reserve(dirs.size());
  double lower = opt.cap;
  for (const Vec& u : dirs) {
    const Vec w = E * u;  // unit g-speed
    RayResult rr = shoot_variational(M, p, w, opt.cap, opt.geo, opt.bisect_tol, &budget);
    scan_sigma_minima(rr, m);
    if (budget <= 0) est.budget_exhausted = true;
    if (rr.conjugate_t) {
      est.evidence.push_back({"conjugate", *rr.conjugate_t, static_cast<int>(rays.size()), -1});
      if (!est.upper || *rr.conjugate_t < *est.upper) est.upper = *rr.conjugate_t;
    }
    lower = std::min(lower, rr.clean_horizon);
    rays.push_back(std::move(rr));
    if (est.budget_exhausted) break;
  }

  // Crossing search among pairs with enough angular separation.
  const double min_sep_cos = std::cos(0.35);
  const double coarse = 0.05;
  const double fine = 1e-3;
  const double t_min_cross = 0.2;

  for (std::size_t i = 0; i + 1 < rays.size(); ++i) {
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      if (m > 1 && dirs[i].dot(dirs[j]) > min_sep_cos) continue;
      // Coarse scan: among all sample pairs closer than the coarse threshold,
      // pick the earliest meeting (smallest max(s, t)); rays can meet again
      // much later and those crossings give weaker bounds.
      double best_d = std::numeric_limits<double>::infinity();
      double best_s = 0.0, best_t = 0.0, best_rad = std::numeric_limits<double>::infinity();
      for (const RaySample& sa : rays[i].samples) {
        if (sa.t < t_min_cross) continue;
        for (const RaySample& sb : rays[j].samples) {
          if (sb.t < t_min_cross) continue;
          const double rad = std::max(sa.t, sb.t);
          if (rad >= best_rad && best_d < coarse) continue;
          const double d = pair_distance(M, sa.chart, sa.state.head(m), sb.chart, sb.state.head(m));
          const bool candidate = d < coarse;
          const bool have_candidate = best_d < coarse;
          if ((candidate && (!have_candidate || rad < best_rad)) ||
              (!have_candidate && d < best_d)) {
            best_d = d;
            best_s = sa.t;
            best_t = sb.t;
            best_rad = rad;
          }
        }
      }
      if (best_d > coarse) continue;

      // local refinement by coordinate descent on (s, t)
      double s = best_s, t = best_t;
      double span_s = 0.2, span_t = 0.2;
      double cur = best_d;
      for (int it = 0; it < 40; ++it) {
        bool better = false;
        for (int axis = 0; axis < 2; ++axis) {
          const double span = axis == 0 ? span_s : span_t;
          for (double delta : {-span, span, -span / 3, span / 3}) {
            double ss = axis == 0 ? s + delta : s;
            double tt = axis == 1 ? t + delta : t;
            if (ss < t_min_cross || tt < t_min_cross) continue;
            int ca, cb;
            Vec xa, xb;
            if (!ray_position(rays[i], ss, m, ca, xa) || !ray_position(rays[j], tt, m, cb, xb)) continue;
            const double d = pair_distance(M, ca, xa, cb, xb);
            if (d < cur) {
              cur = d;
              s = ss;
              t = tt;
              better = true;
            }
          }
        }
        span_s *= 0.6;
        span_t *= 0.6;
        if (!better && span_s < opt.bisect_tol) break;
      }
      if (cur < fine) {
        const double radius = std::max(s, t);
        est.evidence.push_back({"crossing", radius, static_cast<int>(i), static_cast<int>(j)});
        if (!est.upper || radius < *est.upper) est.upper = radius;
      }
    }
  }

  est.lower = est.upper ? std::min(lower, *est.upper) : lower;
  return est;
}

CompletenessProbe completeness_probe(const ManifoldDescriptor& M, double horizon, int directions_per_chart,
                                     int max_charts, std::uint64_t seed, const GeodesicOptions& opt) {
  CompletenessProbe probe;
  const int m = M.atlas.dim;
  Rng rng(seed);
  int used = 0;
  for (const Chart& chart : M.atlas.charts) {
    if (!chart.probe || chart.boundary) continue;
    if (used >= max_charts) break;
    ++used;
    const PointRef p{chart.id, Vec::Zero(m)};
    const Mat G = metric_value(chart, p.x);
    const Mat E = orthonormal_frame(G);
    for (int d = 0; d < directions_per_chart; ++d) {
      Vec u = m == 1 ? Vec::Constant(1, d % 2 == 0 ? 1.0 : -1.0) : rng.direction(m);
      GeodesicPath path = integrate_geodesic(M, p, E * u, horizon, opt);
      ++probe.launched;
      if (path.termination != Termination::ReachedHorizon) {
        probe.complete_on_window = false;
        probe.note = "geodesic from chart " + std::to_string(chart.id) + " terminated at t = " +
                     std::to_string(path.samples.back().t) +
                     (path.termination == Termination::LeftAtlas ? " (left atlas)" : " (step failure)");
        return probe;
      }
    }
  }
  return probe;
}

}  // namespace ureg
