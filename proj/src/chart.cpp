#include "ureg/chart.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace ureg {

const Transition* Chart::find_neighbor(int to) const {
  for (const Transition& t : neighbors)
    if (t.to == to) return &t;
  return nullptr;
}

const Chart& Atlas::chart(int id) const {
  for (const Chart& c : charts)
    if (c.id == id) return c;
  throw AtlasError("unknown chart id " + std::to_string(id));
}

Mat MetricJets::value() const {
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = at(i, j).value();
  return g;
}

bool overlap_contains(const Chart& /*chart*/, const Transition& t, const Vec& x) {
  std::vector<double> vars(x.data(), x.data() + x.size());
  try {
    return t.overlap.eval_d(vars) >= 0.0;
  } catch (const DomainError&) {
    return false;
  }
}

Vec transition_point(const Atlas& atlas, int from, int to, const Vec& x) {
  if (from == to) return x;
  const Chart& c = atlas.chart(from);
  const Transition* t = c.find_neighbor(to);
  if (!t)
    throw AtlasError("charts " + std::to_string(from) + " and " + std::to_string(to) +
                     " are not neighbours");
  if (!overlap_contains(c, *t, x)) throw AtlasError("point outside declared overlap domain");
  std::vector<double> vars(x.data(), x.data() + x.size());
  Vec y(atlas.dim);
  for (int i = 0; i < atlas.dim; ++i) y[i] = t->map[i].eval_d(vars);
  return y;
}

std::vector<Jet> transition_jets(const Atlas& atlas, int from, int to, const Vec& x, int order) {
  const int m = atlas.dim;
  auto space = JetSpace::get(m, order);
  std::vector<Jet> vars;
  vars.reserve(m);
  for (int i = 0; i < m; ++i) vars.push_back(Jet::variable(space, i, x[i]));

  std::vector<Jet> out;
  out.reserve(m);
  if (from == to) {
    for (int i = 0; i < m; ++i) out.push_back(vars[i]);
    return out;
  }
  const Chart& c = atlas.chart(from);
  const Transition* t = c.find_neighbor(to);
  if (!t)
    throw AtlasError("charts " + std::to_string(from) + " and " + std::to_string(to) +
                     " are not neighbours");
  if (!overlap_contains(c, *t, x)) throw AtlasError("point outside declared overlap domain");
  for (int i = 0; i < m; ++i) out.push_back(t->map[i].eval<Jet>(vars));
  return out;
}

Mat transition_jacobian(const Atlas& atlas, int from, int to, const Vec& x) {
  const auto jets = transition_jets(atlas, from, to, x, 1);
  const int m = atlas.dim;
  Mat J(m, m);
  for (int i = 0; i < m; ++i) J.row(i) = jets[i].gradient().transpose();
  return J;
}

std::optional<ChartTarget> deepest_chart(const Atlas& atlas, int from, const Vec& x) {
  std::optional<ChartTarget> best;
  double best_norm = x.norm() < 1.0 ? x.norm() : std::numeric_limits<double>::infinity();
  if (x.norm() < 1.0) best = ChartTarget{from, x};
  const Chart& c = atlas.chart(from);
  std::vector<double> vars(x.data(), x.data() + x.size());
  for (const Transition& t : c.neighbors) {
    if (!overlap_contains(c, t, x)) continue;
    Vec y(atlas.dim);
    bool ok = true;
    try {
      for (int i = 0; i < atlas.dim; ++i) y[i] = t.map[i].eval_d(vars);
    } catch (const DomainError&) {
      ok = false;
    }
    if (!ok) continue;
    const double n = y.norm();
    if (n < best_norm) {
      best_norm = n;
      best = ChartTarget{t.to, y};
    }
  }
  return best;
}

MetricJets pullback_metric(const Chart& chart, const Vec& x, int order) {
  const int m = chart.dim;
  auto space = JetSpace::get(m, order);
  std::vector<Jet> vars;
  vars.reserve(m);
  for (int i = 0; i < m; ++i) vars.push_back(Jet::variable(space, i, x[i]));

  MetricJets g;
  g.dim = m;
  g.entries.reserve(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (j < i) {
        g.entries.push_back(g.entries[j * m + i]);  // symmetric by construction
      } else {
        g.entries.push_back(chart.metric_entry(i, j).eval<Jet>(vars));
      }
    }

  const Mat G = g.value();
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success)
    throw NumericError("pull-back metric is not positive definite at the sampled point");
  return g;
}

int multiplicity(const Atlas& atlas, const SamplePlan& plan) {
  int best = 0;
  for (const Chart& c : atlas.charts) {
    SamplePlan p = plan;
    p.dim = atlas.dim;
    const auto pts = ball_samples(p);
    for (const Vec& x : pts) {
      int count = 1;
      std::vector<double> vars(x.data(), x.data() + x.size());
      for (const Transition& t : c.neighbors) {
        if (!overlap_contains(c, t, x)) continue;
        bool inside = true;
        double n2 = 0.0;
        try {
          for (int i = 0; i < atlas.dim; ++i) {
            const double yi = t.map[i].eval_d(vars);
            n2 += yi * yi;
          }
        } catch (const DomainError&) {
          inside = false;
        }
        if (inside && n2 < 1.0) ++count;
      }
      best = std::max(best, count);
    }
  }
  return best;
}

CoverCheck shrink_cover_check(const Atlas& atlas, const SamplePlan& plan) {
  const double r = atlas.shrink_radius;
  for (const Chart& c : atlas.charts) {
    if (c.boundary) continue;
    SamplePlan p = plan;
    p.dim = atlas.dim;
    const auto pts = ball_samples(p);
    for (const Vec& x : pts) {
      if (x.norm() <= r) continue;
      bool covered = false;
      std::vector<double> vars(x.data(), x.data() + x.size());
      for (const Transition& t : c.neighbors) {
        if (!overlap_contains(c, t, x)) continue;
        double n2 = 0.0;
        bool ok = true;
        try {
          for (int i = 0; i < atlas.dim; ++i) {
            const double yi = t.map[i].eval_d(vars);
            n2 += yi * yi;
          }
        } catch (const DomainError&) {
          ok = false;
        }
        if (ok && std::sqrt(n2) <= r) {
          covered = true;
          break;
        }
      }
      if (!covered) return CoverCheck{false, PointRef{c.id, x}};
    }
  }
  return CoverCheck{true, std::nullopt};
}

std::vector<std::string> validate_atlas(const Atlas& atlas, std::uint64_t seed) {
  std::vector<std::string> findings;
  const int m = atlas.dim;
  auto complain = [&](const std::string& s) { findings.push_back(s); };

  if (m < 1) complain("dimension must be positive");
  if (!(atlas.shrink_radius > 0.0 && atlas.shrink_radius < 1.0))
    complain("shrink radius must lie in (0,1)");

  for (const Chart& c : atlas.charts) {
    if (c.dim != m) complain("chart " + std::to_string(c.id) + ": dimension mismatch");
    if (static_cast<int>(c.metric.size()) != m * m)
      complain("chart " + std::to_string(c.id) + ": metric must have m*m entries");
    for (const Expr& e : c.metric)
      if (e.max_var() >= m) complain("chart " + std::to_string(c.id) + ": metric uses unknown variable");
    if (!c.frame.empty() && static_cast<int>(c.frame.size()) != m)
      complain("chart " + std::to_string(c.id) + ": frame must have m components");
    for (const Transition& t : c.neighbors) {
      if (static_cast<int>(t.map.size()) != m)
        complain("chart " + std::to_string(c.id) + ": transition map must have m components");
      bool sym = false;
      try {
        sym = atlas.chart(t.to).find_neighbor(c.id) != nullptr;
      } catch (const AtlasError&) {
      }
      if (!sym)
        complain("neighbour relation not symmetric between " + std::to_string(c.id) + " and " +
                 std::to_string(t.to));
    }
  }
  if (!findings.empty()) return findings;

  // Sampled checks: metric symmetry and SPD, transition round trips, range.
  for (const Chart& c : atlas.charts) {
    const auto pts = ball_samples({m, 0.97, 24, seed});
    for (const Vec& x : pts) {
      std::vector<double> vars(x.data(), x.data() + x.size());
      Mat G(m, m);
      bool ok = true;
      try {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) G(i, j) = c.metric_entry(i, j).eval_d(vars);
      } catch (const DomainError&) {
        ok = false;
        complain("chart " + std::to_string(c.id) + ": metric evaluation failed inside the ball");
      }
      if (!ok) break;
      if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + G.cwiseAbs().maxCoeff())) {
        complain("chart " + std::to_string(c.id) + ": metric expressions are not symmetric");
        break;
      }
      Eigen::SelfAdjointEigenSolver<Mat> es(G);
      if (es.eigenvalues().minCoeff() <= 0.0) {
        complain("chart " + std::to_string(c.id) + ": metric not positive definite at a sample");
        break;
      }
    }

    for (const Transition& t : c.neighbors) {
      const Chart& other = atlas.chart(t.to);
      const Transition* back = other.find_neighbor(c.id);
      if (!back) continue;
      int used = 0;
      for (const Vec& x : ball_samples({m, 0.97, 48, seed + 1})) {
        if (!overlap_contains(c, t, x)) continue;
        std::vector<double> vars(x.data(), x.data() + x.size());
        Vec y(m);
        bool ok = true;
        try {
          for (int i = 0; i < m; ++i) y[i] = t.map[i].eval_d(vars);
        } catch (const DomainError&) {
          ok = false;
        }
        if (!ok) {
          complain("transition " + std::to_string(c.id) + "->" + std::to_string(t.to) +
                   " failed to evaluate on its overlap domain");
          break;
        }
        if (y.norm() > 1.0 + 1e-9) {
          complain("transition " + std::to_string(c.id) + "->" + std::to_string(t.to) +
                   " leaves the closed unit ball");
          break;
        }
        if (y.norm() < 1.0 && overlap_contains(other, *back, y)) {
          std::vector<double> yv(y.data(), y.data() + y.size());
          Vec xr(m);
          try {
            for (int i = 0; i < m; ++i) xr[i] = back->map[i].eval_d(yv);
          } catch (const DomainError&) {
            continue;
          }
          if ((xr - x).norm() > 1e-9) {
            complain("transitions " + std::to_string(c.id) + "<->" + std::to_string(t.to) +
                     " do not compose to the identity");
            break;
          }
        }
        ++used;
      }
      (void)used;
    }
  }
  return findings;
}

}  // namespace ureg
