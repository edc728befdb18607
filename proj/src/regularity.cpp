#include "ureg/regularity.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ureg/parallel.hpp"

namespace ureg {

namespace {

// Max |d^a entry| for |a| <= k, from a jet.
void jet_sup_per_order(const Jet& j, std::vector<double>& sup_by_degree) {
  const JetSpace& sp = *j.space();
  for (int i = 0; i < sp.size(); ++i) {
    const double d = std::abs(j.coeff(i) * sp.factorial_alpha(i));
    auto& slot = sup_by_degree[sp.degree(i)];
    if (d > slot) slot = d;
  }
}

double eig_equivalence(const Mat& G) {
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw NumericError("metric not positive definite in equivalence estimate");
  return std::max(hi, 1.0 / lo);
}

}  // namespace

double metric_equivalence_constant(const Chart& chart, const SamplePlan& plan) {
  SamplePlan p = plan;
  p.dim = chart.dim;
  double c = 1.0;
  for (const Vec& x : ball_samples(p)) {
    MetricJets g = pullback_metric(chart, x, 0);
    c = std::max(c, eig_equivalence(g.value()));
  }
  return c;
}

double derivative_bounds(const Chart& chart, BoundTarget target, int k, const SamplePlan& plan,
                         const Atlas* atlas) {
  SamplePlan p = plan;
  p.dim = chart.dim;
  double sup = 0.0;
  std::vector<double> by_degree(k + 1, 0.0);

  for (const Vec& x : ball_samples(p)) {
    switch (target) {
      case BoundTarget::Metric: {
        MetricJets g = pullback_metric(chart, x, k);
        for (const Jet& e : g.entries) jet_sup_per_order(e, by_degree);
        break;
      }
      case BoundTarget::Inverse: {
        MetricJets g = pullback_metric(chart, x, k);
        MetricJets gi = metric_inverse(g);
        for (const Jet& e : gi.entries) jet_sup_per_order(e, by_degree);
        break;
      }
      case BoundTarget::Christoffel: {
        ChristoffelField gamma = christoffel(chart, x, k);
        for (const Jet& e : gamma.comp) jet_sup_per_order(e, by_degree);
        break;
      }
      case BoundTarget::Transitions: {
        if (!atlas) throw Error("derivative_bounds on transitions needs the atlas");
        for (const Transition& t : chart.neighbors) {
          if (!overlap_contains(chart, t, x)) continue;
          try {
            auto jets = transition_jets(*atlas, chart.id, t.to, x, k);
            for (const Jet& e : jets) jet_sup_per_order(e, by_degree);
          } catch (const Error&) {
            // outside the safe overlap; skip
          }
        }
        break;
      }
    }
  }
  for (double v : by_degree) sup = std::max(sup, v);
  return sup;
}

double curvature_bounds(const ManifoldDescriptor& M, int k, const SamplePlan& plan) {
  double sup = 0.0;
  for (const Chart& chart : M.atlas.charts) {
    SamplePlan p = plan;
    p.dim = chart.dim;
    p.radius = std::min(plan.radius, M.atlas.shrink_radius);
    for (const Vec& x : ball_samples(p)) {
      TensorComponents nk = nabla_k_R(chart, x, k);
      MetricJets g = pullback_metric(chart, x, 0);
      sup = std::max(sup, bundle_norm(nk, g.value()));
    }
  }
  return sup;
}

// --- full report -------------------------------------------------------------

namespace {

struct ChartAccumulator {
  // quantity -> per-level running max and witness
  std::vector<std::vector<double>> level_max;  // [quantity][level]
  std::vector<Vec> witness;                    // [quantity] point of the overall max
  std::vector<double> overall;                 // [quantity]
  bool spd_failure = false;
  Vec spd_point;
  bool budget_hit = false;
};

struct QuantitySchema {
  std::vector<std::string> names;
  int idx_c = 0;
  int idx_metric0 = 0;     // metric c(k) block start
  int idx_inverse0 = 0;
  int idx_transition0 = 0;
  int idx_christoffel0 = 0;
  int idx_curvature0 = 0;
  int kmax = 0;

  explicit QuantitySchema(int k_max) : kmax(k_max) {
    idx_c = 0;
    names.push_back("metric-equivalence-c");
    idx_metric0 = static_cast<int>(names.size());
    for (int k = 0; k <= k_max; ++k) names.push_back("metric-c" + std::to_string(k));
    idx_inverse0 = static_cast<int>(names.size());
    for (int k = 0; k <= k_max; ++k) names.push_back("inverse-metric-c" + std::to_string(k));
    idx_transition0 = static_cast<int>(names.size());
    for (int k = 0; k <= k_max; ++k) names.push_back("transition-c" + std::to_string(k));
    idx_christoffel0 = static_cast<int>(names.size());
    for (int k = 0; k + 1 <= k_max; ++k) names.push_back("christoffel-c" + std::to_string(k));
    idx_curvature0 = static_cast<int>(names.size());
    for (int k = 0; k + 2 <= k_max; ++k) names.push_back("curvature-sup-nabla" + std::to_string(k) + "R");
  }
  int count() const { return static_cast<int>(names.size()); }
};

}  // namespace

RegularityReport regularity_report(const ManifoldDescriptor& M, const ReportConfig& config) {
  RegularityReport rep;
  rep.manifold = M.name;
  rep.window_note = M.window_note;
  rep.dim = M.atlas.dim;
  rep.shrink_radius = M.atlas.shrink_radius;
  rep.config = config;

  const int L = config.grid_levels;
  const int kmax = config.k_max;
  QuantitySchema schema(kmax);
  const int nq = schema.count();
  const int ncharts = static_cast<int>(M.atlas.charts.size());

  // Per-level sample counts (nested prefixes).
  std::vector<int> level_count(L);
  for (int l = 0; l < L; ++l)
    level_count[l] = config.base_samples * static_cast<int>(std::pow(config.sample_growth, l));
  const int max_count = level_count.back();

  std::atomic<long> budget_left{config.budget};

  std::vector<ChartAccumulator> acc(ncharts);
  parallel_for(ncharts, [&](int ci) {
    const Chart& chart = M.atlas.charts[ci];
    ChartAccumulator& A = acc[ci];
    A.level_max.assign(nq, std::vector<double>(L, 0.0));
    A.witness.assign(nq, Vec::Zero(M.atlas.dim));
    A.overall.assign(nq, 0.0);

    SamplePlan plan{M.atlas.dim, config.sample_radius, max_count, config.seed};
    const auto points = ball_samples(plan);

    std::vector<double> by_degree(kmax + 1);
    auto record = [&](int q, double value, const Vec& x, int level_from) {
      for (int l = level_from; l < L; ++l)
        if (value > A.level_max[q][l]) A.level_max[q][l] = value;
      if (value > A.overall[q]) {
        A.overall[q] = value;
        A.witness[q] = x;
      }
    };

    for (int si = 0; si < max_count; ++si) {
      if (budget_left.fetch_sub(1) <= 0) {
        A.budget_hit = true;
        return;
      }
      const Vec& x = points[si];
      // first level whose sample set includes this index
      int level_from = L - 1;
      for (int l = 0; l < L; ++l)
        if (si < level_count[l]) {
          level_from = l;
          break;
        }
      // deeper charts only count from their depth level on
      level_from = std::max(level_from, chart.depth);

      try {
        MetricJets g = pullback_metric(chart, x, kmax);

        record(schema.idx_c, eig_equivalence(g.value()), x, level_from);

        std::fill(by_degree.begin(), by_degree.end(), 0.0);
        for (const Jet& e : g.entries) jet_sup_per_order(e, by_degree);
        double run = 0.0;
        for (int k = 0; k <= kmax; ++k) {
          run = std::max(run, by_degree[k]);
          record(schema.idx_metric0 + k, run, x, level_from);
        }

        MetricJets gi = metric_inverse(g);
        std::fill(by_degree.begin(), by_degree.end(), 0.0);
        for (const Jet& e : gi.entries) jet_sup_per_order(e, by_degree);
        run = 0.0;
        for (int k = 0; k <= kmax; ++k) {
          run = std::max(run, by_degree[k]);
          record(schema.idx_inverse0 + k, run, x, level_from);
        }

        if (kmax >= 1) {
          ChristoffelField gamma = christoffel(g);
          std::fill(by_degree.begin(), by_degree.end(), 0.0);
          for (const Jet& e : gamma.comp) jet_sup_per_order(e, by_degree);
          run = 0.0;
          for (int k = 0; k + 1 <= kmax; ++k) {
            run = std::max(run, by_degree[k]);
            record(schema.idx_christoffel0 + k, run, x, level_from);
          }

          // curvature norms on the shrunken ball only
          if (kmax >= 2 && x.norm() <= M.atlas.shrink_radius) {
            TensorJets cur = curvature_jets(gamma);
            const Mat G = g.value();
            for (int k = 0; k + 2 <= kmax; ++k) {
              TensorComponents vals = cur.values();
              record(schema.idx_curvature0 + k, bundle_norm(vals, G), x, level_from);
              if (k + 3 <= kmax) cur = covariant_derivative(cur, gamma);
            }
          }
        }

        // Transition jets are the costliest evaluations (composed maps);
        // every fourth sample still forms nested refinement prefixes.
        if (si % 4 == 0) {
          for (const Transition& t : chart.neighbors) {
            if (!overlap_contains(chart, t, x)) continue;
            std::fill(by_degree.begin(), by_degree.end(), 0.0);
            bool ok = true;
            try {
              auto jets = transition_jets(M.atlas, chart.id, t.to, x, kmax);
              for (const Jet& e : jets) jet_sup_per_order(e, by_degree);
            } catch (const Error&) {
              ok = false;
            }
            if (ok) {
              run = 0.0;
              for (int k = 0; k <= kmax; ++k) {
                run = std::max(run, by_degree[k]);
                record(schema.idx_transition0 + k, run, x, level_from);
              }
            }
          }
        }
      } catch (const NumericError&) {
        A.spd_failure = true;
        A.spd_point = x;
        return;
      } catch (const DomainError&) {
        A.spd_failure = true;
        A.spd_point = x;
        return;
      }
    }
  });

  // Deterministic merge in chart order.
  rep.quantities.resize(nq);
  std::vector<double> overall(nq, -1.0);
  for (int q = 0; q < nq; ++q) {
    QuantityTrend& t = rep.quantities[q];
    t.name = schema.names[q];
    t.levels.assign(L, 0.0);
  }
  bool spd_failure = false;
  std::string spd_where;
  for (int ci = 0; ci < ncharts; ++ci) {
    const ChartAccumulator& A = acc[ci];
    if (A.budget_hit) rep.budget_exhausted = true;
    if (A.spd_failure && !spd_failure) {
      spd_failure = true;
      spd_where = "chart " + std::to_string(M.atlas.charts[ci].id);
    }
    if (A.level_max.empty()) continue;
    for (int q = 0; q < nq; ++q) {
      for (int l = 0; l < L; ++l)
        if (A.level_max[q][l] > rep.quantities[q].levels[l]) rep.quantities[q].levels[l] = A.level_max[q][l];
      if (A.overall[q] > overall[q]) {
        overall[q] = A.overall[q];
        rep.quantities[q].witness_chart = M.atlas.charts[ci].id;
        rep.quantities[q].witness_point = A.witness[q];
      }
    }
  }

  // Sustained growth rate: the smallest ratio across refinement steps. A
  // genuinely divergent quantity keeps growing at every refinement; a large
  // finite sup shows one big jump and then levels off.
  for (QuantityTrend& t : rep.quantities) {
    t.growth = std::numeric_limits<double>::infinity();
    for (int l = 0; l + 1 < L; ++l) {
      const double lo = t.levels[l], hi = t.levels[l + 1];
      const double ratio = hi < config.abs_floor ? 1.0 : hi / std::max(lo, config.abs_floor);
      t.growth = std::min(t.growth, ratio);
    }
    if (!std::isfinite(t.growth)) t.growth = 1.0;
  }
  rep.equivalence_c = rep.quantities[schema.idx_c].levels.back();

  // Atlas combinatorics at the finest level.
  SamplePlan comb_plan{M.atlas.dim, 0.98, std::min(max_count, 512), config.seed};
  rep.multiplicity = multiplicity(M.atlas, comb_plan);
  const CoverCheck cover = shrink_cover_check(M.atlas, comb_plan);
  rep.cover_ok = cover.covered;
  rep.cover_witness = cover.witness;

  // Geodesic diagnostics from the probe charts.
  if (config.run_injectivity) {
    for (const Chart& chart : M.atlas.charts) {
      if (!chart.probe) continue;
      InjectivityOptions io;
      io.cap = config.inj_cap;
      io.rays = config.inj_rays;
      io.budget = config.inj_budget;
      io.seed = config.seed;
      try {
        InjectivityEstimate est =
            injectivity_radius_estimate(M, PointRef{chart.id, Vec::Zero(M.atlas.dim)}, io);
        rep.injectivity_lower = est.lower;
      } catch (const Error&) {
        rep.injectivity_lower.reset();
      }
      break;
    }
  }
  if (config.run_completeness) {
    try {
      CompletenessProbe probe =
          completeness_probe(M, config.completeness_horizon, config.completeness_dirs, 4, config.seed);
      rep.completeness_ok = probe.complete_on_window;
      rep.completeness_note = probe.note;
    } catch (const Error& e) {
      rep.completeness_ok = false;
      rep.completeness_note = e.what();
    }
  }

  // Verdict.
  if (rep.budget_exhausted) {
    rep.verdict = "inconclusive";
    rep.witness = "evaluation budget exhausted before all levels completed";
    return rep;
  }
  if (spd_failure) {
    rep.verdict = "inconsistent";
    rep.witness = "metric evaluation failed (not SPD or out of domain) at " + spd_where;
    return rep;
  }
  if (!rep.cover_ok) {
    rep.verdict = "inconsistent";
    rep.witness = "shrunken charts fail to cover: chart " + std::to_string(cover.witness->chart);
    return rep;
  }
  const QuantityTrend* worst = nullptr;
  for (const QuantityTrend& t : rep.quantities)
    if (t.growth >= config.divergence_ratio && (!worst || t.growth > worst->growth)) worst = &t;
  if (worst) {
    rep.verdict = "inconsistent";
    std::ostringstream os;
    os << worst->name << " grows x" << worst->growth << " under every refinement (levels:";
    for (double v : worst->levels) os << " " << v;
    os << ") near chart " << worst->witness_chart;
    rep.witness = os.str();
    return rep;
  }
  rep.verdict = "consistent-with-uniformly-regular";
  return rep;
}

// --- serialization -------------------------------------------------------------

std::string report_to_json(const RegularityReport& rep) {
  using json = nlohmann::ordered_json;
  json j;
  j["schema_version"] = 1;
  j["manifold"] = rep.manifold;
  j["window"] = rep.window_note;
  j["dimension"] = rep.dim;
  j["shrink_radius"] = rep.shrink_radius;
  j["config"] = {{"k_max", rep.config.k_max},
                 {"grid_levels", rep.config.grid_levels},
                 {"base_samples", rep.config.base_samples},
                 {"sample_growth", rep.config.sample_growth},
                 {"divergence_ratio", rep.config.divergence_ratio},
                 {"sample_radius", rep.config.sample_radius},
                 {"seed", rep.config.seed}};
  j["multiplicity"] = rep.multiplicity;
  j["cover_ok"] = rep.cover_ok;
  if (rep.cover_witness) {
    json w;
    w["chart"] = rep.cover_witness->chart;
    w["point"] = std::vector<double>(rep.cover_witness->x.data(),
                                     rep.cover_witness->x.data() + rep.cover_witness->x.size());
    j["cover_witness"] = w;
  }
  j["equivalence_c"] = rep.equivalence_c;
  json qs = json::array();
  for (const QuantityTrend& t : rep.quantities) {
    json q;
    q["name"] = t.name;
    q["levels"] = t.levels;
    q["growth"] = t.growth;
    q["witness_chart"] = t.witness_chart;
    if (t.witness_point.size() > 0)
      q["witness_point"] =
          std::vector<double>(t.witness_point.data(), t.witness_point.data() + t.witness_point.size());
    qs.push_back(q);
  }
  j["quantities"] = qs;
  if (rep.injectivity_lower)
    j["injectivity_lower"] = *rep.injectivity_lower;
  else
    j["injectivity_lower"] = nullptr;
  j["completeness_ok"] = rep.completeness_ok;
  j["completeness_note"] = rep.completeness_note;
  j["budget_exhausted"] = rep.budget_exhausted;
  j["verdict"] = rep.verdict;
  j["witness"] = rep.witness;
  return j.dump(2) + "\n";
}

void print_report_table(const RegularityReport& rep, std::ostream& out) {
  out << "manifold: " << rep.manifold << "  (dim " << rep.dim << ", r = " << rep.shrink_radius << ")\n";
  if (!rep.window_note.empty()) out << "window:   " << rep.window_note << "\n";
  out << "multiplicity >= " << rep.multiplicity << ", cover " << (rep.cover_ok ? "ok" : "FAILED")
      << ", equivalence c = " << rep.equivalence_c << "\n";
  if (rep.injectivity_lower) out << "injectivity lower bound: " << *rep.injectivity_lower << "\n";
  out << "completeness probe: " << (rep.completeness_ok ? "no early termination" : rep.completeness_note)
      << "\n";
  out << "quantity                          levels (refining)                growth\n";
  for (const QuantityTrend& t : rep.quantities) {
    out << "  " << t.name;
    for (std::size_t i = t.name.size(); i < 32; ++i) out << ' ';
    for (double v : t.levels) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), " %11.5g", v);
      out << buf;
    }
    char gb[24];
    std::snprintf(gb, sizeof(gb), "   x%.3g", t.growth);
    out << gb << "\n";
  }
  out << "verdict: " << rep.verdict << "\n";
  if (!rep.witness.empty()) out << "witness: " << rep.witness << "\n";
}

}  // namespace ureg
