// ureg: numerical checks of atlas regularity and bounded-geometry conditions
// on explicitly described Riemannian manifolds.
//
// Exit codes: 0 consistent / success, 1 usage or input error,
//             2 inconsistent (witness in the report), 3 inconclusive.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ureg/catalog.hpp"
#include "ureg/descriptor_io.hpp"
#include "ureg/geodesic.hpp"
#include "ureg/regularity.hpp"

#include <json.hpp>

using namespace ureg;
using ojson = nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string catalog;
  std::string file;
  int kmax = 4;
  int grid_levels = 3;
  std::uint64_t seed = 12345;
  long budget = 50000000;
  std::string out;
  std::string format = "table";
  std::vector<std::string> tol;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--catalog", a.catalog, "built-in manifold name (see `ureg catalog list`)");
  cmd->add_option("--file", a.file, "manifold description file (JSON)");
  cmd->add_option("--kmax", a.kmax, "highest derivative order checked")->check(CLI::Range(0, 6));
  cmd->add_option("--grid-levels", a.grid_levels, "refinement levels")->check(CLI::Range(1, 6));
  cmd->add_option("--seed", a.seed, "seed for all sampling plans");
  cmd->add_option("--budget", a.budget, "evaluation budget");
  cmd->add_option("--out", a.out, "output path (default: stdout)");
  cmd->add_option("--format", a.format, "output format")->check(CLI::IsMember({"json", "table", "csv"}));
  cmd->add_option("--tol", a.tol, "tolerance overrides key=value (divergence-ratio, abs-floor, step-abs, step-rel)");
}

ManifoldDescriptor resolve_manifold(const CommonArgs& a) {
  if (!a.catalog.empty() && !a.file.empty()) throw Error("use either --catalog or --file, not both");
  if (!a.catalog.empty()) return make_catalog(a.catalog);
  if (!a.file.empty()) return load_descriptor(a.file);
  throw Error("a manifold is required: --catalog <name> or --file <path>");
}

double tol_value(const std::vector<std::string>& tol, const std::string& key, double fallback) {
  for (const std::string& kv : tol) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("malformed --tol entry '" + kv + "', expected key=value");
    if (kv.substr(0, eq) == key) {
      const double v = std::stod(kv.substr(eq + 1));
      if (!(v > 0.0)) throw Error("--tol " + key + " must be positive");
      return v;
    }
  }
  return fallback;
}

void validate_tol_keys(const std::vector<std::string>& tol) {
  static const std::set<std::string> known = {"divergence-ratio", "abs-floor", "step-abs", "step-rel"};
  for (const std::string& kv : tol) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("malformed --tol entry '" + kv + "', expected key=value");
    if (!known.count(kv.substr(0, eq))) throw Error("unknown --tol key '" + kv.substr(0, eq) + "'");
  }
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot write output file '" + out_path + "'");
  out << text;
}

int run_check(const CommonArgs& a) {
  validate_tol_keys(a.tol);
  ManifoldDescriptor M = resolve_manifold(a);
  ReportConfig cfg;
  cfg.k_max = a.kmax;
  cfg.grid_levels = a.grid_levels;
  cfg.seed = a.seed;
  cfg.budget = a.budget;
  cfg.divergence_ratio = tol_value(a.tol, "divergence-ratio", cfg.divergence_ratio);
  cfg.abs_floor = tol_value(a.tol, "abs-floor", cfg.abs_floor);

  RegularityReport rep = regularity_report(M, cfg);

  // The JSON report always goes to --out when given; the table view prints to
  // stdout unless JSON-to-stdout was requested explicitly.
  if (!a.out.empty()) write_output(report_to_json(rep), a.out);
  if (a.format == "json" && a.out.empty()) {
    std::cout << report_to_json(rep);
  } else if (a.format != "json" || !a.out.empty()) {
    std::ostringstream table;
    print_report_table(rep, table);
    std::cout << table.str();
  }
  if (rep.verdict == "consistent-with-uniformly-regular") return 0;
  if (rep.verdict == "inconsistent") return 2;
  return 3;
}

GeodesicOptions step_options(const CommonArgs& a) {
  GeodesicOptions opt;
  opt.step.abs_tol = tol_value(a.tol, "step-abs", 1e-9);
  opt.step.rel_tol = tol_value(a.tol, "step-rel", 1e-9);
  return opt;
}

int run_geodesic(const CommonArgs& a, const std::vector<double>& p, const std::vector<double>& v,
                 int chart, double T) {
  validate_tol_keys(a.tol);
  ManifoldDescriptor M = resolve_manifold(a);
  const int m = M.atlas.dim;
  if (static_cast<int>(p.size()) != m || static_cast<int>(v.size()) != m)
    throw Error("--p and --v must carry " + std::to_string(m) + " components");
  Vec x(m), w(m);
  for (int i = 0; i < m; ++i) {
    x[i] = p[i];
    w[i] = v[i];
  }
  if (x.norm() >= 1.0) throw Error("start point lies outside the chart ball");

  GeodesicPath path = integrate_geodesic(M, PointRef{chart, x}, w, T, step_options(a));

  std::ostringstream csv;
  csv << "t,chart";
  for (int i = 0; i < m; ++i) csv << ",c" << (i + 1);
  for (int i = 0; i < m; ++i) csv << ",z" << (i + 1);
  csv << ",speed\n";
  for (const GeodesicState& s : path.samples) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", s.t);
    csv << buf << "," << s.chart;
    for (int i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.position[i]);
      csv << "," << buf;
    }
    for (int i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.velocity[i]);
      csv << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", g_norm(M, PointRef{s.chart, s.position}, s.velocity));
    csv << "," << buf << "\n";
  }
  write_output(csv.str(), a.out);
  if (path.termination == Termination::StepFailure) {
    std::cerr << "integration failed: " << path.failure_reason << "\n";
    return 1;
  }
  return 0;
}

int run_injrad(const CommonArgs& a, const std::vector<double>& p, int chart, double cap, int rays,
               long inj_budget) {
  validate_tol_keys(a.tol);
  ManifoldDescriptor M = resolve_manifold(a);
  const int m = M.atlas.dim;
  Vec x = Vec::Zero(m);
  for (int i = 0; i < m && i < static_cast<int>(p.size()); ++i) x[i] = p[i];

  InjectivityOptions io;
  io.cap = cap;
  io.rays = rays;
  io.budget = inj_budget;
  io.seed = a.seed;
  io.geo = step_options(a);
  InjectivityEstimate est = injectivity_radius_estimate(M, PointRef{chart, x}, io);

  ojson j;
  j["manifold"] = M.name;
  j["chart"] = chart;
  j["point"] = std::vector<double>(x.data(), x.data() + m);
  j["cap"] = cap;
  j["lower"] = est.lower;
  if (est.upper)
    j["upper"] = *est.upper;
  else
    j["upper"] = nullptr;
  j["budget_exhausted"] = est.budget_exhausted;
  ojson ev = ojson::array();
  for (const InjEvidence& e : est.evidence)
    ev.push_back({{"kind", e.kind}, {"radius", e.radius}, {"ray_a", e.ray_a}, {"ray_b", e.ray_b}});
  j["evidence"] = ev;
  write_output(j.dump(2) + "\n", a.out);
  return est.budget_exhausted ? 3 : 0;
}

int run_lemma(const CommonArgs& a, int trials, double delta_arg) {
  validate_tol_keys(a.tol);
  ManifoldDescriptor M = resolve_manifold(a);
  const int m = M.atlas.dim;
  const double r = M.atlas.shrink_radius;
  const double delta = delta_arg > 0.0 ? delta_arg : 0.5 * (1.0 - r);

  Rng rng(a.seed);
  int pass = 0, fail = 0;
  ojson failures = ojson::array();
  for (int k = 0; k < trials; ++k) {
    const int ci = static_cast<int>(rng.raw() % M.atlas.charts.size());
    const Chart& chart = M.atlas.charts[ci];
    const Vec xp = rng.ball_point(m, 0.98 * r);
    const Vec vp = rng.direction(m);
    LemmaReport rep = lemma_existence_check(M, chart.id, xp, vp, delta, step_options(a), a.seed);
    if (rep.pass()) {
      ++pass;
    } else {
      ++fail;
      if (failures.size() < 16) {
        failures.push_back({{"chart", chart.id},
                            {"witness_time", rep.witness_time},
                            {"exists", rep.exists},
                            {"envelope_ok", rep.envelope_ok},
                            {"velocity_ok", rep.velocity_ok},
                            {"containment_ok", rep.containment_ok}});
      }
    }
  }
  ojson j;
  j["manifold"] = M.name;
  j["trials"] = trials;
  j["delta"] = delta;
  j["pass"] = pass;
  j["fail"] = fail;
  j["pass_rate"] = trials > 0 ? static_cast<double>(pass) / trials : 1.0;
  j["failures"] = failures;
  write_output(j.dump(2) + "\n", a.out);
  return fail == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical regularity and bounded-geometry checks on chart-described manifolds"};
  app.require_subcommand(1);

  CommonArgs check_args;
  CLI::App* check = app.add_subcommand("check", "estimate atlas constants and render a verdict");
  add_common(check, check_args);

  CommonArgs geo_args;
  std::vector<double> geo_p, geo_v;
  int geo_chart = 0;
  double geo_T = 1.0;
  CLI::App* geo = app.add_subcommand("geodesic", "integrate a geodesic and emit CSV samples");
  add_common(geo, geo_args);
  geo->add_option("--p", geo_p, "start position in chart coordinates")->required();
  geo->add_option("--v", geo_v, "start velocity in chart coordinates")->required();
  geo->add_option("--chart", geo_chart, "start chart id");
  geo->add_option("--T", geo_T, "time horizon");

  CommonArgs inj_args;
  std::vector<double> inj_p;
  int inj_chart = 0;
  double inj_cap = 10.0;
  int inj_rays = 32;
  long inj_budget = 4000000;
  CLI::App* inj = app.add_subcommand("injrad", "estimate the injectivity radius at a point");
  add_common(inj, inj_args);
  inj->add_option("--p", inj_p, "base point in chart coordinates (default 0)");
  inj->add_option("--chart", inj_chart, "base chart id");
  inj->add_option("--cap", inj_cap, "largest tested radius");
  inj->add_option("--rays", inj_rays, "direction count");
  inj->add_option("--inj-budget", inj_budget, "evaluation budget for the ray integrations");

  CommonArgs lem_args;
  int lem_trials = 100;
  double lem_delta = -1.0;
  CLI::App* lem = app.add_subcommand("lemma", "uniform short-time geodesic existence trials");
  add_common(lem, lem_args);
  lem->add_option("--trials", lem_trials, "number of random (x_p, V_p) draws");
  lem->add_option("--delta", lem_delta, "ball margin delta in (0, 1-r); default (1-r)/2");

  CLI::App* cat = app.add_subcommand("catalog", "list or emit built-in manifolds");
  CLI::App* cat_list = cat->add_subcommand("list", "list built-in manifolds");
  std::string emit_name, emit_out;
  CLI::App* cat_emit = cat->add_subcommand("emit", "write a built-in manifold description file");
  cat_emit->add_option("name", emit_name, "catalog entry name")->required();
  cat_emit->add_option("--out", emit_out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (check->parsed()) return run_check(check_args);
    if (geo->parsed()) return run_geodesic(geo_args, geo_p, geo_v, geo_chart, geo_T);
    if (inj->parsed()) return run_injrad(inj_args, inj_p, inj_chart, inj_cap, inj_rays, inj_budget);
    if (lem->parsed()) return run_lemma(lem_args, lem_trials, lem_delta);
    if (cat->parsed()) {
      if (cat_list->parsed()) {
        std::printf("%-28s %-14s %s\n", "name", "expected", "summary");
        for (const CatalogEntry& e : catalog_entries())
          std::printf("%-28s %-14s %s\n", e.name.c_str(), e.expected_verdict.c_str(), e.summary.c_str());
        return 0;
      }
      if (cat_emit->parsed()) {
        ManifoldDescriptor M = make_catalog(emit_name);
        write_output(descriptor_to_json(M), emit_out);
        return 0;
      }
      std::cerr << "catalog requires a subcommand: list | emit\n";
      return 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
