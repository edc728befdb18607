#include "ureg/descriptor_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ureg {

using json = nlohmann::ordered_json;

std::string descriptor_to_json(const ManifoldDescriptor& M) {
  const int m = M.atlas.dim;
  json j;
  j["schema_version"] = 1;
  j["name"] = M.name;
  j["dimension"] = m;
  j["shrink_radius"] = M.atlas.shrink_radius;
  if (M.atlas.oriented.has_value())
    j["orientation_preserving"] = *M.atlas.oriented;
  else
    j["orientation_preserving"] = nullptr;
  j["window"] = M.window_note;

  json charts = json::array();
  for (const Chart& c : M.atlas.charts) {
    json jc;
    jc["id"] = c.id;
    json metric = json::array();
    for (int i = 0; i < m; ++i) {
      json row = json::array();
      for (int k = 0; k < m; ++k) row.push_back(c.metric_entry(i, k).str());
      metric.push_back(row);
    }
    jc["metric"] = metric;
    json nbrs = json::array();
    for (const Transition& t : c.neighbors) {
      json jt;
      jt["to"] = t.to;
      json map = json::array();
      for (const Expr& e : t.map) map.push_back(e.str());
      jt["map"] = map;
      jt["overlap"] = t.overlap.str();
      nbrs.push_back(jt);
    }
    jc["neighbors"] = nbrs;
    if (!c.frame.empty()) {
      json fr = json::array();
      for (const Expr& e : c.frame) fr.push_back(e.str());
      jc["frame"] = fr;
    }
    jc["depth"] = c.depth;
    jc["boundary"] = c.boundary;
    jc["probe"] = c.probe;
    charts.push_back(jc);
  }
  j["charts"] = charts;

  if (!M.global_metric.empty()) {
    json gm = json::array();
    for (int i = 0; i < m; ++i) {
      json row = json::array();
      for (int k = 0; k < m; ++k) row.push_back(M.global_metric[i * m + k].str());
      gm.push_back(row);
    }
    j["global_metric"] = gm;
  }
  return j.dump(2) + "\n";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error("descriptor: " + what); }

const std::set<std::string> kTopKeys = {"schema_version", "name",   "dimension",
                                        "shrink_radius",  "window", "orientation_preserving",
                                        "charts",         "global_metric"};
const std::set<std::string> kChartKeys = {"id",    "metric",   "neighbors", "frame",
                                          "depth", "boundary", "probe"};
const std::set<std::string> kNbrKeys = {"to", "map", "overlap"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) bad("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

ManifoldDescriptor descriptor_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("descriptor: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  reject_unknown(j, kTopKeys, "descriptor");

  ManifoldDescriptor M;
  if (!j.contains("dimension") || !j["dimension"].is_number_integer()) bad("missing integer 'dimension'");
  const int m = j["dimension"].get<int>();
  if (m < 1 || m > kMaxJetDim) bad("dimension out of range");
  M.atlas.dim = m;
  if (!j.contains("shrink_radius")) bad("missing 'shrink_radius'");
  M.atlas.shrink_radius = j["shrink_radius"].get<double>();
  if (!(M.atlas.shrink_radius > 0.0 && M.atlas.shrink_radius < 1.0))
    bad("shrink_radius must lie in (0,1)");
  M.name = j.value("name", std::string("unnamed"));
  M.window_note = j.value("window", std::string());
  if (j.contains("orientation_preserving") && !j["orientation_preserving"].is_null())
    M.atlas.oriented = j["orientation_preserving"].get<bool>();

  if (!j.contains("charts") || !j["charts"].is_array() || j["charts"].empty())
    bad("missing non-empty 'charts' array");

  for (const json& jc : j["charts"]) {
    reject_unknown(jc, kChartKeys, "chart");
    Chart c;
    c.dim = m;
    if (!jc.contains("id")) bad("chart missing 'id'");
    c.id = jc["id"].get<int>();
    if (!jc.contains("metric") || !jc["metric"].is_array() || static_cast<int>(jc["metric"].size()) != m)
      bad("chart " + std::to_string(c.id) + ": 'metric' must be an m x m array of expressions");
    for (int i = 0; i < m; ++i) {
      const json& row = jc["metric"][i];
      if (!row.is_array() || static_cast<int>(row.size()) != m)
        bad("chart " + std::to_string(c.id) + ": metric row has wrong length");
      for (int k = 0; k < m; ++k) c.metric.push_back(parse_expr(row[k].get<std::string>(), m));
    }
    if (jc.contains("neighbors")) {
      for (const json& jt : jc["neighbors"]) {
        reject_unknown(jt, kNbrKeys, "neighbor");
        Transition t;
        t.to = jt.at("to").get<int>();
        if (!jt.contains("map") || static_cast<int>(jt["map"].size()) != m)
          bad("transition must carry m map expressions");
        for (const json& e : jt["map"]) t.map.push_back(parse_expr(e.get<std::string>(), m));
        t.overlap = parse_expr(jt.at("overlap").get<std::string>(), m);
        c.neighbors.push_back(std::move(t));
      }
    }
    if (jc.contains("frame")) {
      if (static_cast<int>(jc["frame"].size()) != m) bad("frame must carry m expressions");
      for (const json& e : jc["frame"]) c.frame.push_back(parse_expr(e.get<std::string>(), m));
    }
    c.depth = jc.value("depth", 0);
    c.boundary = jc.value("boundary", false);
    c.probe = jc.value("probe", true);
    M.atlas.charts.push_back(std::move(c));
  }

  if (j.contains("global_metric")) {
    if (static_cast<int>(j["global_metric"].size()) != m) bad("global_metric must be m x m");
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k)
        M.global_metric.push_back(parse_expr(j["global_metric"][i][k].get<std::string>(), m));
  }

  // structural validation
  const auto findings = validate_atlas(M.atlas);
  if (!findings.empty()) bad("atlas validation failed: " + findings.front());
  return M;
}

ManifoldDescriptor load_descriptor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open descriptor file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return descriptor_from_json(ss.str());
}

void save_descriptor(const ManifoldDescriptor& M, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write descriptor file '" + path + "'");
  out << descriptor_to_json(M);
}

}  // namespace ureg
