#pragma once

// Scenario configs (INI), the check runner and report emission.

#include "genfun/catalog.hpp"
#include "genfun/conditions.hpp"
#include "genfun/duality.hpp"
#include "genfun/gconvex.hpp"
#include "genfun/geometry.hpp"
#include "genfun/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <set>

namespace genfun {

inline const std::vector<std::string>& known_check_ids() {
  static const std::vector<std::string> ids{"gamma",   "A1",          "A1*",         "A2",     "A3w",
                                            "A3s",     "duality:A3w", "duality:A3s", "thm2.1", "thm2.2",
                                            "thm3.1",  "cor3.1",      "thm3.2"};
  return ids;
}

struct ScenarioConfig {
  std::string gf_id;
  Params params;
  std::vector<std::string> checks;
  std::uint64_t seed = 42;
  int samples = 1000;
  int segments = 20;
  std::string output_dir = "genfun_out";
  int theta_m = 32;
  int x_grid = 65;
  int y_grid = 65;
  /// Neighbourhood radius for the geometry checks; 0 selects the default.
  double radius = 0.0;
  std::map<std::string, double> tolerances;
};

namespace detail {

inline double parse_config_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (text.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "'" + key + "' is not a number: '" + text + "'");
  }
}

inline int parse_config_int(const std::string& key, const std::string& text, int lo) {
  const double v = parse_config_number(key, text);
  if (v != std::floor(v) || v < lo || v > 1e9) throw Error(ErrorKind::ConfigError, "'" + key + "' must be an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

inline std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  return s;
}

inline const std::vector<std::string>& tolerance_keys() {
  static const std::vector<std::string> keys{"newton_tol", "max_iter",   "fd_eps_first", "fd_eps_second",
                                             "conv_tol",   "a3s_tol",    "a2_tol",       "coll_tol",
                                             "mp_tol",     "ff_tol",     "attain_tol",   "support_tol"};
  return keys;
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("config syntax: ") + e.what());
  }
  ScenarioConfig c;
  static const std::set<std::string> sections{"generating_function", "params", "run", "grids", "tolerances"};
  for (const auto& [name, sub] : tree) {
    if (!sections.count(name)) throw Error(ErrorKind::ConfigError, "unknown config section [" + name + "]");
  }
  auto section = [&](const char* name) -> const pt::ptree& {
    static const pt::ptree empty;
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
  };
  auto reject_unknown = [](const pt::ptree& sec, const std::string& name, const std::set<std::string>& keys) {
    for (const auto& [k, v] : sec)
      if (!keys.count(k)) throw Error(ErrorKind::ConfigError, "unknown key '" + k + "' in [" + name + "]");
  };

  const auto& gsec = section("generating_function");
  reject_unknown(gsec, "generating_function", {"id"});
  c.gf_id = detail::trim(gsec.get<std::string>("id", ""));
  if (c.gf_id.empty()) throw Error(ErrorKind::ConfigError, "[generating_function] id is required");

  for (const auto& [k, v] : section("params")) c.params[k] = detail::parse_config_number(k, v.data());

  const auto& run = section("run");
  reject_unknown(run, "run", {"checks", "seed", "samples", "segments", "output_dir"});
  for (const auto& item : detail::split(run.get<std::string>("checks", ""), ',')) {
    const std::string id = detail::trim(item);
    if (id.empty()) continue;
    const auto& known = known_check_ids();
    if (std::find(known.begin(), known.end(), id) == known.end())
      throw Error(ErrorKind::ConfigError, "unknown check id '" + id + "'");
    c.checks.push_back(id);
  }
  if (c.checks.empty()) throw Error(ErrorKind::ConfigError, "[run] checks is empty");
  if (auto s = run.get_optional<std::string>("seed")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(detail::trim(*s), &used, 10);
      if (used != detail::trim(*s).size()) throw std::invalid_argument(*s);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "'seed' must be a non-negative 64-bit integer");
    }
  }
  if (auto s = run.get_optional<std::string>("samples")) c.samples = detail::parse_config_int("samples", *s, 1);
  if (auto s = run.get_optional<std::string>("segments")) c.segments = detail::parse_config_int("segments", *s, 1);
  if (auto s = run.get_optional<std::string>("output_dir")) c.output_dir = detail::trim(*s);

  const auto& grids = section("grids");
  reject_unknown(grids, "grids", {"theta_m", "x_grid", "y_grid", "radius"});
  if (auto s = grids.get_optional<std::string>("theta_m")) c.theta_m = detail::parse_config_int("theta_m", *s, 2);
  if (auto s = grids.get_optional<std::string>("x_grid")) c.x_grid = detail::parse_config_int("x_grid", *s, 3);
  if (auto s = grids.get_optional<std::string>("y_grid")) c.y_grid = detail::parse_config_int("y_grid", *s, 3);
  if (auto s = grids.get_optional<std::string>("radius")) {
    c.radius = detail::parse_config_number("radius", *s);
    if (!(c.radius > 0)) throw Error(ErrorKind::ConfigError, "'radius' must be positive");
  }

  const auto& keys = detail::tolerance_keys();
  for (const auto& [k, v] : section("tolerances")) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error(ErrorKind::ConfigError, "unknown tolerance '" + k + "'");
    const double x = detail::parse_config_number(k, v.data());
    if (!(x > 0) || !std::isfinite(x)) throw Error(ErrorKind::ConfigError, "tolerance '" + k + "' must be positive");
    c.tolerances[k] = x;
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot open config '" + path + "'");
  return parse_config(f);
}

/// Everything a run needs, resolved from a config.
struct Scenario {
  ScenarioConfig config;
  GeneratingFunction gf;
  ConditionSettings cs;
  GeometrySettings gs;
  GConvexSettings gcs;
};

inline Scenario resolve(const ScenarioConfig& c) {
  Scenario s;
  s.config = c;
  try {
    s.gf = build(c.gf_id, c.params);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    throw Error(ErrorKind::ConfigError, std::string("building '") + c.gf_id + "': " + e.what());
  }
  s.cs.theta_m = c.theta_m;
  for (const auto& [k, v] : c.tolerances) {
    if (k == "newton_tol") s.gf.solver.newton_tol = v;
    else if (k == "max_iter") s.gf.solver.max_iter = static_cast<int>(v);
    else if (k == "fd_eps_first") s.gf.fd.first = v;
    else if (k == "fd_eps_second") s.gf.fd.second = v;
    else if (k == "conv_tol") s.cs.conv_tol_rel = v;
    else if (k == "a3s_tol") s.cs.a3s_tol = v;
    else if (k == "a2_tol") s.cs.a2_tol = v;
    else if (k == "coll_tol") s.cs.coll_tol = v;
    else if (k == "mp_tol") s.gs.mp_tol_rel = v;
    else if (k == "ff_tol") s.gs.ff_tol = v;
    else if (k == "attain_tol") s.gcs.attain_tol = v;
    else if (k == "support_tol") s.gcs.support_tol_abs = v;
  }
  return s;
}

/// Seeded fixtures shared by the g-convexity checks: Omega is the ball
/// inscribed in x_box, u is the max of five g-affines.
struct GConvexFixture {
  Grid x_grid;
  Grid y_grid;
  SampledFunction u;
  std::vector<GAffine> parts;
};

inline GConvexFixture make_gconvex_fixture(const GeneratingFunction& gf, int x_points, int y_points,
                                           std::uint64_t seed) {
  GConvexFixture f;
  const Box& xb = gf.gamma.x_box;
  f.x_grid = Grid::uniform(xb, x_points);
  f.y_grid = Grid::uniform(gf.gamma.y_box, y_points);
  Rng rng(seed);
  for (int k = 0; k < 5; ++k) {
    const Vec y = rng.point_in(gf.gamma.y_box);
    const Vec x = rng.point_in(xb.scaled(0.8));
    const Interval I = detail::finite_part(gf.gamma.interior(x, y));
    f.parts.push_back({y, I.mid() + 0.05 * I.width() * rng.uniform(-1.0, 1.0)});
  }
  f.u = max_of_affines(gf, f.x_grid, f.parts);
  f.u.active = disk_mask(f.x_grid, xb.center(), xb.half_widths().minCoeff());
  return f;
}

/// Combines per-item reports: fails if any fails, else inconclusive if any
/// is, else holds; margin = min over items.
inline ConditionReport combine_reports(std::string id, const std::vector<ConditionReport>& parts, std::uint64_t seed) {
  ConditionReport r;
  r.condition_id = std::move(id);
  r.seed = seed;
  r.verdict = Verdict::holds;
  r.margin = kLargestFinite;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    r.samples_used += p.samples_used;
    if (p.fails()) r.verdict = Verdict::fails;
    else if (p.verdict == Verdict::inconclusive && r.verdict == Verdict::holds) r.verdict = Verdict::inconclusive;
    if (p.margin < parts[worst].margin) worst = i;
    r.margin = std::min(r.margin, p.margin);
    for (const auto& n : p.notes) r.notes.push_back("item " + std::to_string(i) + ": " + n);
  }
  if (!parts.empty()) {
    r.witness = parts[worst].witness;
    r.extras = parts[worst].extras;
    r.extra("items", static_cast<double>(parts.size())).extra("worst_item", static_cast<double>(worst));
  }
  return r;
}

inline ConditionReport run_check(const Scenario& s, const std::string& id) {
  const auto& gf = s.gf;
  const auto& c = s.config;
  const double radius = c.radius > 0 ? c.radius : default_radius(gf, s.gs);
  auto segments = [&] { return seed_segments(gf, c.segments, c.seed, s.cs); };
  if (id == "gamma") return validate_gamma(gf, c.samples, c.seed);
  if (id == "A1") return check_A1_sampled(gf, gf.gamma.x_box.center(), c.samples, c.seed, s.cs);
  if (id == "A1*") {
    const Vec x = gf.gamma.x_box.center();
    const Vec y = gf.gamma.y_box.center();
    return check_A1star_sampled(gf, y, detail::finite_part(gf.gamma.interior(x, y)).mid(), c.samples, c.seed, s.cs);
  }
  if (id == "A2") return check_A2(gf, c.samples, c.seed, s.cs);
  if (id == "A3w") return check_A3w(gf, segments(), c.seed, s.cs);
  if (id == "A3s") return check_A3s(gf, segments(), c.seed, s.cs);
  if (id == "duality:A3w") return check_duality_invariance(gf, "A3w", c.segments, c.seed, s.cs);
  if (id == "duality:A3s") return check_duality_invariance(gf, "A3s", c.segments, c.seed, s.cs);
  if (id == "thm2.1") return check_equivalence_chain(gf, segments(), radius, c.seed, s.cs, s.gs);
  if (id == "thm2.2") return check_quantitative_chain(gf, segments(), radius, c.seed, s.cs, s.gs);
  if (id == "thm3.1") {
    const auto fx = make_gconvex_fixture(gf, c.x_grid, c.y_grid, c.seed);
    const auto nodes = fx.u.active_nodes();
    double lo = kInf, hi = -kInf;
    for (long i : nodes) lo = std::min(lo, fx.u[i]), hi = std::max(hi, fx.u[i]);
    std::vector<ConditionReport> parts;
    for (int k = 0; k < 4; ++k) {
      Rng rng(derive_seed(c.seed, 100 + k));
      const Vec y0 = rng.point_in(gf.gamma.y_box);
      const long xs = nodes[static_cast<std::size_t>(rng.uniform() * static_cast<double>(nodes.size())) % nodes.size()];
      const double z0 = eval_gstar(gf, fx.x_grid.node(xs), y0, fx.u[xs] + 0.1 * (hi - lo));
      parts.push_back(check_section_gconvexity(gf, fx.u, {y0, z0}, derive_seed(c.seed, k), s.gcs));
    }
    return combine_reports("thm3.1", parts, c.seed);
  }
  if (id == "cor3.1") {
    const Grid xg = Grid::uniform(gf.gamma.x_box, c.x_grid);
    const Grid yg = Grid::uniform(gf.gamma.y_box, c.y_grid);
    const Vec x0 = xg.node(xg.nearest(gf.gamma.x_box.center()));
    Vec shift = Vec::Zero(gf.dim);
    shift[0] = 0.5 * gf.gamma.y_box.half_widths()[0];
    const Vec y0 = yg.node(yg.nearest(gf.gamma.y_box.center() - shift));
    const Vec y1 = yg.node(yg.nearest(gf.gamma.y_box.center() + shift));
    const double z0 = detail::finite_part(gf.gamma.interior(x0, y0)).mid();
    const double z1 = eval_gstar(gf, x0, y1, gf.eval(x0, y0, z0));
    const auto u = max_of_affines(gf, xg, {{y0, z0}, {y1, z1}});
    return check_kink_image(gf, u, x0, yg, true, s.gcs);
  }
  if (id == "thm3.2") {
    const auto fx = make_gconvex_fixture(gf, c.x_grid, c.y_grid, c.seed);
    return check_local_to_global(gf, fx.u, fx.y_grid, c.seed, s.gcs);
  }
  throw Error(ErrorKind::ConfigError, "unknown check id '" + id + "'");
}

struct CheckOutcome {
  ConditionReport report;
  double seconds = 0.0;
  /// Set when the check raised instead of returning a verdict.
  std::optional<std::string> error;
};

struct RunReport {
  ScenarioConfig config;
  std::vector<CheckOutcome> outcomes;
  Verdict overall = Verdict::holds;
  int exit_code = 0;
};

/// Runs every configured check in declaration order. Errors raised by a
/// check are recorded as an inconclusive report; a failing verdict never
/// stops the run.
inline RunReport run_scenario(const ScenarioConfig& cfg) {
  const Scenario s = resolve(cfg);
  RunReport rr;
  rr.config = cfg;
  bool any_fail = false, any_inconclusive = false;
  for (const auto& id : cfg.checks) {
    CheckOutcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o.report = run_check(s, id);
    } catch (const std::exception& e) {
      o.report = ConditionReport{};
      o.report.verdict = Verdict::inconclusive;
      o.report.seed = cfg.seed;
      o.error = e.what();
      o.report.notes.push_back(std::string("error: ") + e.what());
    }
    o.report.condition_id = id;
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    any_fail |= o.report.fails();
    any_inconclusive |= o.report.verdict == Verdict::inconclusive;
    rr.outcomes.push_back(std::move(o));
  }
  rr.overall = any_fail ? Verdict::fails : (any_inconclusive ? Verdict::inconclusive : Verdict::holds);
  rr.exit_code = any_fail ? 1 : (any_inconclusive ? 2 : 0);
  return rr;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline ojson json_vector(const std::vector<double>& v) {
  if (v.size() == 1) return json_number(v[0]);
  ojson a = ojson::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

inline ojson defaults_json() {
  const ConditionSettings cs;
  const GeometrySettings gs;
  const GConvexSettings gc;
  const SolverSettings sv;
  const FdSteps fd;
  ojson d;
  d["version"] = 1;
  d["solver"] = {{"newton_tol", sv.newton_tol}, {"max_iter", sv.max_iter}, {"max_halvings", sv.max_halvings}};
  d["fd"] = {{"first", fd.first}, {"second", fd.second}};
  d["conditions"] = {{"theta_m", cs.theta_m},   {"conv_tol", cs.conv_tol_rel},   {"a3s_tol", cs.a3s_tol},
                     {"a2_tol", cs.a2_tol},     {"coll_tol", cs.coll_tol},       {"xi_count", cs.xi_count},
                     {"max_fail_fraction", cs.max_fail_fraction}, {"region_scale", cs.region_scale},
                     {"min_segment_dp", cs.min_segment_dp}};
  d["geometry"] = {{"radius_rel", gs.radius_rel},         {"section_points", gs.section_points},
                   {"mp_points", gs.mp_points},           {"mp_tol", gs.mp_tol_rel},
                   {"ff_tol", gs.ff_tol},                 {"allowance_factor", gs.allowance_factor},
                   {"delta0_floor_factor", gs.delta0_floor_factor}};
  d["gconvex"] = {{"attain_tol", gc.attain_tol},   {"support_tol", gc.support_tol_abs}, {"lip_factor", gc.lip_factor},
                  {"kink_factor", gc.kink_factor}, {"r_loc_factor", gc.r_loc_factor},   {"hypothesis_samples", gc.hypothesis_samples}};
  return d;
}

}  // namespace detail

inline nlohmann::ordered_json config_json(const ScenarioConfig& c) {
  detail::ojson j;
  detail::ojson params = detail::ojson::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  j["generating_function"] = {{"id", c.gf_id}, {"params", params}};
  j["checks"] = c.checks;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["segments"] = c.segments;
  j["grids"] = {{"theta_m", c.theta_m}, {"x_grid", c.x_grid}, {"y_grid", c.y_grid}, {"radius", c.radius}};
  detail::ojson tol = detail::ojson::object();
  for (const auto& [k, v] : c.tolerances) tol[k] = v;
  j["tolerances"] = tol;
  j["output_dir"] = c.output_dir;
  return j;
}

inline nlohmann::ordered_json report_json(const ConditionReport& r, const std::optional<std::string>& error = {}) {
  detail::ojson j;
  j["id"] = r.condition_id;
  j["verdict"] = std::string(to_string(r.verdict));
  j["margin"] = detail::json_number(r.margin);
  j["vacuous"] = r.vacuous;
  j["samples_used"] = r.samples_used;
  j["seed"] = r.seed;
  detail::ojson extras = detail::ojson::object();
  for (const auto& [k, v] : r.extras) extras[k] = detail::json_number(v);
  j["extras"] = extras;
  if (r.witness) {
    detail::ojson w = detail::ojson::object();
    for (const auto& [k, v] : r.witness->fields) w[k] = detail::json_vector(v);
    j["witness"] = w;
  } else {
    j["witness"] = nullptr;
  }
  j["notes"] = r.notes;
  if (error) j["error"] = *error;
  return j;
}

/// The report without timing, so identical configs give identical bytes.
inline std::string report_json_text(const RunReport& rr) {
  detail::ojson j;
  j["config"] = config_json(rr.config);
  j["defaults"] = detail::defaults_json();
  detail::ojson checks = detail::ojson::array();
  for (const auto& o : rr.outcomes) checks.push_back(report_json(o.report, o.error));
  j["checks"] = checks;
  j["overall"] = std::string(to_string(rr.overall));
  j["exit_code"] = rr.exit_code;
  return j.dump(2) + "\n";
}

inline std::string witness_cell(const ConditionReport& r) {
  if (!r.witness) return "";
  std::string s;
  for (const auto& [k, v] : r.witness->fields) {
    if (!s.empty()) s += ';';
    s += k + '=';
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt17(v[i]);
  }
  return s;
}

/// Writes report.json, margins.csv and timing.csv into output_dir.
inline void emit_report(const RunReport& rr, const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create '" + output_dir + "': " + ec.message());
  const fs::path dir(output_dir);
  {
    auto f = detail::open_out((dir / "report.json").string());
    f << report_json_text(rr);
    if (!f) throw Error(ErrorKind::IOError, "write failed: report.json");
  }
  {
    auto f = detail::open_out((dir / "margins.csv").string());
    f << "check_id,margin,verdict,samples_used,witness\n";
    for (const auto& o : rr.outcomes)
      f << o.report.condition_id << ',' << fmt17(o.report.margin) << ',' << to_string(o.report.verdict) << ','
        << o.report.samples_used << ",\"" << witness_cell(o.report) << "\"\n";
  }
  {
    auto f = detail::open_out((dir / "timing.csv").string());
    f << "check_id,seconds\n";
    for (const auto& o : rr.outcomes) f << o.report.condition_id << ',' << fmt17(o.seconds) << '\n';
  }
}

}  // namespace genfun
