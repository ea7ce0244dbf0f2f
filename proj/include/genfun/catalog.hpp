#pragma once

// Built-in generating functions and the registry of user-supplied ones.

#include "genfun/core.hpp"

#include <mutex>
#include <vector>

namespace genfun {

/// Expected verdict of one condition for a catalog entry, with the way the
/// expectation was established: "closed-form" (follows from algebra on the
/// formula), "numerical-oracle" (established by an independent numerical
/// scan) or "empirical" (measured by this library; not asserted).
struct KnownProperty {
  std::string condition;
  std::string expected;
  std::string provenance;
};

using Params = std::map<std::string, double>;
using Builder = std::function<GeneratingFunction(const Params&)>;

struct CatalogEntry {
  std::string id;
  std::string description;
  Params defaults;
  Builder builder;
  std::vector<KnownProperty> known_properties;

  GeneratingFunction build(const Params& overrides = {}) const {
    Params p = defaults;
    for (const auto& [k, v] : overrides) {
      if (!p.count(k)) throw Error(ErrorKind::ConfigError, "unknown parameter '" + k + "' for " + id);
      p[k] = v;
    }
    return builder(p);
  }
};

namespace detail {

inline int param_dim(const Params& p) {
  const double n = p.at("n");
  if (!(n >= 1 && n <= 8 && n == std::floor(n))) throw Error(ErrorKind::ConfigError, "parameter n must be an integer in [1, 8]");
  return static_cast<int>(n);
}

inline Box cube_at(int n, double first_coord, double half) {
  Vec c = Vec::Zero(n);
  c[0] = first_coord;
  return Box::cube(c, half);
}

// Removes analytic partials when the entry is built with analytic = 0.
inline void apply_analytic_flag(GeneratingFunction& gf, const Params& p) {
  if (p.at("analytic") == 0.0) gf.partials = Partials{};
}

// Boxes for costs that are singular on the diagonal: x near the origin and
// y near (2, 0, ..., 0). Pairs are admitted when |x - y| >= r0 with r0 the
// center distance minus both half-diagonals.
inline void separated_layout(Gamma& gamma, int n) {
  gamma.x_box = cube_at(n, 0.0, 0.5);
  gamma.y_box = cube_at(n, 2.0, 0.5);
  const double r0 = 2.0 - gamma.x_box.radius() - gamma.y_box.radius();
  if (!(r0 > 0)) throw Error(ErrorKind::ConfigError, "separated layout needs n <= 15");
  gamma.pair_ok = [r0](const Vec& x, const Vec& y) { return (x - y).norm() >= r0; };
}

inline GeneratingFunction make_ot_quad(const Params& p) {
  const int n = param_dim(p);
  GeneratingFunction gf;
  gf.dim = n;
  gf.name = "ot_quad";
  gf.params = p;
  gf.eval = [](const Vec& x, const Vec& y, double z) { return -0.5 * (x - y).squaredNorm() - z; };
  gf.partials.first = [](const Vec& x, const Vec& y, double z) {
    const Vec r = x - y;
    return FirstOrder{-0.5 * r.squaredNorm() - z, -r, r, -1.0};
  };
  gf.partials.gx = [](const Vec& x, const Vec& y, double) -> Vec { return y - x; };
  gf.partials.gy = [](const Vec& x, const Vec& y, double) -> Vec { return x - y; };
  gf.partials.gz = [](const Vec&, const Vec&, double) { return -1.0; };
  gf.partials.gxx = [n](const Vec&, const Vec&, double) -> Mat { return -Mat::Identity(n, n); };
  gf.partials.gxy = [n](const Vec&, const Vec&, double) -> Mat { return Mat::Identity(n, n); };
  gf.partials.gxz = [n](const Vec&, const Vec&, double) -> Vec { return Vec::Zero(n); };
  gf.gamma.x_box = Box::cube(Vec::Zero(n), 2.0);
  gf.gamma.y_box = Box::cube(Vec::Zero(n), 2.0);
  gf.gamma.z_interval = [](const Vec&, const Vec&) { return Interval{-10.0, 10.0}; };
  apply_analytic_flag(gf, p);
  return gf;
}

inline GeneratingFunction make_ot_log(const Params& p) {
  const int n = param_dim(p);
  GeneratingFunction gf;
  gf.dim = n;
  gf.name = "ot_log";
  gf.params = p;
  gf.eval = [](const Vec& x, const Vec& y, double z) { return 0.5 * std::log((x - y).squaredNorm()) - z; };
  gf.partials.first = [](const Vec& x, const Vec& y, double z) {
    const Vec r = x - y;
    const double d2 = r.squaredNorm();
    return FirstOrder{0.5 * std::log(d2) - z, r / d2, -r / d2, -1.0};
  };
  gf.partials.gx = [](const Vec& x, const Vec& y, double) -> Vec {
    const Vec r = x - y;
    return r / r.squaredNorm();
  };
  gf.partials.gy = [](const Vec& x, const Vec& y, double) -> Vec {
    const Vec r = x - y;
    return -r / r.squaredNorm();
  };
  gf.partials.gz = [](const Vec&, const Vec&, double) { return -1.0; };
  gf.partials.gxx = [n](const Vec& x, const Vec& y, double) -> Mat {
    const Vec r = x - y;
    const double d2 = r.squaredNorm();
    return Mat::Identity(n, n) / d2 - 2.0 * r * r.transpose() / (d2 * d2);
  };
  gf.partials.gxy = [n](const Vec& x, const Vec& y, double) -> Mat {
    const Vec r = x - y;
    const double d2 = r.squaredNorm();
    return -(Mat::Identity(n, n) / d2 - 2.0 * r * r.transpose() / (d2 * d2));
  };
  gf.partials.gxz = [n](const Vec&, const Vec&, double) -> Vec { return Vec::Zero(n); };
  separated_layout(gf.gamma, n);
  gf.gamma.z_interval = [](const Vec&, const Vec&) { return Interval{-10.0, 10.0}; };
  apply_analytic_flag(gf, p);
  return gf;
}

inline GeneratingFunction make_ot_power(const Params& p) {
  const int n = param_dim(p);
  const double e = p.at("p");
  if (!(e > 1.0)) throw Error(ErrorKind::ConfigError, "ot_power needs p > 1");
  GeneratingFunction gf;
  gf.dim = n;
  gf.name = "ot_power";
  gf.params = p;
  gf.eval = [e](const Vec& x, const Vec& y, double z) { return -std::pow((x - y).norm(), e) / e - z; };
  auto grad = [e](const Vec& r) -> Vec { return std::pow(r.norm(), e - 2.0) * r; };
  gf.partials.first = [e, grad](const Vec& x, const Vec& y, double z) {
    const Vec r = x - y;
    const Vec dc = grad(r);
    return FirstOrder{-std::pow(r.norm(), e) / e - z, -dc, dc, -1.0};
  };
  gf.partials.gx = [grad](const Vec& x, const Vec& y, double) -> Vec { return -grad(x - y); };
  gf.partials.gy = [grad](const Vec& x, const Vec& y, double) -> Vec { return grad(x - y); };
  gf.partials.gz = [](const Vec&, const Vec&, double) { return -1.0; };
  auto hess = [e, n](const Vec& r) -> Mat {
    const double d = r.norm();
    return std::pow(d, e - 2.0) * Mat::Identity(n, n) + (e - 2.0) * std::pow(d, e - 4.0) * r * r.transpose();
  };
  gf.partials.gxx = [hess](const Vec& x, const Vec& y, double) -> Mat { return -hess(x - y); };
  gf.partials.gxy = [hess](const Vec& x, const Vec& y, double) -> Mat { return hess(x - y); };
  gf.partials.gxz = [n](const Vec&, const Vec&, double) -> Vec { return Vec::Zero(n); };
  separated_layout(gf.gamma, n);
  gf.gamma.z_interval = [](const Vec&, const Vec&) { return Interval{-10.0, 10.0}; };
  apply_analytic_flag(gf, p);
  return gf;
}

inline GeneratingFunction make_synthetic_z(const Params& p) {
  const int n = param_dim(p);
  const double eps = p.at("eps");
  if (!(eps > 0.0 && eps <= 0.25)) throw Error(ErrorKind::ConfigError, "synthetic_z needs eps in (0, 1/4]");
  GeneratingFunction gf;
  gf.dim = n;
  gf.name = "synthetic_z";
  gf.params = p;
  gf.eval = [eps](const Vec& x, const Vec& y, double z) {
    const double c = 0.5 * (x - y).squaredNorm();
    return -c * (1.0 + eps * z) - z;
  };
  gf.partials.first = [eps](const Vec& x, const Vec& y, double z) {
    const Vec r = x - y;
    const double c = 0.5 * r.squaredNorm();
    const double s = 1.0 + eps * z;
    return FirstOrder{-c * s - z, -s * r, s * r, -(1.0 + eps * c)};
  };
  gf.partials.gx = [eps](const Vec& x, const Vec& y, double z) -> Vec { return -(1.0 + eps * z) * (x - y); };
  gf.partials.gy = [eps](const Vec& x, const Vec& y, double z) -> Vec { return (1.0 + eps * z) * (x - y); };
  gf.partials.gz = [eps](const Vec& x, const Vec& y, double) { return -(1.0 + 0.5 * eps * (x - y).squaredNorm()); };
  gf.partials.gxx = [eps, n](const Vec&, const Vec&, double z) -> Mat { return -(1.0 + eps * z) * Mat::Identity(n, n); };
  gf.partials.gxy = [eps, n](const Vec&, const Vec&, double z) -> Mat { return (1.0 + eps * z) * Mat::Identity(n, n); };
  gf.partials.gxz = [eps](const Vec& x, const Vec& y, double) -> Vec { return -eps * (x - y); };
  gf.gamma.x_box = Box::cube(Vec::Zero(n), 1.0);
  gf.gamma.y_box = Box::cube(Vec::Zero(n), 1.0);
  gf.gamma.z_interval = [](const Vec&, const Vec&) { return Interval{-1.0, 1.0}; };
  apply_analytic_flag(gf, p);
  return gf;
}

inline std::vector<CatalogEntry> builtin_entries() {
  const Params base{{"n", 2.0}, {"analytic", 1.0}};
  auto with = [&](std::initializer_list<std::pair<const std::string, double>> extra) {
    Params p = base;
    for (const auto& kv : extra) p.insert(kv);
    return p;
  };
  std::vector<CatalogEntry> out;
  out.push_back({"ot_quad",
                 "quadratic transport cost: g = -|x-y|^2/2 - z on [-2,2]^n x [-2,2]^n x (-10,10)",
                 base,
                 make_ot_quad,
                 {{"A1", "holds", "closed-form"},
                  {"A1*", "holds", "closed-form"},
                  {"A2", "holds", "closed-form"},
                  {"A3w", "holds", "closed-form"},
                  {"A3s", "fails", "closed-form"}}});
  out.push_back({"ot_log",
                 "logarithmic cost: g = log|x-y| - z on separated boxes (|x-y| >= r0 > 0)",
                 base,
                 make_ot_log,
                 {{"A1", "holds", "closed-form"},
                  {"A1*", "holds", "closed-form"},
                  {"A2", "holds", "closed-form"},
                  {"A3w", "holds", "numerical-oracle"},
                  {"A3s", "holds", "numerical-oracle"}}});
  out.push_back({"ot_power",
                 "power cost: g = -|x-y|^p/p - z on separated boxes (|x-y| >= r0 > 0)",
                 with({{"p", 4.0}}),
                 make_ot_power,
                 {{"A2", "holds", "closed-form"},
                  {"A3w", "fails", "numerical-oracle"},
                  {"A3s", "fails", "numerical-oracle"}}});
  out.push_back({"synthetic_z",
                 "z-dependent cost: g = -c(x,y)(1 + eps z) - z, c = |x-y|^2/2, on [-1,1]^n x [-1,1]^n x (-1,1)",
                 with({{"eps", 0.1}}),
                 make_synthetic_z,
                 {{"A2", "holds", "closed-form"},
                  {"A3w", "holds", "empirical"},
                  {"A3s", "holds", "empirical"}}});
  return out;
}

inline std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

inline std::vector<CatalogEntry>& plugin_entries() {
  static std::vector<CatalogEntry> v;
  return v;
}

}  // namespace detail

/// Built-in entries followed by registered plugins, in registration order.
inline std::vector<CatalogEntry> list_catalog() {
  std::vector<CatalogEntry> out = detail::builtin_entries();
  std::lock_guard lock(detail::registry_mutex());
  for (const auto& e : detail::plugin_entries()) out.push_back(e);
  return out;
}

/// Adds a user generating function under a new id; the CLI can then
/// reference it from a config.
inline void register_plugin(CatalogEntry entry) {
  for (const auto& e : detail::builtin_entries())
    if (e.id == entry.id) throw Error(ErrorKind::ConfigError, "plugin id collides with built-in '" + entry.id + "'");
  std::lock_guard lock(detail::registry_mutex());
  for (const auto& e : detail::plugin_entries())
    if (e.id == entry.id) throw Error(ErrorKind::ConfigError, "plugin id already registered: " + entry.id);
  detail::plugin_entries().push_back(std::move(entry));
}

inline CatalogEntry find_entry(const std::string& id) {
  for (auto& e : list_catalog())
    if (e.id == id) return e;
  throw Error(ErrorKind::ConfigError, "unknown generating function id '" + id + "'");
}

inline GeneratingFunction build(const std::string& id, const Params& overrides = {}) {
  return find_entry(id).build(overrides);
}

}  // namespace genfun
