#pragma once

// CSV files: sampled functions, sections and g* tables. Numbers are written
// with 17 significant digits so they read back to the same double.

#include "genfun/error.hpp"
#include "genfun/gconvex.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace genfun {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string join17(const Vec& v, char sep) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt17(v[i]);
  }
  return s;
}

inline std::string coord_header(const std::string& prefix, int n) {
  std::string s;
  for (int i = 1; i <= n; ++i) s += (i > 1 ? "," : "") + prefix + std::to_string(i);
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::IOError, "cannot parse number '" + s + "' in " + what);
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IOError, "cannot open '" + path + "' for writing");
  return f;
}

}  // namespace detail

// Layout:
//   # n: 2
//   # box_lo: -1 -1
//   # box_hi: 1 1
//   # counts: 65 65
//   # spacing: 0.03125 0.03125
//   x1,x2,value,active
//   one row per node in grid index order
inline void write_sampled_function(std::ostream& os, const SampledFunction& u) {
  const Grid& g = u.grid;
  const int n = g.dim();
  os << "# n: " << n << "\n";
  os << "# box_lo: " << detail::join17(g.box.lo, ' ') << "\n";
  os << "# box_hi: " << detail::join17(g.box.hi, ' ') << "\n";
  os << "# counts:";
  for (int c : g.counts) os << ' ' << c;
  os << "\n# spacing:";
  for (int a = 0; a < n; ++a) os << ' ' << fmt17(g.spacing(a));
  os << "\n" << detail::coord_header("x", n) << ",value,active\n";
  for (long i = 0; i < g.size(); ++i)
    os << detail::join17(g.node(i), ',') << ',' << fmt17(u[i]) << ',' << (u.is_active(i) ? 1 : 0) << '\n';
}

inline void write_sampled_function(const std::string& path, const SampledFunction& u) {
  auto f = detail::open_out(path);
  write_sampled_function(f, u);
  if (!f) throw Error(ErrorKind::IOError, "write failed: " + path);
}

inline SampledFunction read_sampled_function(std::istream& is, const std::string& what = "input") {
  std::map<std::string, std::vector<double>> header;
  std::string line;
  std::vector<std::string> columns;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] != '#') {
      columns = detail::split(line, ',');
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(1, colon - 1);
    key.erase(0, key.find_first_not_of(' '));
    key.erase(key.find_last_not_of(' ') + 1);
    std::stringstream vs(line.substr(colon + 1));
    std::string tok;
    while (vs >> tok) header[key].push_back(detail::parse_double(tok, what));
  }
  for (const char* k : {"n", "box_lo", "box_hi", "counts"})
    if (!header.count(k)) throw Error(ErrorKind::IOError, what + ": missing header field '" + k + "'");
  const int n = static_cast<int>(header["n"].at(0));
  if (n < 1 || header["box_lo"].size() != static_cast<std::size_t>(n) ||
      header["box_hi"].size() != static_cast<std::size_t>(n) || header["counts"].size() != static_cast<std::size_t>(n))
    throw Error(ErrorKind::IOError, what + ": inconsistent header dimensions");
  if (columns.size() < static_cast<std::size_t>(n + 1)) throw Error(ErrorKind::IOError, what + ": missing column header");
  const bool has_active = columns.size() >= static_cast<std::size_t>(n + 2) && columns[n + 1] == "active";

  Vec lo = Eigen::Map<const Vec>(header["box_lo"].data(), n);
  Vec hi = Eigen::Map<const Vec>(header["box_hi"].data(), n);
  std::vector<int> counts;
  for (double c : header["counts"]) {
    if (c < 2 || c != std::floor(c)) throw Error(ErrorKind::IOError, what + ": counts must be integers >= 2");
    counts.push_back(static_cast<int>(c));
  }
  SampledFunction u{Grid{Box(lo, hi), counts}, {}, {}};
  const long N = u.grid.size();
  u.values.reserve(static_cast<std::size_t>(N));
  std::vector<std::uint8_t> active;
  const double tol = 1e-9 * std::max(1.0, u.grid.box.diameter());
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() < static_cast<std::size_t>(n + 1)) throw Error(ErrorKind::IOError, what + ": short row");
    const long idx = static_cast<long>(u.values.size());
    if (idx >= N) throw Error(ErrorKind::IOError, what + ": more rows than grid nodes");
    const Vec node = u.grid.node(idx);
    for (int a = 0; a < n; ++a)
      if (std::abs(detail::parse_double(cells[a], what) - node[a]) > tol)
        throw Error(ErrorKind::IOError, what + ": row " + std::to_string(idx) + " is not at grid node");
    const double v = detail::parse_double(cells[n], what);
    if (!std::isfinite(v)) throw Error(ErrorKind::IOError, what + ": non-finite value");
    u.values.push_back(v);
    if (has_active) active.push_back(detail::parse_double(cells[n + 1], what) != 0.0);
  }
  if (static_cast<long>(u.values.size()) != N)
    throw Error(ErrorKind::IOError, what + ": expected " + std::to_string(N) + " rows, got " + std::to_string(u.values.size()));
  if (has_active && std::find(active.begin(), active.end(), 0) != active.end()) u.active = std::move(active);
  return u;
}

inline SampledFunction read_sampled_function(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IOError, "cannot open '" + path + "'");
  return read_sampled_function(f, path);
}

/// Columns: x1..xn, value (u - g0, empty where clipped), mask, valid.
inline void write_section(std::ostream& os, const SectionSample& s) {
  const int n = s.grid.dim();
  os << detail::coord_header("x", n) << ",value,mask,valid\n";
  for (long i = 0; i < s.grid.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << detail::join17(s.grid.node(i), ',') << ',' << (std::isfinite(s.values[k]) ? fmt17(s.values[k]) : "")
       << ',' << int(s.mask[k]) << ',' << (s.valid.empty() ? 1 : int(s.valid[k])) << '\n';
  }
}

inline void write_section(const std::string& path, const SectionSample& s) {
  auto f = detail::open_out(path);
  write_section(f, s);
}

/// One row of the g* table.
struct GstarRow {
  Vec x, y;
  double u = 0.0;
  double gstar = 0.0;
  Vec gstar_x, gstar_y;
  double gstar_u = 0.0;
};

/// Seeded (x, y, u) samples of the g* domain with g* and its first partials
/// from the identities g*_x = -g_x/g_z, g*_y = -g_y/g_z, g*_u = 1/g_z.
inline std::vector<GstarRow> sample_gstar_table(const GeneratingFunction& gf, int samples, std::uint64_t seed) {
  std::vector<GstarRow> rows(static_cast<std::size_t>(samples));
  parallel_for(rows.size(), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const FiberPoint fp = sample_gamma(gf, rng);
    const double u = gf.eval(fp.x, fp.y, fp.z);
    const double z = eval_gstar(gf, fp.x, fp.y, u, fp.z);
    const FirstOrder f = eval_first(gf, fp.x, fp.y, z);
    rows[i] = GstarRow{fp.x, fp.y, u, z, -f.gx / f.gz, -f.gy / f.gz, 1.0 / f.gz};
  });
  return rows;
}

inline void write_gstar_table(std::ostream& os, const std::vector<GstarRow>& rows, int n) {
  os << detail::coord_header("x", n) << ',' << detail::coord_header("y", n) << ",u,gstar,"
     << detail::coord_header("gstar_x", n) << ',' << detail::coord_header("gstar_y", n) << ",gstar_u\n";
  for (const auto& r : rows)
    os << detail::join17(r.x, ',') << ',' << detail::join17(r.y, ',') << ',' << fmt17(r.u) << ',' << fmt17(r.gstar)
       << ',' << detail::join17(r.gstar_x, ',') << ',' << detail::join17(r.gstar_y, ',') << ',' << fmt17(r.gstar_u)
       << '\n';
}

}  // namespace genfun
