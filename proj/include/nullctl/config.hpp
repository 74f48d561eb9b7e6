#pragma once

// Run configuration: flat "section.key = value" text, presets, and command-line overrides.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullctl/weights.hpp"

namespace nullctl {

struct RunConfig {
  std::string scenario = "heat";  // heat | stokes | navier_stokes
  std::string preset;

  // geometry
  double L1 = 1, L2 = 1, T = 1;
  Rect omega{0.2, 0.6, 0.2, 0.6};
  // mesh
  int nx = 10, ny = 10, nt = 20;
  bool snap_omega = true;  // move omega to the nearest grid lines when it is not aligned
  // degrees
  int m = 2, n = 2;
  // weights
  double K1 = 1, K2 = 2;
  std::optional<Vec2> anchor;  // default: center of omega
  // physics
  double G = 1;
  std::vector<double> y0{1000.0};  // heat: one value; flows: two components
  double y0_scale = 1;
  double nu = 1;
  std::string trajectory = "zero";
  std::string psi = "unit_box";
  double M = 0.1;
  // solver
  std::string method = "ah";  // ah | direct
  double r = 0.01, s = 0.1, tol = 1e-5;
  int max_iter = 500;
  std::string precond = "none";  // none | augmented
  double gamma = 1.0;
  bool fallback = true;  // direct solve when the iteration stops unconverged
  double outer_tol = 1e-4;
  int outer_max = 60;
  // forward verification
  int fwd_nx = 32, fwd_ny = 32, fwd_nt = 200;
  // run
  int jobs = 1;
  std::string out = "out";
  bool vtk = true;

  Vec2 anchor_point() const { return anchor ? *anchor : Vec2(0.5 * (omega.x0 + omega.x1), 0.5 * (omega.y0 + omega.y1)); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n"), b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  // Accept multiples of pi: "pi", "2pi/3", "pi/3".
  auto p = t.find("pi");
  if (p != std::string::npos) {
    double num = 1, den = 1;
    std::string pre = trim(t.substr(0, p)), post = trim(t.substr(p + 2));
    if (!pre.empty()) {
      if (pre.back() == '*') pre.pop_back();
      num = parse_double(key, pre);
    }
    if (!post.empty()) {
      if (post[0] != '/') throw std::invalid_argument("config: bad value for " + key + ": '" + v + "'");
      den = parse_double(key, post.substr(1));
    }
    return num * std::numbers::pi / den;
  }
  double d = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), d);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return d;
}

inline int parse_int(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  int i = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), i);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty())
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  return i;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  return out;
}

inline std::string fmt(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

}  // namespace detail

// Sets one key; throws std::invalid_argument for unknown keys or malformed values.
inline void set_key(RunConfig& c, const std::string& key_in, const std::string& value) {
  using namespace detail;
  std::string key = trim(key_in), v = trim(value);
  if (key == "scenario") {
    if (v != "heat" && v != "stokes" && v != "navier_stokes")
      throw std::invalid_argument("config: scenario must be heat, stokes or navier_stokes");
    c.scenario = v;
  } else if (key == "geometry.L1") c.L1 = parse_double(key, v);
  else if (key == "geometry.L2") c.L2 = parse_double(key, v);
  else if (key == "geometry.T") c.T = parse_double(key, v);
  else if (key == "geometry.omega") {
    auto l = parse_list(key, v);
    if (l.size() != 4) throw std::invalid_argument("config: geometry.omega needs x0, x1, y0, y1");
    c.omega = Rect{l[0], l[1], l[2], l[3]};
  } else if (key == "mesh.nx") c.nx = parse_int(key, v);
  else if (key == "mesh.ny") c.ny = parse_int(key, v);
  else if (key == "mesh.nt") c.nt = parse_int(key, v);
  else if (key == "mesh.snap_omega") c.snap_omega = parse_bool(key, v);
  else if (key == "degrees.m") c.m = parse_int(key, v);
  else if (key == "degrees.n") c.n = parse_int(key, v);
  else if (key == "weights.K1") c.K1 = parse_double(key, v);
  else if (key == "weights.K2") c.K2 = parse_double(key, v);
  else if (key == "weights.anchor") {
    if (v == "center") {
      c.anchor.reset();
    } else {
      auto l = parse_list(key, v);
      if (l.size() != 2) throw std::invalid_argument("config: weights.anchor needs a, b or 'center'");
      c.anchor = Vec2(l[0], l[1]);
    }
  } else if (key == "physics.G") c.G = parse_double(key, v);
  else if (key == "physics.y0") c.y0 = parse_list(key, v);
  else if (key == "physics.y0_scale") c.y0_scale = parse_double(key, v);
  else if (key == "physics.nu") c.nu = parse_double(key, v);
  else if (key == "physics.trajectory") c.trajectory = v;
  else if (key == "physics.psi") c.psi = v;
  else if (key == "physics.M") c.M = parse_double(key, v);
  else if (key == "solver.method") c.method = v;
  else if (key == "solver.r") c.r = parse_double(key, v);
  else if (key == "solver.s") c.s = parse_double(key, v);
  else if (key == "solver.tol") c.tol = parse_double(key, v);
  else if (key == "solver.max_iter") c.max_iter = parse_int(key, v);
  else if (key == "solver.precond") c.precond = v;
  else if (key == "solver.gamma") c.gamma = parse_double(key, v);
  else if (key == "solver.fallback") c.fallback = parse_bool(key, v);
  else if (key == "solver.outer_tol") c.outer_tol = parse_double(key, v);
  else if (key == "solver.outer_max") c.outer_max = parse_int(key, v);
  else if (key == "forward.nx") c.fwd_nx = parse_int(key, v);
  else if (key == "forward.ny") c.fwd_ny = parse_int(key, v);
  else if (key == "forward.nt") c.fwd_nt = parse_int(key, v);
  else if (key == "run.jobs") c.jobs = parse_int(key, v);
  else if (key == "output.dir") c.out = v;
  else if (key == "output.vtk") c.vtk = parse_bool(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline std::vector<std::string> preset_names() { return {"heat-sec26", "stokes-sec37", "ns-poiseuille", "ns-taylor-green"}; }

inline std::optional<RunConfig> preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "heat-sec26") {
    c.scenario = "heat";
    c.omega = Rect{0.2, 0.6, 0.2, 0.6};
    c.anchor = Vec2(0.5, 0.5);
    c.G = 1;
    c.y0 = {1000.0};
    c.nx = c.ny = 10;
    c.nt = 20;
    return c;
  }
  if (name == "stokes-sec37") {
    c.scenario = "stokes";
    c.omega = Rect{0.2, 0.6, 0.2, 0.6};
    c.anchor = Vec2(0.5, 0.5);
    c.nu = 1;
    c.y0 = {1000.0, 0.0};
    c.nx = c.ny = 10;
    c.nt = 20;
    c.fwd_nt = 100;
    return c;
  }
  if (name == "ns-poiseuille") {
    c.scenario = "navier_stokes";
    c.L1 = 5;
    c.L2 = 1;
    c.T = 2;
    c.omega = Rect{1, 2, 0, 1};
    c.anchor = Vec2(1.5, 0.5);
    c.nu = 1;
    c.trajectory = "poiseuille";
    c.psi = "unit_box";
    c.M = 0.1;
    c.nx = 20;
    c.ny = 4;
    c.nt = 16;
    c.fwd_nx = 50;
    c.fwd_ny = 10;
    c.fwd_nt = 100;
    return c;
  }
  if (name == "ns-taylor-green") {
    c.scenario = "navier_stokes";
    c.L1 = c.L2 = std::numbers::pi;
    c.T = 1;
    c.omega = Rect{std::numbers::pi / 3, 2 * std::numbers::pi / 3, std::numbers::pi / 3, 2 * std::numbers::pi / 3};
    c.anchor.reset();
    c.nu = 1;
    c.trajectory = "taylor_green";
    c.psi = "pi_box";
    c.M = 0.1;
    c.nx = c.ny = 6;
    c.nt = 10;
    c.fwd_nt = 100;
    return c;
  }
  return std::nullopt;
}

inline void parse_config_text(RunConfig& c, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    if (key == "preset") {
      auto p = preset(detail::trim(line.substr(eq + 1)));
      if (!p) throw std::invalid_argument("config: unknown preset '" + detail::trim(line.substr(eq + 1)) + "'");
      c = *p;
      continue;
    }
    set_key(c, key, line.substr(eq + 1));
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig c;
  parse_config_text(c, ss.str());
  return c;
}

// Snaps omega outward to the grid when allowed, so it never shrinks; returns true if it moved.
inline bool snap_omega_to_grid(RunConfig& c) {
  double hx = c.L1 / c.nx, hy = c.L2 / c.ny;
  auto down = [](double v, double h) { return std::floor(v / h + 1e-9) * h; };
  auto up = [](double v, double h) { return std::ceil(v / h - 1e-9) * h; };
  auto on = [](double v, double h) { double q = v / h; return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q)); };
  if (on(c.omega.x0, hx) && on(c.omega.x1, hx) && on(c.omega.y0, hy) && on(c.omega.y1, hy)) return false;
  if (!c.snap_omega) return false;
  Rect s{down(c.omega.x0, hx), up(c.omega.x1, hx), down(c.omega.y0, hy), up(c.omega.y1, hy)};
  if (!(s.x1 > s.x0) || !(s.y1 > s.y0)) throw std::invalid_argument("config: control region has no area");
  c.omega = s;
  return true;
}

// Checks module preconditions; throws std::invalid_argument with a one-line reason.
inline void validate(const RunConfig& c) {
  auto req = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  req(c.scenario == "heat" || c.scenario == "stokes" || c.scenario == "navier_stokes", "unknown scenario");
  req(c.L1 > 0 && c.L2 > 0 && c.T > 0, "geometry.L1, L2, T must be positive");
  req(c.nx >= 1 && c.ny >= 1 && c.nt >= 1, "mesh counts must be >= 1");
  req(c.m >= 1 && c.n >= 1, "degrees must be >= 1");
  req(c.omega.x1 > c.omega.x0 && c.omega.y1 > c.omega.y0, "omega must have positive area");
  req(c.omega.x0 >= 0 && c.omega.x1 <= c.L1 * (1 + 1e-12) && c.omega.y0 >= 0 && c.omega.y1 <= c.L2 * (1 + 1e-12),
      "omega must lie inside the domain");
  Vec2 a = c.anchor_point();
  req(c.omega.strictly_contains(a), "weights.anchor must lie inside omega");
  req(c.K1 > 0 && c.K2 > 0, "weights.K1 and K2 must be positive");
  if (c.scenario == "heat") req(c.y0.size() == 1, "physics.y0 needs one value");
  if (c.scenario == "stokes") req(c.y0.size() == 2, "physics.y0 needs two components");
  req(std::isfinite(c.y0_scale), "physics.y0_scale must be finite");
  req(c.nu > 0, "physics.nu must be positive");
  req(c.trajectory == "zero" || c.trajectory == "poiseuille" || c.trajectory == "taylor_green",
      "physics.trajectory must be zero, poiseuille or taylor_green");
  req(c.scenario != "navier_stokes" || c.trajectory != "zero", "navier_stokes needs a poiseuille or taylor_green trajectory");
  req(c.psi == "unit_box" || c.psi == "pi_box", "physics.psi must be unit_box or pi_box");
  req(c.method == "ah" || c.method == "direct", "solver.method must be ah or direct");
  req(c.precond == "none" || c.precond == "augmented", "solver.precond must be none or augmented");
  req(c.r > 0 && c.s > 0 && c.tol > 0 && c.max_iter >= 1, "solver.r, s, tol must be positive and max_iter >= 1");
  req(c.gamma >= 0, "solver.gamma must be nonnegative");
  req(c.outer_tol > 0 && c.outer_max >= 1, "solver.outer_tol must be positive and outer_max >= 1");
  req(c.fwd_nx >= 1 && c.fwd_ny >= 1 && c.fwd_nt >= 1, "forward counts must be >= 1");
  req(c.jobs >= 1, "run.jobs must be >= 1");
  req(!c.out.empty(), "output.dir must be set");
}

inline std::string resolved_text(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream os;
  os << "# effective configuration\n";
  if (!c.preset.empty()) os << "# preset: " << c.preset << "\n";
  os << "scenario = " << c.scenario << "\n";
  os << "geometry.L1 = " << fmt(c.L1) << "\n";
  os << "geometry.L2 = " << fmt(c.L2) << "\n";
  os << "geometry.T = " << fmt(c.T) << "\n";
  os << "geometry.omega = " << detail::fmt_list({c.omega.x0, c.omega.x1, c.omega.y0, c.omega.y1}) << "\n";
  os << "mesh.nx = " << c.nx << "\n";
  os << "mesh.ny = " << c.ny << "\n";
  os << "mesh.nt = " << c.nt << "\n";
  os << "mesh.snap_omega = " << (c.snap_omega ? "true" : "false") << "\n";
  os << "degrees.m = " << c.m << "\n";
  os << "degrees.n = " << c.n << "\n";
  os << "weights.K1 = " << fmt(c.K1) << "\n";
  os << "weights.K2 = " << fmt(c.K2) << "\n";
  Vec2 a = c.anchor_point();
  os << "weights.anchor = " << detail::fmt_list({a.x(), a.y()}) << "\n";
  os << "physics.G = " << fmt(c.G) << "\n";
  os << "physics.y0 = " << detail::fmt_list(c.y0) << "\n";
  os << "physics.y0_scale = " << fmt(c.y0_scale) << "\n";
  os << "physics.nu = " << fmt(c.nu) << "\n";
  os << "physics.trajectory = " << c.trajectory << "\n";
  os << "physics.psi = " << c.psi << "\n";
  os << "physics.M = " << fmt(c.M) << "\n";
  os << "solver.method = " << c.method << "\n";
  os << "solver.r = " << fmt(c.r) << "\n";
  os << "solver.s = " << fmt(c.s) << "\n";
  os << "solver.tol = " << fmt(c.tol) << "\n";
  os << "solver.max_iter = " << c.max_iter << "\n";
  os << "solver.precond = " << c.precond << "\n";
  os << "solver.gamma = " << fmt(c.gamma) << "\n";
  os << "solver.fallback = " << (c.fallback ? "true" : "false") << "\n";
  os << "solver.outer_tol = " << fmt(c.outer_tol) << "\n";
  os << "solver.outer_max = " << c.outer_max << "\n";
  os << "forward.nx = " << c.fwd_nx << "\n";
  os << "forward.ny = " << c.fwd_ny << "\n";
  os << "forward.nt = " << c.fwd_nt << "\n";
  os << "output.dir = " << c.out << "\n";
  os << "output.vtk = " << (c.vtk ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace nullctl
