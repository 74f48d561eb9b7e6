#pragma once

// Run artifacts: resolved config, CSV logs, summary and legacy VTK snapshots.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nullctl/pipeline.hpp"

namespace nullctl {

// Legacy ASCII unstructured grid of the spatial triangulation with one point field.
inline void write_vtk(std::ostream& os, const SpaceTimeMesh& M, const std::string& name, int comps,
                      const std::vector<double>& values, double t) {
  char buf[128];
  os << "# vtk DataFile Version 3.0\n";
  std::snprintf(buf, sizeof buf, "%s at t = %.8e\n", name.c_str(), t);
  os << buf << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << M.vertices.size() << " double\n";
  for (const auto& v : M.vertices) {
    std::snprintf(buf, sizeof buf, "%.10e %.10e 0\n", v.x(), v.y());
    os << buf;
  }
  os << "CELLS " << M.triangles.size() << " " << 4 * M.triangles.size() << "\n";
  for (const auto& t3 : M.triangles) os << "3 " << t3[0] << " " << t3[1] << " " << t3[2] << "\n";
  os << "CELL_TYPES " << M.triangles.size() << "\n";
  for (size_t i = 0; i < M.triangles.size(); ++i) os << "5\n";
  os << "POINT_DATA " << M.vertices.size() << "\n";
  if (comps == 1)
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  else
    os << "VECTORS " << name << " double\n";
  for (size_t i = 0; i < M.vertices.size(); ++i) {
    if (comps == 1)
      std::snprintf(buf, sizeof buf, "%.10e\n", values[i]);
    else
      std::snprintf(buf, sizeof buf, "%.10e %.10e 0\n", values[2 * i], values[2 * i + 1]);
    os << buf;
  }
}

struct RunReport {
  RunConfig config;  // effective configuration
  bool omega_snapped = false;
  ControlSolution solution;
  std::optional<FixedPointLog> fixed_point;
};

inline std::string summary_text(const RunReport& r) {
  const ControlSolution& cs = r.solution;
  std::ostringstream os;
  auto num = [&](const char* key, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s = %.8e\n", key, v);
    os << buf;
  };
  bool flow = cs.scenario != "heat";
  os << "scenario = " << cs.scenario << "\n";
  os << "omega_snapped = " << (r.omega_snapped ? "true" : "false") << "\n";
  os << "solver = " << cs.solver_used << "\n";
  os << "ah_converged = " << (cs.ah_converged ? "true" : "false") << "\n";
  os << "ah_iterations = " << cs.log.records.size() << "\n";
  os << "direct_inexact = " << (cs.log.inexact ? "true" : "false") << "\n";
  num("constraint_residual_ratio", cs.constraint_ratio);
  num("J", cs.J);
  const auto& ctl = flow ? cs.verification.deviation : cs.verification.state;
  const auto& unc = flow ? cs.uncontrolled.deviation : cs.uncontrolled.state;
  num(flow ? "initial_deviation_norm" : "y0_norm", cs.y0_norm);
  if (!ctl.empty()) {
    double f = ctl.back(), u = unc.back();
    num(flow ? "final_deviation_norm" : "final_state_norm", f);
    num(flow ? "uncontrolled_final_deviation_norm" : "uncontrolled_final_state_norm", u);
    num("final_over_initial", cs.y0_norm > 0 ? f / cs.y0_norm : 0.0);
    num("controlled_over_uncontrolled", u > 0 ? f / u : 0.0);
  }
  if (flow) {
    num("divergence_residual", cs.divergence_residual);
    num("y2_over_y1", cs.y2_ratio);
    num("forward_max_divergence", cs.verification.max_divergence);
    os << "forward_divergence_warning = " << (cs.verification.divergence_warning ? "true" : "false") << "\n";
  }
  if (r.fixed_point) {
    const auto& fp = *r.fixed_point;
    os << "outer_iterations = " << fp.records.size() << "\n";
    os << "outer_converged = " << (fp.converged ? "true" : "false") << "\n";
    os << "outer_stagnated = " << (fp.stagnated ? "true" : "false") << "\n";
    if (!fp.records.empty()) {
      num("outer_first_rel_err", fp.records.front().rel_err);
      num("outer_last_rel_err", fp.records.back().rel_err);
    }
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("output: cannot write " + p.string());
  f << s;
}

// Writes every artifact of a run into dir (created if needed).
inline void write_run_outputs(const std::filesystem::path& dir, const RunReport& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const ControlSolution& cs = r.solution;
  bool flow = cs.scenario != "heat";
  write_text(dir / "config.resolved", resolved_text(r.config));
  {
    std::ostringstream os;
    if (r.fixed_point) {
      write_fixed_point_csv(os, *r.fixed_point);
      std::ostringstream inner;
      write_iteration_csv(inner, cs.log);
      write_text(dir / "inner_iterations.csv", inner.str());
    } else {
      write_iteration_csv(os, cs.log);
    }
    write_text(dir / "iterations.csv", os.str());
  }
  for (int pass = 0; pass < 2; ++pass) {
    const NormHistory& h = pass == 0 ? cs.verification : cs.uncontrolled;
    std::ostringstream os;
    if (flow)
      write_flow_norms_csv(os, h);
    else
      write_heat_norms_csv(os, h);
    write_text(dir / (pass == 0 ? "norms.csv" : "norms_uncontrolled.csv"), os.str());
  }
  write_text(dir / "summary.txt", summary_text(r));

  if (!r.config.vtk) return;
  const SpaceTimeMesh& M = *cs.mesh;
  int nv = static_cast<int>(M.vertices.size());
  std::string yname = cs.scenario == "navier_stokes" ? "u" : "y";
  int comps = flow ? 2 : 1;
  for (int k = 0; k <= M.nt; ++k) {
    double t = M.time_nodes[k];
    std::vector<double> y(comps * nv), v(comps * nv), ph;
    if (!flow) ph.resize(nv);
    for (int i = 0; i < nv; ++i) {
      const Vec2& x = M.vertices[i];
      Vec2 yy = cs.state(x, t), vv = Vec2::Zero();
      // Vertex values of v: the control is exactly zero outside omega, so sample the closed region.
      if (M.omega.contains(x) && cs.p.size()) {
        FieldValue f = evaluate(*cs.pspace, cs.p, x, t);
        double c = -cs.control_factor(x, t);
        vv = Vec2(c * f.value[0], c * f.value[1]);
        if (!flow) ph[i] = f.value[0];
      } else if (!flow && cs.p.size()) {
        ph[i] = evaluate(*cs.pspace, cs.p, x, t).value[0];
      }
      for (int c = 0; c < comps; ++c) {
        y[comps * i + c] = yy[c];
        v[comps * i + c] = vv[c];
      }
    }
    auto emit = [&](const std::string& name, int nc, const std::vector<double>& vals) {
      std::ostringstream os;
      write_vtk(os, M, name, nc, vals, t);
      write_text(dir / ("field_" + name + "_" + std::to_string(k) + ".vtk"), os.str());
    };
    emit(yname, comps, y);
    emit("v", comps, v);
    if (!flow) emit("p_hat", 1, ph);
  }
}

}  // namespace nullctl
