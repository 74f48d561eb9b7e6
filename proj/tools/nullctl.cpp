// Command-line driver: nullctl run <preset | config file> [overrides].

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "nullctl/output.hpp"

using namespace nullctl;

namespace {

// One machine-parsable line on stderr: "error: <kind>: <reason>".
int fail(const std::string& kind, const std::string& reason, int code) {
  std::string r = reason;
  for (char& ch : r)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::fprintf(stderr, "error: %s: %s\n", kind.c_str(), r.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time null control of heat, Stokes and Navier-Stokes problems"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a preset or a config file");
  std::string target;
  std::optional<int> nx, ny, nt, jobs;
  std::optional<double> y0_scale;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  bool no_vtk = false;
  run->add_option("target", target, "Preset name or path to a key = value config file")->required();
  run->add_option("--nx", nx, "Cells along x1");
  run->add_option("--ny", ny, "Cells along x2");
  run->add_option("--nt", nt, "Time slabs");
  run->add_option("--y0-scale", y0_scale, "Multiplier of the initial datum");
  run->add_option("--jobs", jobs, "Worker budget for assembly");
  run->add_option("--out", out, "Output directory");
  run->add_option("--set", sets, "Override any key: --set section.key=value")->take_all();
  run->add_flag("--no-vtk", no_vtk, "Skip VTK snapshots");

  auto* list = app.add_subcommand("presets", "List preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  if (list->parsed()) {
    for (const auto& n : preset_names()) std::cout << n << "\n";
    return 0;
  }

  RunReport report;
  RunConfig& c = report.config;
  try {
    if (auto p = preset(target))
      c = *p;
    else if (std::filesystem::exists(target))
      c = load_config(target);
    else
      throw std::invalid_argument("config: '" + target + "' is neither a preset nor a readable file");
    if (nx) c.nx = *nx;
    if (ny) c.ny = *ny;
    if (nt) c.nt = *nt;
    if (y0_scale) c.y0_scale = *y0_scale;
    if (jobs) c.jobs = *jobs;
    if (out) c.out = *out;
    if (no_vtk) c.vtk = false;
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("config: --set needs key=value, got '" + s + "'");
      set_key(c, s.substr(0, eq), s.substr(eq + 1));
    }
    report.omega_snapped = snap_omega_to_grid(c);
    validate(c);
  } catch (const std::exception& e) {
    return fail("validation", e.what(), 2);
  }

  int code = 0;
  try {
    if (c.scenario == "heat") {
      report.solution = solve_heat_control(c);
    } else if (c.scenario == "stokes") {
      report.solution = solve_stokes_control(c);
    } else {
      auto fp = fixed_point_ns(c);
      report.solution = std::move(fp.solution);
      report.fixed_point = std::move(fp.log);
      if (!report.fixed_point->converged) code = 4;
    }
    write_run_outputs(c.out, report);
  } catch (const SolverDiverged& e) {
    return fail("solver", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("solver", e.what(), 3);
  }
  if (code == 4) {
    const auto& fp = *report.fixed_point;
    char buf[160];
    std::snprintf(buf, sizeof buf, "fixed point %s after %zu outer iterations, last rel_err %.3e (log in %s)",
                  fp.stagnated ? "stagnated" : "hit the iteration cap", fp.records.size(),
                  fp.records.empty() ? 0.0 : fp.records.back().rel_err, c.out.c_str());
    return fail("nonconvergence", buf, 4);
  }
  std::cout << summary_text(report);
  return 0;
}
