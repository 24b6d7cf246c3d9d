// ewlab command-line front end.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "ewlab/checks.hpp"
#include "ewlab/config.hpp"
#include "ewlab/convergence.hpp"
#include "ewlab/evolve.hpp"
#include "ewlab/field_io.hpp"
#include "ewlab/geometry.hpp"
#include "ewlab/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace ewlab;

namespace {

enum Exit { kPass = 0, kTolerance = 1, kUsage = 2, kUnstable = 3 };

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec4 parse_tip(const std::string& s) {
  Vec4 tip{};
  std::stringstream ss(s);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == 4) throw InputError("tip needs exactly 4 values t,x,y,z: " + s);
    try {
      std::size_t used = 0;
      tip[i] = std::stod(item, &used);
      if (used != item.size()) throw InputError("");
    } catch (const std::exception&) {
      throw InputError("bad tip component '" + item + "'");
    }
    ++i;
  }
  if (i != 4) throw InputError("tip needs exactly 4 values t,x,y,z: " + s);
  return tip;
}

std::string pick_dir(const std::string& flag, const RunConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.output_dir.empty()) return c.output_dir;
  return "ewlab_run";
}

int report_failure(const Trajectory& tr, const std::string& dir) {
  if (tr.failure) {
    std::cerr << "instability: " << tr.failure->cause << " at t = " << tr.failure->t << " (record in " << dir
              << "/run.json)\n";
    return kUnstable;
  }
  for (const Failure& f : tr.flagged) std::cerr << "warning: forced past " << f.cause << " at t = " << f.t << "\n";
  return kPass;
}

// Tip time must lie inside the stored run.
void check_coverage(const SpacetimeMetric& m, const Vec4& tip) {
  if (!(tip[0] >= m.t_begin() && tip[0] < m.t_end()))
    throw InputError("tip time " + num(tip[0]) + " outside trajectory coverage [" + num(m.t_begin()) + ", " +
                     num(m.t_end()) + ")");
}

struct SimOpts {
  std::string config, out;
  bool no_diag = false;
};

int cmd_simulate(const SimOpts& o) {
  const RunConfig c = load_config(o.config);
  const std::string dir = pick_dir(o.out, c);
  const Trajectory tr = simulate(c);
  write_trajectory(tr, dir, !o.no_diag);
  double worst = INFINITY;
  for (const SnapshotRow& r : tr.rows) worst = std::min(worst, r.hyper_margin);
  std::cout << "wrote " << dir << ": " << tr.snapshots.size() << " snapshots, dt " << tr.dt << ", min hyperbolicity margin "
            << worst << "\n";
  return report_failure(tr, dir);
}

int cmd_decompose(const SimOpts& o) {
  const RunConfig c = load_config(o.config);
  const std::string dir = pick_dir(o.out, c);
  const DecomposedRun r = simulate_decomposed(c);
  write_trajectory(r.full, dir, !o.no_diag);
  std::string csv = "t,curl_h1,psi_gap,psi_gap_abs\n";
  for (const DecomposedRow& row : r.rows)
    csv += num(row.t) + "," + num(row.curl_h1) + "," + num(row.psi_gap) + "," + num(row.psi_gap_abs) + "\n";
  write_text_file((fs::path(dir) / "decomposition.csv").string(), csv);
  for (std::size_t i = 0; i < r.phi.fields.size(); ++i) {
    char a[32], b[32];
    std::snprintf(a, sizeof a, "phi_%06zu.ewf", i);
    std::snprintf(b, sizeof b, "psi_%06zu.ewf", i);
    write_field((fs::path(dir) / a).string(), r.phi.fields[i], r.phi.times[i]);
    write_field((fs::path(dir) / b).string(), r.psi.fields[i], r.psi.times[i]);
  }
  if (!r.rows.empty())
    std::cout << "wrote " << dir << ": psi gap at t = " << r.rows.back().t << " is " << r.rows.back().psi_gap << "\n";
  return report_failure(r.full, dir);
}

struct GeoOpts {
  std::string traj, out, field = "psi";
  std::vector<std::string> tips;
  int nomega = 642;
  int component = 0;
  double dt_ray = 0.05;
  std::optional<double> t_stop, r_min;
};

int cmd_geodesics(const GeoOpts& o) {
  const Trajectory tr = read_trajectory(o.traj);
  const TrajectoryMetric m(tr);
  const Vec4 tip = parse_tip(o.tips.front());
  check_coverage(m, tip);
  GeodesicBundle b = trace_bundle(m, tip, o.nomega, o.dt_ray, o.t_stop.value_or(std::nan("")));
  std::string extra;
  if (b.level >= 1) {
    connection_coefficients(b, m);
    const RaychaudhuriResult r = raychaudhuri_residual(b);
    extra = ", raychaudhuri max residual " + num(r.max_abs) + " over " + std::to_string(r.evaluated) + " samples";
  } else {
    log_warning("fewer than 42 rays: trchi and zsmall are not computed");
  }
  const HSpacelikeResult h = h_spacelike_check(b, tr.config.material);
  const std::string out = o.out.empty() ? (fs::path(o.traj) / "geodesics.csv").string() : o.out;
  write_text_file(out, geodesics_csv(b));
  std::cout << "wrote " << out << ": " << b.rays.size() << " rays, " << b.steps() << " samples each, max null drift "
            << b.max_null_drift() << ", min H " << h.min_H << ", crossings " << b.crossings << extra << "\n";
  if (!b.note.empty()) std::cout << "note: " << b.note << "\n";
  if (!h.ok) log_warning("cone not h-spacelike at " + std::to_string(h.failures) + " samples");
  return b.signature_failure ? kUnstable : kPass;
}

int cmd_fluxes(const GeoOpts& o) {
  const Trajectory tr = read_trajectory(o.traj);
  const TrajectoryMetric m(tr);
  if (o.component < 0 || o.component > 2) throw InputError("component must be 0, 1 or 2");
  const TrajectoryScalar field(tr, field_part_from_name(o.field), o.component);
  std::string csv = "u,F1,F2,denom,coercive_ratio\n";
  bool unstable = false;
  for (const std::string& t : o.tips) {
    const Vec4 tip = parse_tip(t);
    check_coverage(m, tip);
    GeodesicBundle b = trace_bundle(m, tip, o.nomega, o.dt_ray, o.t_stop.value_or(std::nan("")));
    unstable = unstable || b.signature_failure;
    const FluxResult f = null_fluxes(b, field, tr.config.material, o.r_min.value_or(-1));
    csv += num(tip[0]) + "," + num(f.F1) + "," + num(f.F2) + "," + num(f.denom) + "," + num(f.coercive_ratio) + "\n";
    std::cout << "u = " << tip[0] << ": coercive ratio " << f.coercive_ratio << " (" << f.used_steps << " steps, "
              << f.excluded_steps << " excluded near the tip)\n";
  }
  const std::string out = o.out.empty() ? (fs::path(o.traj) / "fluxes.csv").string() : o.out;
  write_text_file(out, csv);
  std::cout << "wrote " << out << "\n";
  return unstable ? kUnstable : kPass;
}

int cmd_check(const std::string& suite, const std::string& json) {
  suite_criteria(suite);  // unknown names fail before any work
  const SuiteReport rep = run_suite(suite, [](const CriterionResult& r) {
    std::cerr << "[" << r.id << " " << r.name << "] " << (r.pass() ? "pass" : "FAIL") << " (" << r.seconds << " s)\n";
  });
  std::cout << rep.text();
  if (!json.empty()) write_text_file(json, rep.json());
  return rep.pass() ? kPass : kTolerance;
}

int cmd_convergence(const std::string& config, int levels, const std::string& json) {
  const RunConfig c = load_config(config);
  const ConvergenceReport rep = convergence_study(c, levels);
  std::cout << rep.text();
  if (!json.empty()) write_text_file(json, rep.json());
  if (rep.unstable) return kUnstable;
  return rep.pass() ? kPass : kTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ewlab: elastic wave laboratory"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 pass, 1 tolerance failure, 2 usage or config error, 3 instability.\n"
             "EWLAB_THREADS caps the worker thread count.");

  SimOpts sim;
  auto* s_sim = app.add_subcommand("simulate", "run a config and write a trajectory directory");
  s_sim->add_option("config", sim.config, "run config (JSON)")->required();
  s_sim->add_option("-o,--out", sim.out, "output directory (default: config output_dir, else ewlab_run)");
  s_sim->add_flag("--no-diagnostics", sim.no_diag, "skip diagnostics.csv");
  s_sim->footer(config_help());

  SimOpts dec;
  auto* s_dec = app.add_subcommand("decompose", "run with the Helmholtz split and the linear curl-part reference");
  s_dec->add_option("config", dec.config, "run config (JSON)")->required();
  s_dec->add_option("-o,--out", dec.out, "output directory");
  s_dec->add_flag("--no-diagnostics", dec.no_diag, "skip diagnostics.csv");

  GeoOpts geo;
  auto* s_geo = app.add_subcommand("geodesics", "trace the null cone of a stored run");
  s_geo->add_option("--traj", geo.traj, "trajectory directory")->required();
  s_geo->add_option("--tip", geo.tips, "cone tip t,x,y,z")->required()->expected(1);
  s_geo->add_option("--nomega", geo.nomega, "number of rays (snapped to an icosphere count)")->capture_default_str();
  s_geo->add_option("--dt-ray", geo.dt_ray, "ray step")->capture_default_str();
  s_geo->add_option("--t-stop", geo.t_stop, "end time (default: end of the run)");
  s_geo->add_option("-o,--out", geo.out, "output CSV (default: DIR/geodesics.csv)");

  GeoOpts flx;
  auto* s_flx = app.add_subcommand("fluxes", "null-cone fluxes of one displacement component");
  s_flx->add_option("--traj", flx.traj, "trajectory directory")->required();
  s_flx->add_option("--tip", flx.tips, "cone tip t,x,y,z (repeatable)")->required()->take_all();
  s_flx->add_option("--nomega", flx.nomega, "number of rays")->capture_default_str();
  s_flx->add_option("--dt-ray", flx.dt_ray, "ray step")->capture_default_str();
  s_flx->add_option("--t-stop", flx.t_stop, "end time (default: end of the run)");
  s_flx->add_option("--field", flx.field, "u | phi | psi")->capture_default_str();
  s_flx->add_option("--component", flx.component, "displacement component 0..2")->capture_default_str();
  s_flx->add_option("--r-min", flx.r_min, "tip exclusion radius");
  s_flx->add_option("-o,--out", flx.out, "output CSV (default: DIR/fluxes.csv)");

  std::string suite, check_json;
  auto* s_chk = app.add_subcommand("check", "run an acceptance suite");
  std::string names;
  for (const std::string& n : suite_names()) names += (names.empty() ? "" : " | ") + n;
  s_chk->add_option("--suite", suite, names)->required();
  s_chk->add_option("--json", check_json, "also write the report as JSON");

  std::string conv_config, conv_json;
  int levels = 3;
  auto* s_conv = app.add_subcommand("convergence", "refinement study with Richardson order estimates");
  s_conv->add_option("config", conv_config, "run config (JSON)")->required();
  s_conv->add_option("--levels", levels, "refinement levels (>= 2)")->capture_default_str();
  s_conv->add_option("--json", conv_json, "also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kUsage;
  }

  // mutation hook for the harness tests
  if (const char* m = std::getenv("EWLAB_TEST_MUTATION"); m && std::string(m) == "helmholtz") {
    testing_hooks::set_broken_helmholtz(true);
    std::cerr << "test mutation active: broken Helmholtz projector\n";
  }

  try {
    if (*s_sim) return cmd_simulate(sim);
    if (*s_dec) return cmd_decompose(dec);
    if (*s_geo) return cmd_geodesics(geo);
    if (*s_flx) return cmd_fluxes(flx);
    if (*s_chk) return cmd_check(suite, check_json);
    if (*s_conv) return cmd_convergence(conv_config, levels, conv_json);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InstabilityError& e) {
    std::cerr << "instability: " << e.what() << "\n";
    return kUnstable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTolerance;
  }
  return kUsage;
}
