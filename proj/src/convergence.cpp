#include "ewlab/convergence.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "ewlab/diagnostics.hpp"
#include "ewlab/evolve.hpp"
#include "ewlab/geometry.hpp"

namespace ewlab {

namespace {

std::string fmt(double v, const char* f = "%.3e") {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Raychaudhuri levels beyond the third need 10242+ rays; skipped.
constexpr int kMaxGeometryLevels = 3;

}  // namespace

OrderRow order_row(std::string quantity, std::string measure, std::vector<double> errors, double target,
                   double floor) {
  OrderRow r;
  r.quantity = std::move(quantity);
  r.measure = std::move(measure);
  r.errors = std::move(errors);
  r.target = target;
  bool finite = r.errors.size() >= 2, exact = true;
  for (double e : r.errors) {
    finite = finite && std::isfinite(e);
    exact = exact && e <= floor;
  }
  if (!finite) {
    r.status = "n/a";
    r.note = r.errors.size() < 2 ? "fewer than two errors" : "non-finite error";
    return r;
  }
  if (exact) {
    r.status = "exact";
    r.note = "all errors at roundoff";
    return r;
  }
  bool monotone = true;
  for (std::size_t k = 0; k + 1 < r.errors.size(); ++k) {
    r.orders.push_back(std::log2(r.errors[k] / r.errors[k + 1]));
    monotone = monotone && r.errors[k + 1] < r.errors[k];
  }
  if (!monotone) {
    r.status = "n/a";
    r.note = "errors not monotone under refinement";
  } else {
    r.status = r.orders.back() >= target ? "ok" : "low";
  }
  return r;
}

bool ConvergenceReport::pass() const {
  if (unstable || rows.empty()) return false;
  for (const OrderRow& r : rows)
    if (!r.pass()) return false;
  return true;
}

std::string ConvergenceReport::text() const {
  std::string out;
  for (const OrderRow& r : rows) {
    std::string ord = r.status == "n/a" ? "n/a" : r.status == "exact" ? "exact" : fmt(r.orders.back(), "%.2f");
    out += r.quantity + ": order " + ord + " (target >= " + fmt(r.target, "%.1f") + ") " + r.status + "\n";
    out += "  " + r.measure + ":";
    for (double e : r.errors) out += " " + fmt(e);
    out += "\n";
    if (!r.orders.empty()) {
      out += "  pairwise orders:";
      for (double o : r.orders) out += " " + fmt(o, "%.2f");
      out += "\n";
    }
    if (!r.note.empty()) out += "  note: " + r.note + "\n";
  }
  if (unstable) out += "a refinement level halted (instability)\n";
  out += std::string(pass() ? "PASS" : "FAIL") + "  convergence, " + std::to_string(levels) + " levels\n";
  return out;
}

std::string ConvergenceReport::json() const {
  using J = nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? J(v) : J(nullptr); };
  J j;
  j["levels"] = levels;
  j["pass"] = pass();
  j["unstable"] = unstable;
  j["rows"] = J::array();
  for (const OrderRow& r : rows) {
    J e = J::array(), o = J::array();
    for (double x : r.errors) e.push_back(num(x));
    for (double x : r.orders) o.push_back(num(x));
    j["rows"].push_back({{"quantity", r.quantity}, {"measure", r.measure}, {"errors", e}, {"orders", o},
                         {"target", r.target}, {"status", r.status}, {"note", r.note}});
  }
  return j.dump(2) + "\n";
}

ConvergenceReport convergence_study(const RunConfig& c, int levels) {
  if (levels < 2) throw InputError("convergence needs at least 2 levels");
  ConvergenceReport rep;
  rep.levels = levels;

  // solver levels: dt halved each time, every step stored so snapshot
  // spacing refines with dt
  const StepPlan p0 = plan_steps(c, initial_state(c));
  std::vector<Trajectory> runs;
  for (int k = 0; k < levels; ++k) {
    RunConfig ck = c;
    ck.time.dt = p0.dt / double(1 << k);
    ck.time.out_stride.reset();
    ck.time.out_every = 1;
    runs.push_back(simulate(ck));
    rep.unstable = rep.unstable || !runs.back().completed();
  }

  const bool exact = c.data.kind == "plane" && c.material.degree() == 0;
  std::vector<double> solver;
  std::string measure;
  if (rep.unstable) {
    measure = "max-norm error at t_end";
  } else if (exact) {
    measure = "max-norm error vs exact solution at t_end";
    for (const Trajectory& tr : runs) {
      const State& s = tr.snapshots.back();
      const State ex = exact_plane_solution(c, s.t);
      solver.push_back(std::max((s.u - ex.u).max_abs(), (s.v - ex.v).max_abs()));
    }
  } else {
    measure = "max-norm difference of consecutive levels at t_end";
    for (int k = 0; k + 1 < levels; ++k) {
      const State& a = runs[k].snapshots.back();
      const State& b = runs[k + 1].snapshots.back();
      solver.push_back(std::max((a.u - b.u).max_abs(), (a.v - b.v).max_abs()));
    }
  }
  OrderRow srow = order_row("solver", measure, solver, 3.7);
  if (rep.unstable) srow.note = "a level halted before t_end";
  else if (!exact && levels < 3) srow.note = "no exact solution; 3 levels needed for differences";
  rep.rows.push_back(srow);

  std::vector<double> dec;
  for (const Trajectory& tr : runs) {
    double m = 0;
    bool any = false;
    for (const DecouplingRow& r : decoupling_monitor(tr))
      if (!std::isnan(r.psi_residual)) {
        m = std::max(m, r.psi_residual);
        any = true;
      }
    dec.push_back(any ? m : std::nan(""));
  }
  OrderRow drow = order_row("decoupling residual", "max ||d_t^2 curl U - c2^2 Lap curl U||_L2", dec, 2.0);
  if (drow.status == "n/a" && drow.note == "non-finite error") drow.note = "run too short for the time stencil";
  rep.rows.push_back(drow);

  // geometry on the finest trajectory
  const Trajectory& fine = runs.back();
  if (fine.snapshots.size() < 2) {
    rep.rows.push_back(order_row("geodesic tracer", "n/a", {}, 3.7));
    rep.rows.push_back(order_row("raychaudhuri residual", "n/a", {}, 2.0));
    return rep;
  }
  const TrajectoryMetric metric(fine);
  const double half = 0.5 * c.grid.box_len();
  const Vec4 tip{metric.t_begin(), half, half, half};
  const double t_stop = std::min(metric.t_end(), tip[0] + 1.0);
  std::vector<double> drift, ray;
  for (int k = 0; k < levels; ++k) {
    GeodesicBundle b = trace_bundle(metric, tip, 162, 0.1 / double(1 << k), t_stop);
    drift.push_back(b.signature_failure ? std::nan("") : b.max_null_drift());
  }
  rep.rows.push_back(order_row("geodesic tracer", "max |g(L, L)| along 162 rays, dt_ray = 0.1 / 2^k", drift, 3.7));
  const int gl = std::min(levels, kMaxGeometryLevels);
  bool empty = false;
  for (int k = 0; k < gl; ++k) {
    GeodesicBundle b = trace_bundle(metric, tip, icosphere_count(2 + k), 0.1 / double(1 << k), t_stop);
    if (b.signature_failure) {
      ray.push_back(std::nan(""));
      continue;
    }
    connection_coefficients(b, metric);
    const RaychaudhuriResult r = raychaudhuri_residual(b);
    ray.push_back(r.evaluated ? r.max_abs : std::nan(""));
    empty = empty || !r.evaluated;
  }
  // the residual carries trchi^2 ~ 1 / r^2 terms; roundoff sits near 1e-10
  OrderRow rrow =
      order_row("raychaudhuri residual", "max residual, n_omega = 162 * 4^k, dt_ray = 0.1 / 2^k", ray, 2.0, 1e-9);
  if (empty) rrow.note = "no samples beyond the tip exclusion radius " + fmt(std::max(2 * metric.spacing(), 0.1), "%.3g");
  if (gl < levels) rrow.note += (rrow.note.empty() ? "" : "; ") + std::string("limited to 3 geometry levels");
  rep.rows.push_back(rrow);
  return rep;
}

}  // namespace ewlab
