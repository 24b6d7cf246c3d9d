#include "ewlab/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <numbers>
#include <unistd.h>

#include "ewlab/diagnostics.hpp"
#include "ewlab/evolve.hpp"
#include "ewlab/geometry.hpp"
#include "ewlab/trajectory_io.hpp"

namespace fs = std::filesystem;

namespace ewlab {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const std::map<int, std::string>& names() {
  static const std::map<int, std::string> m{
      {1, "piola identity"},
      {2, "gradient structure"},
      {3, "pseudo-irrotational decoupling"},
      {4, "psi-sector linearity"},
      {5, "linear dispersion"},
      {6, "energy conservation and inequality"},
      {7, "flat-cone geometry"},
      {8, "raychaudhuri residual"},
      {9, "h-spacelike and coerciveness"},
      {10, "littlewood-paley machinery"},
      {11, "divergence-part equation"},
      {12, "determinism"},
  };
  return m;
}

double max_finite(double a, double b) { return std::isnan(b) ? a : std::max(a, b); }

// ---- shared fixtures (one instance per suite run) ----

RunConfig with_dt_fraction(RunConfig c, int fraction) {
  const State s0 = initial_state(c);
  const int steps = int(std::ceil(c.time.t_end / cfl_dt(s0, c.material, c.time.cfl_safety))) * fraction;
  c.time.dt = c.time.t_end / steps;
  c.time.out_every = 1;
  return c;
}

Field random_u(const Grid3& g, std::uint64_t seed, double grad_max) {
  Field u = rough_random_field(g, 1.0, 1.0, seed, Rank::vector3, 15);
  u *= grad_max / gradient(u).max_abs();
  return u;
}

const Vec4 kFlatTip{0.2, 1, 2, 3};
const Vec4 kCurvedTip{0, pi, pi, pi};

class Fixtures {
 public:
  // nonlinear baseline to t = 0.25 at dt = cfl / fraction, every step stored
  const Trajectory& baseline(int fraction) {
    auto it = baseline_.find(fraction);
    if (it != baseline_.end()) return it->second;
    RunConfig c;
    c.time.t_end = 0.25;
    return baseline_.emplace(fraction, simulate(with_dt_fraction(c, fraction))).first->second;
  }

  GeodesicBundle& flat_bundle(double c1) {
    auto it = flat_.find(c1);
    if (it != flat_.end()) return it->second;
    FlatMetric m(c1);
    GeodesicBundle b = trace_bundle(m, kFlatTip, 642, 0.05, 1.2);
    connection_coefficients(b, m);
    return flat_.emplace(c1, std::move(b)).first->second;
  }

  // smooth curved run (band limit 2) and its metric
  const TrajectoryMetric& curved_metric() {
    if (!curved_) {
      RunConfig c;
      c.data.kmax = 2;
      c.time.t_end = 1.0;
      c.time.out_every = 1;
      curved_run_ = std::make_unique<Trajectory>(simulate(c));
      curved_ = std::make_unique<TrajectoryMetric>(*curved_run_);
    }
    return *curved_;
  }

 private:
  std::map<int, Trajectory> baseline_;
  std::map<double, GeodesicBundle> flat_;
  std::unique_ptr<Trajectory> curved_run_;
  std::unique_ptr<TrajectoryMetric> curved_;
};

// ---- criteria ----

std::vector<CheckPart> piola(Fixtures&) {
  const Grid3 g(32, 2 * pi);
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    worst = std::max(worst, piola_identity_residual(random_u(g, seed, 0.2)).max_norm);
  return {check_le("max |div cof F| over 50 fields", worst, 1e-8)};
}

std::vector<CheckPart> gradient_structure(Fixtures&) {
  const Grid3 g(32, 2 * pi);
  const MaterialSpec spec;
  double c = 0, gap = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Field u = random_u(g, seed, 0.2);
    const Field f = nonlinearity(u, spec);
    c = std::max(c, curl(f).max_abs());
    gap = std::max(gap, (f - nonlinearity_gradient_form(u, spec)).max_abs());
  }
  return {check_le("max |curl f|", c, 1e-9), check_le("direct vs grad G gap", gap, 1e-9)};
}

std::vector<CheckPart> decoupling(Fixtures& fx) {
  RunConfig c;
  c.data.amp_curl = 0;
  c.time.t_end = 1.0;
  const Trajectory tr = simulate(c);
  const double h2 = sobolev_norm(tr.snapshots.front().u, 2.0);
  double worst = 0;
  for (const DecouplingRow& r : decoupling_monitor(tr)) worst = std::max(worst, r.curl_h1 / h2);
  // curl-sector equation residual on generic data, dt halved
  double ra = 0, rb = 0;
  for (const DecouplingRow& r : decoupling_monitor(fx.baseline(4))) ra = max_finite(ra, r.psi_residual);
  for (const DecouplingRow& r : decoupling_monitor(fx.baseline(8))) rb = max_finite(rb, r.psi_residual);
  return {check_le("max ||curl U||_H1 / ||U0||_H2, t <= 1", worst, 1e-6),
          check_le("pseudo-irrotational run halted early", tr.completed() ? 0.0 : 1.0, 0.0),
          check_ge("curl-sector residual reduction under dt/2", ra / rb, 4.0)};
}

std::vector<CheckPart> psi_linearity(Fixtures&) {
  RunConfig c;
  c.time.t_end = 0.5;
  const DecomposedRun r = simulate_decomposed(c);
  const double gap = r.rows.back().psi_gap;
  RunConfig f = c;
  f.time.dt = r.full.dt / 2;
  f.time.out_every = 2 * r.full.out_every;
  const double fine = simulate_decomposed(f).rows.back().psi_gap;
  return {check_le("psi gap at t = 0.5", gap, 1e-4), check_in("t of last row", r.rows.back().t, 0.5 - 1e-12, 0.5 + 1e-12),
          check_in("gap reduction under dt/2", gap / fine, 1.0 + 1e-12, inf)};
}

RunConfig single_wave(bool longitudinal) {
  RunConfig c;
  c.material.gamma.clear();
  c.data.kind = "plane";
  PlaneWave w;
  w.longitudinal = longitudinal;
  w.amp = 0.01;
  w.phase = 0.3;
  c.data.waves = {w};
  return c;
}

double period_error(const RunConfig& c, double omega, int n_steps) {
  const double T = 2 * pi / omega;
  State s = exact_plane_solution(c, 0.1 * T);
  const State ref = s;
  const double dt = T / n_steps;
  for (int i = 0; i < n_steps; ++i) s = rk4_step(s, dt, c.material, false);
  return std::max((ref.u - s.u).max_abs() / ref.u.max_abs(), (ref.v - s.v).max_abs() / ref.v.max_abs());
}

std::vector<CheckPart> dispersion(Fixtures&) {
  std::vector<CheckPart> out;
  for (bool lon : {true, false}) {
    const RunConfig c = single_wave(lon);
    const double omega = lon ? c.material.c1 : c.material.c2;
    const double fine = period_error(c, omega, 512), coarse = period_error(c, omega, 256);
    const std::string tag = lon ? "longitudinal" : "transverse";
    out.push_back(check_le(tag + " one-period error", fine, 1e-5));
    out.push_back(check_in(tag + " Richardson factor", coarse / fine, 12, 20));
  }
  return out;
}

std::vector<CheckPart> energy(Fixtures&) {
  RunConfig lin;
  lin.material.gamma.clear();
  lin.data.kind = "plane";
  PlaneWave a, b;
  a.amp = 0.02;
  a.traveling = true;
  b.m = {0, 1, 2};
  b.longitudinal = false;
  b.amp = 0.01;
  b.traveling = true;
  lin.data.waves = {a, b};
  const Trajectory tr = simulate(with_dt_fraction(lin, 4));
  const double e0 = standard_energy(tr.snapshots.front(), lin.material).total;
  double drift = 0;
  for (const State& s : tr.snapshots)
    drift = std::max(drift, std::abs(standard_energy(s, lin.material).total - e0) / e0);

  RunConfig c;
  c.data.v_init = "rough";
  const EnergyFit fa = energy_inequality_fit(simulate(with_dt_fraction(c, 1)));
  RunConfig h = with_dt_fraction(c, 2);
  h.time.out_every = 2;
  const EnergyFit fb = energy_inequality_fit(simulate(h));
  const double rel = std::abs(fb.c_fit - fa.c_fit) / fa.c_fit;
  return {check_le("linear energy drift over t = 1", drift, 1e-8), check_ge("C_fit (finite)", fa.c_fit, 0),
          check_le("C_fit relative change under dt/2", std::isfinite(rel) ? rel : inf, 0.2)};
}

std::vector<CheckPart> flat_cone(Fixtures& fx) {
  std::vector<CheckPart> out;
  for (double c1 : {0.5, 1.0, 2.0}) {
    const GeodesicBundle& b = fx.flat_bundle(c1);
    double straight = 0, tr = 0, z = 0, sig = 0;
    for (const Ray& r : b.rays)
      for (const RaySample& s : r.samples) {
        const double rt = s.t - kFlatTip[0];
        for (int i = 0; i < 3; ++i)
          straight = std::max(straight, std::abs(s.x[i] - kFlatTip[i + 1] - c1 * r.omega[i] * rt));
        sig = std::max(sig, std::abs(s.sigma));
        if (!s.has_coeffs || rt < tip_exclusion(b)) continue;
        tr = std::max(tr, std::abs(s.trchi * rt - 2));
        z = std::max(z, std::abs(s.z));
      }
    const std::string tag = "c1=" + fmt(c1) + " ";
    out.push_back(check_le(tag + "ray straightness", straight, 1e-10));
    out.push_back(check_le(tag + "|trchi r - 2|", tr, 1e-4));
    out.push_back(check_le(tag + "|z|", z, 1e-4));
    out.push_back(check_le(tag + "|sigma|", sig, 1e-10));
  }
  return out;
}

std::vector<CheckPart> raychaudhuri(Fixtures& fx) {
  double flat = 0;
  for (double c1 : {0.5, 1.0, 2.0}) flat = std::max(flat, raychaudhuri_residual(fx.flat_bundle(c1)).max_abs);
  const TrajectoryMetric& m = fx.curved_metric();
  GeodesicBundle b = trace_bundle(m, kCurvedTip, 642, 0.05);
  connection_coefficients(b, m);
  const double base = raychaudhuri_residual(b).max_abs;
  const double dropped = raychaudhuri_residual(b, true).max_abs;
  GeodesicBundle f = trace_bundle(m, kCurvedTip, 2562, 0.025);
  connection_coefficients(f, m);
  const double refined = raychaudhuri_residual(f).max_abs;
  return {check_le("flat residual", flat, 1e-6), check_le("curved residual", base, 1e-3),
          check_ge("reduction under (dt_ray, n_omega) refinement", base / refined, 4),
          check_ge("inflation with k_NN term dropped", dropped / base, 10)};
}

std::vector<CheckPart> coercive(Fixtures&) {
  const MaterialSpec spec;
  // flat cone normal
  double v0 = 0;
  for (double c1 : {1.0, 2.0}) {
    MaterialSpec s = spec;
    s.c1 = c1;
    FlatMetric m(c1);
    GeodesicBundle b = trace_bundle(m, {0, 0, 0, 0}, 162, 0.1, 0.5);
    h_spacelike_check(b, s);
    const double want = 1 / std::sqrt(1 - s.c2 * s.c2 / (c1 * c1));
    for (const Ray& r : b.rays)
      for (const RaySample& x : r.samples) v0 = std::max(v0, std::abs(x.V[0] - want));
  }
  // ten nonlinear runs, curl part of one displacement component each
  double min_h = inf, rmin = inf, rmax = 0, change = 0;
  int passing = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunConfig c;
    c.data.seed = seed;
    c.time.t_end = 0.6;
    c.time.out_every = 1;
    const Trajectory tr = simulate(c);
    bool elliptic = tr.completed();
    for (const State& s : tr.snapshots)
      elliptic = elliptic && ellipticity_check(spatial_metric(gradient(s.u), c.material), c.material).ok;
    const TrajectoryMetric m(tr);
    const TrajectoryScalar psi(tr, FieldPart::psi, int((seed - 1) % 3));
    GeodesicBundle b = trace_bundle(m, kCurvedTip, 162, 0.05);
    GeodesicBundle f = trace_bundle(m, kCurvedTip, 642, 0.025);
    const HSpacelikeResult hb = h_spacelike_check(b, c.material);
    const HSpacelikeResult hf = h_spacelike_check(f, c.material);
    if (elliptic) {
      ++passing;
      min_h = std::min({min_h, hb.min_H, hf.min_H});
    }
    const double r0 = null_fluxes(b, psi, c.material).coercive_ratio;
    const double r1 = null_fluxes(f, psi, c.material).coercive_ratio;
    rmin = std::min(rmin, r0);
    rmax = std::max(rmax, r0);
    change = std::max(change, std::abs(r1 / r0 - 1));
  }
  CheckPart h = check_ge("min H over ellipticity-passing runs", min_h, 0);
  h.pass = min_h > 0;  // strict
  return {check_le("flat |V0 - 1/sqrt(1 - c2^2/c1^2)|", v0, 1e-8),
          check_ge("ellipticity-passing runs", passing, 1),
          h,
          check_ge("min coercive ratio over 10 runs", rmin, 0.1),
          check_le("max coercive ratio over 10 runs", rmax, 10),
          check_le("max relative change under refinement", change, 0.3)};
}

std::vector<CheckPart> littlewood_paley(Fixtures&) {
  const Grid3 g(32, 2 * pi);
  double recon = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Field f = rough_random_field(g, 0.5, 1.0, 100 + seed, Rank::scalar);
    Field r = lp_low(f);
    for (const LPBand& b : lp_bands(g)) r += lp_project(f, b);
    recon = std::max(recon, (r - f).max_abs());
  }
  std::vector<CheckPart> out{check_le("partition-of-unity reconstruction", recon, 1e-10)};
  auto field = [&](std::uint64_t seed) {
    return rough_random_field(g, 0.5 + double(seed % 7) * 0.5, 1.0, seed, Rank::scalar);
  };
  for (double s : {1.0, 2.0, 3.1}) {
    double lo = inf, hi = 0, repeat = 0;
    std::vector<double> first;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const Field f = field(seed);
      const double q = lp_sobolev_norm(f, s) / sobolev_norm(f, s);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
      if (seed <= 10) first.push_back(q);
    }
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Field f = field(seed);
      repeat = std::max(repeat, std::abs(lp_sobolev_norm(f, s) / sobolev_norm(f, s) - first[seed - 1]));
    }
    const std::string tag = "s=" + fmt(s) + " ";
    out.push_back(check_ge(tag + "min LP/Sobolev ratio", lo, 1.0 / 8));
    out.push_back(check_le(tag + "max LP/Sobolev ratio", hi, 8));
    out.push_back(check_le(tag + "ratio spread across seeds (max/min)", hi / lo, 2));
    out.push_back(check_le(tag + "same-seed repeat difference", repeat, 0));
  }
  return out;
}

std::vector<CheckPart> divpart(Fixtures& fx) {
  const auto a = divpart_residual(fx.baseline(4));
  const auto b = divpart_residual(fx.baseline(8));
  const auto m = divpart_residual(fx.baseline(4), true);
  double ra = 0, rb = 0, rm = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!std::isnan(a[k].residual)) {
      ra = std::max(ra, a[k].residual / a[k].scale);
      rm = std::max(rm, m[k].residual / m[k].scale);
    }
  for (const auto& r : b)
    if (!std::isnan(r.residual)) rb = std::max(rb, r.residual / r.scale);
  return {check_le("residual / ||d^2 phi||", ra, 1e-3), check_in("reduction under dt/2", ra / rb, 1.0 + 1e-12, inf),
          check_ge("inflation with gamma'' sign flipped", rm / ra, 100)};
}

bool same_dirs(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  std::vector<std::string> na, nb;
  for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb) return false;
  for (const std::string& n : na) {
    if (read_text_file((a / n).string()) != read_text_file((b / n).string())) return false;
    ++files;
  }
  return true;
}

std::vector<CheckPart> determinism(Fixtures&) {
  const fs::path root = fs::temp_directory_path() / ("ewlab-determinism-" + std::to_string(::getpid()));
  RunConfig c;
  c.time.t_end = 0.2;
  c.time.out_every = 1;
  write_trajectory(simulate(c), (root / "a").string());
  write_trajectory(simulate(c), (root / "b").string());
  std::size_t files = 0;
  const bool traj_same = same_dirs(root / "a", root / "b", files);

  // geometry output on the stored trajectory, and a full criterion report
  auto geodesics = [&] {
    const Trajectory tr = read_trajectory((root / "a").string());
    const TrajectoryMetric m(tr);
    GeodesicBundle b = trace_bundle(m, {0, pi, pi, pi}, 42, 0.05);
    connection_coefficients(b, m);
    h_spacelike_check(b, tr.config.material);
    return geodesics_csv(b);
  };
  const bool geo_same = geodesics() == geodesics();
  auto report = [] {
    Fixtures fx;
    SuiteReport r;
    r.suite = "determinism-probe";
    r.criteria.push_back({7, criterion_name(7), flat_cone(fx), 0});
    return r.json();
  };
  const bool rep_same = report() == report();
  std::error_code ec;
  fs::remove_all(root, ec);
  return {check_le("trajectory files differing", traj_same ? 0 : 1, 0), check_ge("trajectory files compared", double(files), 4),
          check_le("geodesics.csv differs", geo_same ? 0 : 1, 0), check_le("report differs", rep_same ? 0 : 1, 0)};
}

using CriterionFn = std::vector<CheckPart> (*)(Fixtures&);

CriterionFn criterion_fn(int id) {
  static const std::map<int, CriterionFn> m{
      {1, piola},        {2, gradient_structure}, {3, decoupling},      {4, psi_linearity},
      {5, dispersion},   {6, energy},             {7, flat_cone},       {8, raychaudhuri},
      {9, coercive},     {10, littlewood_paley},  {11, divpart},        {12, determinism},
  };
  return m.at(id);
}

const std::vector<std::pair<std::string, std::vector<int>>>& suites() {
  static const std::vector<std::pair<std::string, std::vector<int>>> s{
      {"piola", {1, 2}},
      {"decoupling", {3, 4, 11}},
      {"linear-waves", {5, 6}},
      {"raychaudhuri", {7, 8}},
      {"coercive", {9}},
      {"convergence", {10, 12}},
      {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}},
  };
  return s;
}

}  // namespace

std::string CheckPart::bound_text() const {
  if (std::isinf(lo) && std::isinf(hi)) return "any";
  if (std::isinf(lo)) return "<= " + fmt(hi);
  if (std::isinf(hi)) return ">= " + fmt(lo);
  return "in [" + fmt(lo) + ", " + fmt(hi) + "]";
}

CheckPart check_in(std::string name, double measured, double lo, double hi) {
  CheckPart p;
  p.name = std::move(name);
  p.measured = measured;
  p.lo = lo;
  p.hi = hi;
  p.pass = std::isfinite(measured) && measured >= lo && measured <= hi;
  return p;
}
CheckPart check_le(std::string name, double measured, double hi) { return check_in(std::move(name), measured, -inf, hi); }
CheckPart check_ge(std::string name, double measured, double lo) { return check_in(std::move(name), measured, lo, inf); }

bool CriterionResult::pass() const {
  if (parts.empty()) return false;
  for (const CheckPart& p : parts)
    if (!p.pass) return false;
  return true;
}

bool SuiteReport::pass() const {
  for (const CriterionResult& c : criteria)
    if (!c.pass()) return false;
  return !criteria.empty();
}

std::string SuiteReport::text() const {
  std::string out;
  for (const CriterionResult& c : criteria)
    for (const CheckPart& p : c.parts)
      out += std::string(p.pass ? "PASS" : "FAIL") + "  [" + std::to_string(c.id) + " " + c.name + "] " + p.name +
             " = " + fmt(p.measured) + " (" + p.bound_text() + ")\n";
  out += std::string(pass() ? "PASS" : "FAIL") + "  suite " + suite + "\n";
  return out;
}

std::string SuiteReport::json() const {
  using J = nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? J(v) : J(nullptr); };
  J j;
  j["suite"] = suite;
  j["pass"] = pass();
  j["criteria"] = J::array();
  for (const CriterionResult& c : criteria) {
    J jc;
    jc["id"] = c.id;
    jc["name"] = c.name;
    jc["pass"] = c.pass();
    jc["checks"] = J::array();
    for (const CheckPart& p : c.parts)
      jc["checks"].push_back({{"name", p.name}, {"measured", num(p.measured)}, {"lo", num(p.lo)}, {"hi", num(p.hi)},
                              {"pass", p.pass}});
    j["criteria"].push_back(jc);
  }
  return j.dump(2) + "\n";
}

std::vector<int> suite_criteria(const std::string& suite) {
  for (const auto& [name, ids] : suites())
    if (name == suite) return ids;
  throw InputError("unknown suite '" + suite + "'");
}

std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& s : suites()) out.push_back(s.first);
  return out;
}

std::string criterion_name(int id) {
  auto it = names().find(id);
  if (it == names().end()) throw ContractViolation("no criterion " + std::to_string(id));
  return it->second;
}

SuiteReport run_suite(const std::string& suite, const CriterionCallback& done) {
  SuiteReport rep;
  rep.suite = suite;
  const std::vector<int> ids = suite_criteria(suite);
  Fixtures fx;
  for (int id : ids) {
    CriterionResult r;
    r.id = id;
    r.name = criterion_name(id);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.parts = criterion_fn(id)(fx);
    } catch (const std::exception& e) {
      // a crashed check is a failed check, not a crashed suite
      CheckPart p;
      p.name = std::string("error: ") + e.what();
      r.parts = {p};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (done) done(r);
    rep.criteria.push_back(std::move(r));
  }
  return rep;
}

}  // namespace ewlab
