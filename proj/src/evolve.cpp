#include "ewlab/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ewlab {

std::vector<double> Trajectory::times() const {
  std::vector<double> t;
  for (const State& s : snapshots) t.push_back(s.t);
  return t;
}

FieldSeries Trajectory::u_series() const {
  FieldSeries f;
  for (const State& s : snapshots) {
    f.times.push_back(s.t);
    f.fields.push_back(s.u);
  }
  return f;
}

FieldSeries Trajectory::v_series() const {
  FieldSeries f;
  for (const State& s : snapshots) {
    f.times.push_back(s.t);
    f.fields.push_back(s.v);
  }
  return f;
}

MetricSeries trajectory_metric(const Trajectory& tr) {
  MetricSeries m;
  for (const State& s : tr.snapshots) {
    m.times.push_back(s.t);
    m.g.push_back(spatial_metric(gradient(s.u), tr.config.material));
  }
  return m;
}

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::uint64_t stream_seed(std::uint64_t seed, int stream) { return seed * 4 + std::uint64_t(stream); }

struct Wave {
  double k[3];
  double p[3];
  double omega;
};

Wave resolve_wave(const PlaneWave& w, const Grid3& g, const MaterialSpec& spec) {
  Wave r{};
  double kk = 0;
  for (int a = 0; a < 3; ++a) {
    r.k[a] = kTwoPi * w.m[a] / g.box_len();
    kk += r.k[a] * r.k[a];
  }
  const double kn = std::sqrt(kk);
  double kh[3] = {r.k[0] / kn, r.k[1] / kn, r.k[2] / kn};
  if (w.longitudinal) {
    for (int a = 0; a < 3; ++a) r.p[a] = kh[a];
    r.omega = spec.c1 * kn;
    return r;
  }
  double e[3] = {w.polarization[0], w.polarization[1], w.polarization[2]};
  if (e[0] == 0 && e[1] == 0 && e[2] == 0) {
    // axis least aligned with k
    int best = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(kh[a]) < std::abs(kh[best])) best = a;
    e[best] = 1;
  }
  const double d = e[0] * kh[0] + e[1] * kh[1] + e[2] * kh[2];
  double nn = 0;
  for (int a = 0; a < 3; ++a) {
    r.p[a] = e[a] - d * kh[a];
    nn += r.p[a] * r.p[a];
  }
  if (nn < 1e-20) throw InputError("data.waves[].polarization is parallel to m");
  for (double& v : r.p) v /= std::sqrt(nn);
  r.omega = spec.c2 * kn;
  return r;
}

void add_waves(const RunConfig& c, double t, Field& u, Field& v) {
  const Grid3& g = c.grid;
  for (const PlaneWave& pw : c.data.waves) {
    const Wave w = resolve_wave(pw, g, c.material);
    const Field add = sample(g, Rank::vector3, [&](double x, double y, double z, double* o) {
      const double th = w.k[0] * x + w.k[1] * y + w.k[2] * z + pw.phase;
      const double a = pw.traveling ? std::cos(th - w.omega * t) : std::cos(th) * std::cos(w.omega * t);
      for (int c3 = 0; c3 < 3; ++c3) o[c3] = pw.amp * w.p[c3] * a;
    });
    const Field addv = sample(g, Rank::vector3, [&](double x, double y, double z, double* o) {
      const double th = w.k[0] * x + w.k[1] * y + w.k[2] * z + pw.phase;
      const double b = pw.traveling ? w.omega * std::sin(th - w.omega * t)
                                    : -w.omega * std::cos(th) * std::sin(w.omega * t);
      for (int c3 = 0; c3 < 3; ++c3) o[c3] = pw.amp * w.p[c3] * b;
    });
    u += add;
    v += addv;
  }
}

// Divergence or curl part of a rough vector field with the given H^s norm.
Field rough_part(const RunConfig& c, double s, double amp, int stream, bool div_part,
                 std::optional<int> kmax) {
  if (amp == 0) return Field(c.grid, Rank::vector3);
  const Field raw = rough_random_field(c.grid, s, 1.0, stream_seed(c.data.seed, stream), Rank::vector3, kmax);
  Helmholtz h = helmholtz_decompose(raw);
  Field f = div_part ? std::move(h.phi_part) : std::move(h.psi_part);
  // amplitude is the volume-normalized H^s norm
  const double L = c.grid.box_len();
  const double nrm = sobolev_norm(f, s) / std::sqrt(L * L * L);
  if (nrm > 0) f *= amp / nrm;
  return f;
}

Spectrum axpy_spec(const Spectrum& a, double s, const Spectrum& b) {
  Spectrum r = a;
  for (std::size_t i = 0; i < r.raw().size(); ++i) r.raw()[i] += s * b.raw()[i];
  return r;
}

bool spectrum_finite(const Spectrum& s) {
  for (const cplx& z : s.raw())
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

void rk4_spectral(Spectrum& uh, Spectrum& vh, double dt, const MaterialSpec& spec) {
  const Spectrum& k1u = vh;
  const Spectrum k1v = acceleration_spectrum(uh, spec);
  const Spectrum k2u = axpy_spec(vh, 0.5 * dt, k1v);
  const Spectrum k2v = acceleration_spectrum(axpy_spec(uh, 0.5 * dt, k1u), spec);
  const Spectrum k3u = axpy_spec(vh, 0.5 * dt, k2v);
  const Spectrum k3v = acceleration_spectrum(axpy_spec(uh, 0.5 * dt, k2u), spec);
  const Spectrum k4u = axpy_spec(vh, dt, k3v);
  const Spectrum k4v = acceleration_spectrum(axpy_spec(uh, dt, k3u), spec);
  const double w = dt / 6.0;
  auto& u = uh.raw();
  auto& v = vh.raw();
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] += w * (k1u.raw()[i] + 2.0 * k2u.raw()[i] + 2.0 * k3u.raw()[i] + k4u.raw()[i]);
    v[i] += w * (k1v.raw()[i] + 2.0 * k2v.raw()[i] + 2.0 * k3v.raw()[i] + k4v.raw()[i]);
  }
}

double speed_from(const HyperbolicityResult& h, const MaterialSpec& spec) {
  const double c2sq = std::isfinite(h.lambda_max) ? h.lambda_max + spec.c2 * spec.c2 : INFINITY;
  return std::sqrt(std::max(spec.c1 * spec.c1, c2sq));
}

bool halts(const RunConfig& c, const char* monitor) {
  return !c.force && std::find(c.checks.begin(), c.checks.end(), monitor) != c.checks.end();
}

}  // namespace

State initial_state(const RunConfig& c) {
  c.material.validate();
  const Grid3& g = c.grid;
  State s{Field(g, Rank::vector3), Field(g, Rank::vector3), 0.0};
  if (c.data.kind != "plane") {
    const std::optional<int> km = c.data.kind == "mixed" ? std::optional<int>(c.kmax()) : std::nullopt;
    const Field phi = rough_part(c, c.data.s_div, c.data.amp_div, 0, true, km);
    const Field psi = rough_part(c, c.data.s_curl, c.data.amp_curl, 1, false, km);
    s.u = phi + psi;
    if (c.data.v_init == "traveling") {
      // -c d_1 applied to each part
      const Field gp = gradient(phi), gs = gradient(psi);
      for (int k = 0; k < 3; ++k)
        for (std::size_t p = 0; p < g.points(); ++p)
          s.v.component(k)[p] = -c.material.c1 * gp.component(k)[p] - c.material.c2 * gs.component(k)[p];
    } else if (c.data.v_init == "rough") {
      s.v = rough_part(c, std::max(c.data.s_div - 1, 0.5), c.data.amp_div, 2, true, km) +
            rough_part(c, std::max(c.data.s_curl - 1, 0.5), c.data.amp_curl, 3, false, km);
    }
  }
  add_waves(c, 0.0, s.u, s.v);
  return s;
}

State exact_plane_solution(const RunConfig& c, double t) {
  State s{Field(c.grid, Rank::vector3), Field(c.grid, Rank::vector3), t};
  add_waves(c, t, s.u, s.v);
  return s;
}

double cfl_dt(const State& s, const MaterialSpec& spec, double safety) {
  if (!(safety > 0)) throw InputError("cfl_dt: safety factor must be positive");
  const HyperbolicityResult h = hyperbolicity_check(gradient(s.u), spec);
  return safety * s.u.grid().spacing() / speed_from(h, spec);
}

State rk4_step(const State& s, double dt, const MaterialSpec& spec, bool check_cfl) {
  if (!(dt > 0)) throw ContractViolation("rk4_step: dt must be positive");
  if (check_cfl && dt > 1.01 * cfl_dt(s, spec)) throw ContractViolation("rk4_step: dt above the CFL limit");
  Spectrum uh = forward(s.u), vh = forward(s.v);
  rk4_spectral(uh, vh, dt, spec);
  if (!spectrum_finite(uh) || !spectrum_finite(vh))
    throw InstabilityError("rk4_step: non-finite state at t = " + std::to_string(s.t + dt));
  return State{inverse(uh, Rank::vector3), inverse(vh, Rank::vector3), s.t + dt};
}

StepPlan plan_steps(const RunConfig& c, const State& s0) {
  const double T = c.time.t_end;
  const double dcfl = cfl_dt(s0, c.material, c.time.cfl_safety);
  StepPlan p{};
  if (c.time.dt) {
    const double dt = *c.time.dt;
    const long long steps = std::llround(T / dt);
    if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
      throw InputError("time.dt must divide t_end");
    if (dt > 1.01 * dcfl) throw InputError("time.dt exceeds the CFL limit " + std::to_string(dcfl));
    p.steps = int(steps);
    p.dt = T / double(steps);
    p.out_every = c.time.out_every.value_or(
        c.time.out_stride ? std::max(1, int(std::lround(*c.time.out_stride / p.dt))) : 1);
    if (p.steps % p.out_every != 0) throw InputError("snapshot stride must divide the step count");
    return p;
  }
  if (c.time.out_stride) {
    const int K = std::max(1, int(std::lround(T / *c.time.out_stride)));
    p.out_every = int(std::ceil(T / K / dcfl - 1e-9));
    p.steps = K * p.out_every;
  } else {
    p.out_every = c.time.out_every.value_or(1);
    const int raw = int(std::ceil(T / dcfl - 1e-9));
    p.steps = (raw + p.out_every - 1) / p.out_every * p.out_every;
  }
  p.dt = T / p.steps;
  return p;
}

Trajectory simulate(const RunConfig& c) {
  c.material.validate();
  Trajectory tr;
  tr.config = c;
  tr.hash = config_hash(c);
  const State s0 = initial_state(c);
  const MaterialSpec& spec = c.material;
  const Field du0 = gradient(s0.u);
  const HyperbolicityResult h0 = hyperbolicity_check(du0, spec);
  tr.initial_margin = h0.margin;
  const double gpp = spec.max_abs_gpp(1.0);
  tr.blowup_threshold = gpp > 0 && h0.ok ? 10 * h0.margin / gpp : std::numeric_limits<double>::infinity();
  const StepPlan plan = plan_steps(c, s0);
  tr.dt = plan.dt;
  tr.out_every = plan.out_every;

  bool flagged_h = false, flagged_b = false, flagged_c = false;
  // true when the run must stop
  auto monitor = [&](double t, const HyperbolicityResult& h, double gmax) -> bool {
    if (!h.ok) {
      if (halts(c, "hyperbolicity")) {
        tr.failure = Failure{t, "hyperbolicity"};
        return true;
      }
      if (!flagged_h) tr.flagged.push_back({t, "hyperbolicity"});
      flagged_h = true;
    }
    if (gmax > tr.blowup_threshold) {
      if (halts(c, "blowup")) {
        tr.failure = Failure{t, "blowup"};
        return true;
      }
      if (!flagged_b) tr.flagged.push_back({t, "blowup"});
      flagged_b = true;
    }
    if (plan.dt > 1.01 * c.time.cfl_safety * c.grid.spacing() / speed_from(h, spec)) {
      if (!c.force) {
        tr.failure = Failure{t, "cfl"};
        return true;
      }
      if (!flagged_c) tr.flagged.push_back({t, "cfl"});
      flagged_c = true;
    }
    return false;
  };

  tr.snapshots.push_back(s0);
  tr.rows.push_back({0.0, h0.margin, h0.lambda_max, du0.max_abs()});
  if (monitor(0.0, h0, du0.max_abs())) return tr;

  Spectrum uh = forward(s0.u), vh = forward(s0.v);
  for (int i = 1; i <= plan.steps; ++i) {
    const double t = i * plan.dt;
    rk4_spectral(uh, vh, plan.dt, spec);
    if (!spectrum_finite(uh) || !spectrum_finite(vh)) {
      tr.failure = Failure{t, "nonfinite"};
      break;
    }
    Field u = inverse(uh, Rank::vector3);
    const Field du = gradient(u);
    const HyperbolicityResult h = hyperbolicity_check(du, spec);
    const double gmax = du.max_abs();
    if (monitor(t, h, gmax)) break;
    if (i % plan.out_every == 0) {
      tr.snapshots.push_back(State{std::move(u), inverse(vh, Rank::vector3), t});
      tr.rows.push_back({t, h.margin, h.lambda_max, gmax});
    }
  }
  return tr;
}

Field linear_wave_evolve(const Field& w0, const Field& w1, double speed, double t) {
  const Grid3& g = w0.grid();
  const Spectrum a = forward(w0), b = forward(w1);
  Spectrum out(g, a.ncomp());
  for (int c = 0; c < a.ncomp(); ++c)
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      const double x1 = g.wavenumber(m1), x2 = g.wavenumber(m2), x3 = g.wavenumber(m3);
      const double om = speed * std::sqrt(x1 * x1 + x2 * x2 + x3 * x3);
      const double s = om > 0 ? std::sin(om * t) / om : t;
      out.comp(c)[idx] = std::cos(om * t) * a.comp(c)[idx] + s * b.comp(c)[idx];
    });
  return inverse(out, w0.rank());
}

DecomposedRun simulate_decomposed(const RunConfig& c) {
  DecomposedRun r;
  r.full = simulate(c);
  const State& s0 = r.full.snapshots.front();
  const Field psi0 = helmholtz_decompose(s0.u).psi_part;
  const Field psi1 = helmholtz_decompose(s0.v).psi_part;
  for (const State& s : r.full.snapshots) {
    Helmholtz h = helmholtz_decompose(s.u);
    Field lin = linear_wave_evolve(psi0, psi1, c.material.c2, s.t);
    const double ref = l2_norm(lin);
    const double gap = l2_norm(h.psi_part - lin);
    r.rows.push_back({s.t, sobolev_norm(curl(s.u), 1.0), ref > 0 ? gap / ref : gap, gap});
    r.phi.times.push_back(s.t);
    r.phi.fields.push_back(std::move(h.phi_part));
    r.psi.times.push_back(s.t);
    r.psi.fields.push_back(std::move(h.psi_part));
    r.psi_linear.times.push_back(s.t);
    r.psi_linear.fields.push_back(std::move(lin));
  }
  return r;
}

}  // namespace ewlab
