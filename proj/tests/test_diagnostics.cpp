#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <map>
#include <random>

#include "ewlab/diagnostics.hpp"

using namespace ewlab;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

Mat4 flat_metric(double c1, bool inverse) {
  Mat4 g{};
  g[0][0] = -1;
  for (int a = 1; a < 4; ++a) g[a][a] = inverse ? c1 * c1 : 1 / (c1 * c1);
  return g;
}

RunConfig traveling_linear() {
  RunConfig c;
  c.material.gamma.clear();
  c.data.kind = "plane";
  PlaneWave a, b;
  a.m = {1, 0, 0};
  a.amp = 0.02;
  a.traveling = true;
  b.m = {0, 1, 2};
  b.longitudinal = false;
  b.amp = 0.01;
  b.traveling = true;
  c.data.waves = {a, b};
  return c;
}

RunConfig with_dt_fraction(RunConfig c, int fraction) {
  const State s0 = initial_state(c);
  const int steps = int(std::ceil(c.time.t_end / cfl_dt(s0, c.material, c.time.cfl_safety))) * fraction;
  c.time.dt = c.time.t_end / steps;
  c.time.out_every = 1;
  return c;
}

// Nonlinear baseline runs at dt = cfl/4 and cfl/8, shared by several tests.
const Trajectory& baseline(int fraction) {
  static std::map<int, Trajectory> cache;
  auto it = cache.find(fraction);
  if (it != cache.end()) return it->second;
  RunConfig c;
  c.time.t_end = 0.25;
  return cache.emplace(fraction, simulate(with_dt_fraction(c, fraction))).first->second;
}

double max_finite(const std::vector<double>& v) {
  double m = 0;
  for (double x : v)
    if (!std::isnan(x)) m = std::max(m, x);
  return m;
}

}  // namespace

TEST_CASE("energy-momentum tensor") {
  const Mat4 g = flat_metric(1.0, false), gi = flat_metric(1.0, true);
  const Mat4 zero = energy_momentum({0, 0, 0, 0}, g, gi);
  for (const auto& row : zero)
    for (double v : row) REQUIRE(v == 0);
  // phi = t
  REQUIRE(energy_momentum({1, 0, 0, 0}, g, gi)[0][0] == Approx(0.5));
  // trace identity on random curved metrics
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Mat4 gm = flat_metric(1.0 + 0.5 * u(rng), false);
    for (int a = 1; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) gm[a][b] = gm[b][a] = 0.1 * u(rng);
    const Mat4 gmi = inverse4(gm);
    const Vec4 d{u(rng), u(rng), u(rng), u(rng)};
    const Mat4 q = energy_momentum(d, gm, gmi);
    double tr = 0, q2 = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        tr += gmi[a][b] * q[a][b];
        q2 += gmi[a][b] * d[a] * d[b];
      }
    REQUIRE(std::abs(tr + q2) <= 1e-10);
  }
}

TEST_CASE("energy-momentum field from snapshots") {
  const Grid3 g(8, 2 * pi);
  FieldSeries phi;
  MetricSeries m;
  for (int s = 0; s < 5; ++s) {
    const double t = 0.1 * s;
    phi.times.push_back(t);
    phi.fields.push_back(sample(g, Rank::scalar, [&](double, double, double, double* o) { o[0] = t; }));
    m.times.push_back(t);
    m.g.push_back(sample(g, Rank::matrix3x3, [](double, double, double, double* o) {
      for (int c = 0; c < 9; ++c) o[c] = c % 4 == 0 ? 1.0 : 0.0;
    }));
  }
  for (std::size_t s : {0u, 2u, 4u}) {
    const std::vector<Mat4> q = energy_momentum_field(phi, m, s);
    REQUIRE(q[17][0][0] == Approx(0.5).epsilon(1e-12));
    REQUIRE(q[17][1][1] == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("standard energy") {
  RunConfig c;
  const State zero{Field(c.grid, Rank::vector3), Field(c.grid, Rank::vector3), 0};
  REQUIRE(standard_energy(zero, c.material).total == 0);

  SECTION("linear traveling waves conserve it") {
    RunConfig lin = traveling_linear();
    const Trajectory tr = simulate(with_dt_fraction(lin, 4));
    REQUIRE(tr.completed());
    const double e0 = standard_energy(tr.snapshots.front(), lin.material).total;
    double drift = 0;
    for (const State& s : tr.snapshots)
      drift = std::max(drift, std::abs(standard_energy(s, lin.material).total - e0) / e0);
    INFO("drift " << drift);
    REQUIRE(drift <= 1e-8);
    const EnergyFit fit = energy_inequality_fit(tr);
    REQUIRE_FALSE(fit.degenerate);
    REQUIRE(fit.c_fit <= 1e-8);
  }

  SECTION("coercive against H^1 x L^2") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      RunConfig r;
      r.data.seed = seed;
      r.data.v_init = "rough";
      r.data.amp_div = 0.02 * double(seed);
      r.data.amp_curl = 0.01 * double(seed);
      const State s = initial_state(r);
      const double e = standard_energy(s, r.material).total;
      const double h1 = sobolev_norm(s.u, 1.0), l2 = l2_norm(s.v);
      const double ratio = e / (h1 * h1 + l2 * l2);
      REQUIRE(ratio >= 0.2);
      REQUIRE(ratio <= 5);
    }
  }
}

TEST_CASE("energy inequality fit") {
  RunConfig z;
  z.data.amp_div = z.data.amp_curl = 0;
  z.time.t_end = 0.1;
  REQUIRE(energy_inequality_fit(simulate(z)).degenerate);

  // nonlinear data with an independent rough velocity, Delta t halving
  RunConfig c;
  c.data.v_init = "rough";
  const EnergyFit a = energy_inequality_fit(simulate(with_dt_fraction(c, 1)));
  RunConfig h = with_dt_fraction(c, 2);
  h.time.out_every = 2;
  const EnergyFit b = energy_inequality_fit(simulate(h));
  INFO("c_fit " << a.c_fit << " halved " << b.c_fit);
  REQUIRE(std::isfinite(a.c_fit));
  REQUIRE(a.c_fit > 0);
  REQUIRE(std::abs(b.c_fit - a.c_fit) <= 0.2 * a.c_fit);
  REQUIRE(a.times == b.times);
}

TEST_CASE("decoupling monitor") {
  SECTION("pseudo-irrotational data") {
    RunConfig c;
    c.data.amp_curl = 0;
    c.time.t_end = 0.5;
    const Trajectory tr = simulate(c);
    const double h2 = sobolev_norm(tr.snapshots.front().u, 2.0);
    for (const DecouplingRow& r : decoupling_monitor(tr)) REQUIRE(r.curl_h1 <= 1e-6 * h2);
  }
  SECTION("generic data show O(1) curl and a convergent curl-sector residual") {
    const std::vector<DecouplingRow> a = decoupling_monitor(baseline(4));
    const std::vector<DecouplingRow> b = decoupling_monitor(baseline(8));
    const double h2 = sobolev_norm(baseline(4).snapshots.front().u, 2.0);
    for (const DecouplingRow& r : a) REQUIRE(r.curl_h1 > 1e-2 * h2);
    std::vector<double> ra, rb;
    for (const auto& r : a) ra.push_back(r.psi_residual);
    for (const auto& r : b) rb.push_back(r.psi_residual);
    INFO("psi residual " << max_finite(ra) << " halved " << max_finite(rb));
    REQUIRE(max_finite(ra) >= 4 * max_finite(rb));
    REQUIRE(b.back().psi_gap < a.back().psi_gap);
  }
}

TEST_CASE("divergence-part residual") {
  SECTION("linear runs") {
    // plane waves at cfl/4
    RunConfig p = traveling_linear();
    p.data.waves[1].traveling = false;
    p.time.t_end = 0.25;
    for (const ResidualRow& r : divpart_residual(simulate(with_dt_fraction(p, 4))))
      if (!std::isnan(r.residual)) REQUIRE(r.residual <= 1e-6);
    // rough data: the floor is the integrator error, below 1e-6 from cfl/16 on
    RunConfig c;
    c.material.gamma.clear();
    c.time.t_end = 0.1;
    double worst = 0;
    for (const ResidualRow& r : divpart_residual(simulate(with_dt_fraction(c, 16))))
      if (!std::isnan(r.residual)) worst = std::max(worst, r.residual);
    INFO("rough linear residual " << worst);
    REQUIRE(worst <= 1e-6);
  }
  SECTION("nonlinear self-consistency, refinement and mutation") {
    const auto a = divpart_residual(baseline(4));
    const auto b = divpart_residual(baseline(8));
    const auto m = divpart_residual(baseline(4), true);
    double ra = 0, rb = 0, rm = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (!std::isnan(a[k].residual)) {
        ra = std::max(ra, a[k].residual / a[k].scale);
        rm = std::max(rm, m[k].residual / m[k].scale);
      }
    for (const auto& r : b)
      if (!std::isnan(r.residual)) rb = std::max(rb, r.residual / r.scale);
    INFO("relative residual " << ra << " refined " << rb << " mutated " << rm);
    REQUIRE(ra <= 1e-3);
    REQUIRE(rb < ra);
    REQUIRE(rm >= 100 * ra);
  }
}

TEST_CASE("strichartz-type norms") {
  RunConfig c;
  Trajectory zero;
  zero.config = c;
  for (int k = 0; k < 3; ++k)
    zero.snapshots.push_back({Field(c.grid, Rank::vector3), Field(c.grid, Rank::vector3), 0.1 * k});
  for (const EnergyRecord& r : strichartz_norms(zero)) {
    REQUIRE(r.strichartz_partial == 0);
    REQUIRE(r.lp_weighted == 0);
    REQUIRE(r.e_std == 0);
  }

  // single dyadic band: weighted sum tracks nu0^(2 delta0) times the plain one
  const double nu0 = 4, delta0 = 0.3;
  Trajectory band;
  band.config = c;
  band.config.material.gamma.clear();
  Field u = lp_project(rough_random_field(c.grid, 1.0, 1.0, 11, Rank::vector3), LPBand(nu0));
  for (int k = 0; k < 3; ++k) band.snapshots.push_back({u, Field(c.grid, Rank::vector3), 0.1 * k});
  const std::vector<EnergyRecord> rec = strichartz_norms(band, delta0);
  const double ratio = rec.back().lp_weighted / (std::pow(nu0, 2 * delta0) * rec.back().strichartz_partial);
  INFO("ratio " << ratio);
  REQUIRE(ratio >= 0.5);
  REQUIRE(ratio <= 2.0);

  const std::vector<EnergyRecord> run = strichartz_norms(baseline(4));
  for (std::size_t k = 1; k < run.size(); ++k) {
    REQUIRE(run[k].strichartz_partial >= run[k - 1].strichartz_partial);
    REQUIRE(run[k].lp_weighted >= run[k - 1].lp_weighted);
  }
}

TEST_CASE("diagnostics csv is a pure function of the trajectory") {
  RunConfig c;
  c.time.t_end = 0.3;
  const Trajectory tr = simulate(c);
  const std::string a = diagnostics_csv(build_diagnostics(tr));
  const std::string b = diagnostics_csv(build_diagnostics(tr));
  REQUIRE(a == b);
  REQUIRE(a.rfind("t,E_std,E_kin,H2.1_div", 0) == 0);
  REQUIRE(std::count(a.begin(), a.end(), '\n') == long(tr.snapshots.size()) + 1);
}
