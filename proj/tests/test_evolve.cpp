#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <numbers>

#include "ewlab/evolve.hpp"

using namespace ewlab;
using Catch::Approx;
constexpr double pi = std::numbers::pi;

namespace {

RunConfig linear_config() {
  RunConfig c;
  c.material.gamma.clear();
  return c;
}

RunConfig single_wave(bool longitudinal, std::array<int, 3> m = {1, 0, 0}) {
  RunConfig c = linear_config();
  c.data.kind = "plane";
  PlaneWave w;
  w.m = m;
  w.longitudinal = longitudinal;
  w.amp = 0.01;
  w.phase = 0.3;
  c.data.waves = {w};
  return c;
}

double rel_diff(const State& a, const State& b) {
  return std::max((a.u - b.u).max_abs() / a.u.max_abs(), (a.v - b.v).max_abs() / a.v.max_abs());
}

// one-period error of a standing plane wave advanced with n_steps RK4 steps
double period_error(const RunConfig& c, double omega, int n_steps) {
  const double T = 2 * pi / omega;
  State s = initial_state(c);
  // start from a phase where both U and V are nonzero
  s = exact_plane_solution(c, 0.1 * T);
  const State ref = s;
  const double dt = T / n_steps;
  REQUIRE(dt <= cfl_dt(s, c.material));
  for (int i = 0; i < n_steps; ++i) s = rk4_step(s, dt, c.material, false);
  return rel_diff(ref, s);
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig d = parse_config("{}");
  REQUIRE(d.grid.n() == 32);
  REQUIRE(d.kmax() == 8);
  REQUIRE(d.checks.size() == 2);
  REQUIRE_THROWS_AS(parse_config("{\"grid\": {\"n\": 32, \"bogus\": 1}}"), InputError);
  REQUIRE_THROWS_AS(parse_config("{\"grid\": "), InputError);
  REQUIRE_THROWS_AS(parse_config("{\"grid\": {\"n\": 30}}"), std::exception);
  REQUIRE_THROWS_AS(parse_config("{\"time\": {\"cfl_safety\": 0}}"), InputError);
  REQUIRE_THROWS_AS(parse_config("{\"data\": {\"kind\": \"plane\"}}"), InputError);
  REQUIRE_THROWS_AS(parse_config("{\"checks\": [\"nope\"]}"), InputError);
  const RunConfig c = parse_config(
      R"({"grid": {"n": 16}, "material": {"gamma": [0.2]}, "seed": 7,
          "data": {"kind": "plane", "waves": [{"m": [1, 2, 0], "pol": "trans", "amp": 0.02}]},
          "time": {"t_end": 0.5, "out_stride": 0.1}})");
  REQUIRE(c.grid.n() == 16);
  REQUIRE(c.data.seed == 7);
  REQUIRE(c.data.waves.size() == 1);
  REQUIRE_FALSE(c.data.waves[0].longitudinal);
  // dump is a fixed point and the hash tracks content
  const RunConfig r = parse_config(dump_config(c));
  REQUIRE(dump_config(r) == dump_config(c));
  REQUIRE(config_hash(r) == config_hash(c));
  RunConfig e = c;
  e.data.seed = 8;
  REQUIRE(config_hash(e) != config_hash(c));
  e = c;
  e.output_dir = "elsewhere";
  REQUIRE(config_hash(e) == config_hash(c));
}

TEST_CASE("cfl step") {
  RunConfig c;
  State zero{Field(c.grid, Rank::vector3), Field(c.grid, Rank::vector3), 0};
  REQUIRE(cfl_dt(zero, c.material) == Approx(0.4 * 2 * pi / 32).epsilon(1e-14));
  REQUIRE_THROWS_AS(cfl_dt(zero, c.material, 0.0), InputError);
  REQUIRE_THROWS_AS(cfl_dt(zero, c.material, -1.0), InputError);
  // monotone in amplitude along a fixed shape
  const Field shape = rough_random_field(c.grid, 1.0, 1.0, 3, Rank::vector3, 6);
  const double g0 = gradient(shape).max_abs();
  double prev = INFINITY;
  for (double a : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
    State s{(a / g0) * shape, Field(c.grid, Rank::vector3), 0};
    const double dt = cfl_dt(s, c.material);
    REQUIRE(dt <= prev * (1 + 1e-14));
    prev = dt;
  }
  REQUIRE(prev < 0.4 * 2 * pi / 32);
  // steps above the limit are refused
  REQUIRE_THROWS_AS(rk4_step(zero, 2 * cfl_dt(zero, c.material), c.material), ContractViolation);
}

TEST_CASE("zero state is a fixed point") {
  RunConfig c;
  State zero{Field(c.grid, Rank::vector3), Field(c.grid, Rank::vector3), 0};
  const State s = rk4_step(zero, 0.05, c.material);
  REQUIRE(s.u.max_abs() == 0);
  REQUIRE(s.v.max_abs() == 0);
  REQUIRE(s.t == Approx(0.05));
}

TEST_CASE("plane waves return after one period") {
  // transverse at c2, longitudinal at c1
  for (bool lon : {false, true}) {
    const RunConfig c = single_wave(lon);
    const double omega = lon ? c.material.c1 : c.material.c2;
    const double e512 = period_error(c, omega, 512);
    const double e256 = period_error(c, omega, 256);
    INFO("longitudinal " << lon << " e256 " << e256 << " e512 " << e512);
    REQUIRE(e512 <= 1e-6);
    const double ratio = e256 / e512;
    REQUIRE(ratio >= 12);
    REQUIRE(ratio <= 20);
  }
}

TEST_CASE("exact plane solution travels at the right speed") {
  RunConfig c = single_wave(true);
  c.data.waves[0].traveling = true;
  const State a = exact_plane_solution(c, 0.0);
  const State b = exact_plane_solution(c, 2 * pi / c.material.c1);
  REQUIRE((a.u - b.u).max_abs() < 1e-14);
  // V = d_t U by a centered difference
  const double h = 1e-4;
  const Field dudt = (1 / (2 * h)) * (exact_plane_solution(c, 0.3 + h).u - exact_plane_solution(c, 0.3 - h).u);
  REQUIRE((dudt - exact_plane_solution(c, 0.3).v).max_abs() < 1e-9);
}

TEST_CASE("superposed plane waves match the exact linear solution") {
  RunConfig c = linear_config();
  c.material.b_coef = 0;
  c.data.kind = "plane";
  PlaneWave a, b, d;
  a.m = {1, 0, 0};
  a.amp = 0.02;
  b.m = {0, 2, 1};
  b.longitudinal = false;
  b.amp = 0.01;
  b.traveling = true;
  d.m = {1, -1, 3};
  d.amp = 0.005;
  d.phase = 1.1;
  d.traveling = true;
  c.data.waves = {a, b, d};
  const Trajectory tr = simulate(c);
  REQUIRE(tr.completed());
  const State& last = tr.snapshots.back();
  REQUIRE(last.t == Approx(1.0));
  const State ex = exact_plane_solution(c, 1.0);
  const double err = std::max((last.u - ex.u).max_abs(), (last.v - ex.v).max_abs());
  INFO("err " << err);
  REQUIRE(err <= 1e-5);
}

TEST_CASE("nonlinear runs: stable small data, flagged huge data") {
  RunConfig c;
  const Trajectory tr = simulate(c);
  REQUIRE(tr.completed());
  REQUIRE(tr.snapshots.back().t == Approx(1.0));
  double worst = INFINITY;
  for (const SnapshotRow& r : tr.rows) worst = std::min(worst, r.hyper_margin);
  REQUIRE(worst > 0.5 * tr.initial_margin);
  // uniform stride
  for (std::size_t i = 1; i < tr.snapshots.size(); ++i)
    REQUIRE(tr.snapshots[i].t - tr.snapshots[i - 1].t == Approx(tr.dt * tr.out_every));

  RunConfig big;
  big.data.amp_div = big.data.amp_curl = 5;
  const Trajectory bt = simulate(big);
  REQUIRE(bt.failure);
  REQUIRE(bt.failure->cause == "hyperbolicity");
  REQUIRE(bt.failure->t < big.time.t_end);

  // forced runs carry on and keep a flag
  RunConfig forced = big;
  forced.force = true;
  forced.time.t_end = 0.02;
  forced.time.dt = 0.01;
  const Trajectory ft = simulate(forced);
  REQUIRE(ft.completed());
  REQUIRE_FALSE(ft.flagged.empty());
}

TEST_CASE("snapshot planning") {
  RunConfig c;
  c.time.out_stride = 0.25;
  const State s0 = initial_state(c);
  const StepPlan p = plan_steps(c, s0);
  REQUIRE(p.steps % p.out_every == 0);
  REQUIRE(p.steps / p.out_every == 4);
  REQUIRE(p.dt <= cfl_dt(s0, c.material, c.time.cfl_safety) * (1 + 1e-12));
  c.time.dt = 0.3;
  REQUIRE_THROWS_AS(plan_steps(c, s0), InputError);
  c.time.dt = 0.5;
  REQUIRE_THROWS_AS(plan_steps(c, s0), InputError);  // above CFL
}

TEST_CASE("decomposed evolution") {
  SECTION("curl-free data stay curl-free") {
    RunConfig c;
    c.data.amp_curl = 0;
    c.time.t_end = 1.0;
    const DecomposedRun r = simulate_decomposed(c);
    REQUIRE(r.full.completed());
    const double h2 = sobolev_norm(r.full.snapshots.front().u, 2.0);
    for (const DecomposedRow& row : r.rows) REQUIRE(row.curl_h1 <= 1e-6 * h2);
  }
  SECTION("div-free linear data keep phi at zero") {
    RunConfig c = linear_config();
    c.data.amp_div = 0;
    const DecomposedRun r = simulate_decomposed(c);
    for (const Field& phi : r.phi.fields) REQUIRE(phi.max_abs() <= 1e-8);
  }
  SECTION("psi sector follows the linear evolution") {
    RunConfig c;
    c.time.t_end = 0.5;
    const DecomposedRun r = simulate_decomposed(c);
    const double gap = r.rows.back().psi_gap;
    REQUIRE(r.rows.back().t == Approx(0.5));
    REQUIRE(gap <= 1e-4);
    RunConfig f = c;
    f.time.dt = r.full.dt / 2;
    const double gap_fine = simulate_decomposed(f).rows.back().psi_gap;
    INFO("gap " << gap << " fine " << gap_fine);
    REQUIRE(gap_fine < gap);
  }
}

TEST_CASE("runs are deterministic") {
  RunConfig c;
  c.time.t_end = 0.2;
  const Trajectory a = simulate(c), b = simulate(c);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    REQUIRE(std::memcmp(a.snapshots[i].u.data().data(), b.snapshots[i].u.data().data(),
                        a.snapshots[i].u.size() * sizeof(double)) == 0);
    REQUIRE(std::memcmp(a.snapshots[i].v.data().data(), b.snapshots[i].v.data().data(),
                        a.snapshots[i].v.size() * sizeof(double)) == 0);
  }
}
