#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ewlab/geometry.hpp"
#include "ewlab/parallel.hpp"

using namespace ewlab;
constexpr double pi = std::numbers::pi;

namespace {

double frw_a(double t) { return 1 + 0.3 * t + 0.2 * t * t; }
double frw_da(double t) { return 0.3 + 0.4 * t; }
double frw_dda(double) { return 0.4; }

std::unique_ptr<SpacetimeMetric> frw() { return frw_metric(frw_a, frw_da, frw_dda); }

// Smooth curved run used by the geometric checks (band limit 2).
const Trajectory& curved_run() {
  static const Trajectory tr = [] {
    RunConfig c;
    c.data.kmax = 2;
    c.time.t_end = 1.0;
    c.time.out_every = 1;
    return simulate(c);
  }();
  return tr;
}

const TrajectoryMetric& curved_metric() {
  static const TrajectoryMetric m(curved_run());
  return m;
}

const Vec4 kCurvedTip{0, pi, pi, pi};

struct Residuals {
  double base, refined, dropped;
};

const Residuals& curved_raychaudhuri() {
  static const Residuals r = [] {
    const auto& m = curved_metric();
    GeodesicBundle b = trace_bundle(m, kCurvedTip, 642, 0.05);
    connection_coefficients(b, m);
    GeodesicBundle f = trace_bundle(m, kCurvedTip, 2562, 0.025);
    connection_coefficients(f, m);
    return Residuals{raychaudhuri_residual(b).max_abs, raychaudhuri_residual(f).max_abs,
                     raychaudhuri_residual(b, true).max_abs};
  }();
  return r;
}

GeodesicBundle& curved_bundle() {
  static GeodesicBundle b = [] {
    GeodesicBundle bb = trace_bundle(curved_metric(), kCurvedTip, 642, 0.05);
    connection_coefficients(bb, curved_metric());
    return bb;
  }();
  return b;
}

// Plane wave cos(k.x - w t + p) with gradient (d_t, d_x, d_y, d_z).
AnalyticScalar plane_scalar(Vec3 k, double w, double p) {
  return AnalyticScalar([=](const Vec4& x, double& v, Vec4& d) {
    const double th = k[0] * x[1] + k[1] * x[2] + k[2] * x[3] - w * x[0] + p;
    v = std::cos(th);
    const double s = std::sin(th);
    d = {w * s, -k[0] * s, -k[1] * s, -k[2] * s};
  });
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2 / ((1 - z * z) * dp * dp);
  }
}

}  // namespace

TEST_CASE("quintic spacetime spline", "[geometry][spline]") {
  auto F = [](double t, double x, double y, double z) {
    return std::sin(x) * std::cos(2 * y) * (1 + 0.5 * std::sin(z)) * std::exp(0.3 * t);
  };
  auto build = [&](int n) {
    Grid3 g(n, 2 * pi);
    auto samples = [&](double t, int d) {
      SpacetimeSpline::Samples s(g.points());
      const double f = std::pow(0.3, d);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) s[g.index(i, j, k)] = f * F(t, g.coord(i), g.coord(j), g.coord(k));
      return s;
    };
    std::vector<SpacetimeSpline::Samples> v;
    for (int s = 0; s <= 10; ++s) v.push_back(samples(0.1 * s, 0));
    return SpacetimeSpline(g, 1, 0.0, 0.1, v, {samples(0, 1), samples(0, 2), samples(1, 1), samples(1, 2)});
  };
  const SpacetimeSpline s16 = build(16), s32 = build(32);

  SECTION("interpolates stored samples exactly") {
    const Grid3& g = s32.grid();
    double v;
    s32.eval({0.3, g.coord(3), g.coord(5), g.coord(30)}, 0, &v, nullptr, nullptr);
    CHECK(std::abs(v - F(0.3, g.coord(3), g.coord(5), g.coord(30))) < 1e-13);
  }
  SECTION("high-order convergence of values and derivatives") {
    auto err = [&](const SpacetimeSpline& s) {
      double e = 0;
      for (int q = 0; q < 100; ++q) {
        const double t = std::fmod(q * 0.0137, 1.0), x = q * 0.377, y = q * 0.913, z = q * 1.71;
        double v, d1[4], d2[16];
        s.eval({t, x, y, z}, 2, &v, d1, d2);
        const double fx = std::cos(x) * std::cos(2 * y) * (1 + 0.5 * std::sin(z)) * std::exp(0.3 * t);
        const double fxx = -F(t, x, y, z);
        e = std::max({e, std::abs(v - F(t, x, y, z)), std::abs(d1[1] - fx), std::abs(d1[0] - 0.3 * F(t, x, y, z)),
                      std::abs(d2[5] - fxx), std::abs(d2[1] - 0.3 * fx)});
      }
      return e;
    };
    const double e16 = err(s16), e32 = err(s32);
    CHECK(e32 < 1e-5);
    CHECK(e16 / e32 > 16);
  }
  SECTION("rejects a single time sample") {
    Grid3 g(8, 2 * pi);
    SpacetimeSpline::Samples z(g.points(), 0.0);
    CHECK_THROWS_AS(SpacetimeSpline(g, 1, 0, 0.1, {z}, {z, z, z, z}), ContractViolation);
  }
}

TEST_CASE("icosphere", "[geometry]") {
  for (int l = 0; l <= 3; ++l) {
    const Icosphere s = make_icosphere(l);
    CHECK(int(s.vertices.size()) == icosphere_count(l));
    CHECK(s.faces.size() == std::size_t(20) << (2 * l));
    for (std::size_t v = 0; v < s.vertices.size(); ++v) {
      CHECK((s.ring1[v].size() == 5 || s.ring1[v].size() == 6));
      CHECK(s.ring2[v].size() >= (l == 0 ? 10u : 15u));
    }
  }
  CHECK(icosphere_count(3) == 642);
  CHECK(icosphere_level(642) == 3);
  CHECK(icosphere_level(600) == 3);
  CHECK(icosphere_level(2000) == 4);
  FlatMetric m(1.0);
  GeodesicBundle coarse = trace_bundle(m, {0, 0, 0, 0}, 12, 0.1, 0.3);
  CHECK_THROWS_AS(connection_coefficients(coarse, m), InputError);
}

TEST_CASE("flat cone", "[geometry][flat]") {
  const Vec4 tip{0.2, 1, 2, 3};
  for (double c1 : {0.5, 1.0, 2.0}) {
    CAPTURE(c1);
    FlatMetric m(c1);
    GeodesicBundle b = trace_bundle(m, tip, 642, 0.05, 1.2);
    connection_coefficients(b, m);
    double straight = 0, speed = 0, tr = 0, z = 0, sig = 0, hat = 0, zeta = 0, k = 0, sym = 0;
    for (const Ray& r : b.rays)
      for (const RaySample& s : r.samples) {
        const double rt = s.t - tip[0];
        for (int i = 0; i < 3; ++i) straight = std::max(straight, std::abs(s.x[i] - tip[i + 1] - c1 * r.omega[i] * rt));
        speed = std::max(speed, std::abs(std::sqrt(s.n[0] * s.n[0] + s.n[1] * s.n[1] + s.n[2] * s.n[2]) - c1));
        sig = std::max(sig, std::abs(s.sigma));
        if (!s.has_coeffs || rt < 0.1) continue;
        tr = std::max(tr, std::abs(s.trchi * rt - 2));
        z = std::max(z, std::abs(s.z));
        hat = std::max(hat, s.chi_hat_sq);
        zeta = std::max({zeta, std::abs(s.zeta[0]), std::abs(s.zeta[1])});
        k = std::max(k, std::abs(s.k_nn));
        sym = std::max(sym, std::abs(s.chi[0][1] - s.chi[1][0]));
      }
    CHECK(straight < 1e-10);
    CHECK(speed < 1e-12);
    CHECK(tr < 1e-4);
    CHECK(z < 1e-4);
    CHECK(sig < 1e-10);
    CHECK(hat < 1e-8);
    CHECK(zeta < 1e-8);
    CHECK(k == 0.0);
    CHECK(sym < 1e-6);
    CHECK(b.crossings == 0);
    CHECK(raychaudhuri_residual(b).max_abs < 1e-6);
    CHECK(frame_identities(b).max_dev < 1e-12);
  }
}

TEST_CASE("null frame", "[geometry][frame]") {
  SECTION("flat metric, direction along x") {
    const Mat3 g{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 e[2];
    CHECK_FALSE(sphere_tangents(g, {1, 0, 0}, nullptr, e));
    for (const Vec3& v : e) {
      CHECK(v[0] == 0.0);
      CHECK(v[1] * v[1] + v[2] * v[2] == Catch::Approx(1.0).epsilon(1e-14));
    }
    RaySample s;
    s.n = {1, 0, 0};
    const NullFrame f = null_frame(s);
    CHECK(f.N == Vec4{0, 1, 0, 0});
    CHECK(f.L == Vec4{1, 1, 0, 0});
    CHECK(f.Lbar == Vec4{1, -1, 0, 0});
  }
  SECTION("collapsed seed is reseeded and flagged") {
    const Mat3 g{{{4, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    const Vec3 prev[2] = {{0.5, 0, 0}, {0, 1, 0}};  // first seed parallel to N
    Vec3 e[2];
    CHECK(sphere_tangents(g, {0.5, 0, 0}, prev, e));
    for (const Vec3& v : e) CHECK(std::abs(4 * v[0] * 0.5) < 1e-14);
  }
  SECTION("Lbar is null on the flat cone") {
    FlatMetric m(1.0);
    GeodesicBundle b = trace_bundle(m, {0, 0, 0, 0}, 162, 0.1, 0.5);
    CHECK(frame_identities(b).max_lbar_null < 1e-12);
    for (const Ray& r : b.rays) CHECK_FALSE(r.reseeded);
  }
}

TEST_CASE("sigma transport is additive", "[geometry][sigma]") {
  auto m = frw();
  GeodesicBundle whole = trace_bundle(*m, {0, 0, 0, 0}, 162, 0.05, 1.0);
  GeodesicBundle split = trace_bundle(*m, {0, 0, 0, 0}, 162, 0.05, 0.5);
  extend_bundle(split, *m, 1.0);
  REQUIRE(whole.steps() == split.steps());
  double d = 0, mag = 0;
  for (std::size_t r = 0; r < whole.rays.size(); ++r) {
    d = std::max(d, std::abs(whole.rays[r].samples.back().sigma - split.rays[r].samples.back().sigma));
    mag = std::max(mag, std::abs(whole.rays[r].samples.back().sigma));
  }
  CHECK(mag > 0.1);  // sigma is not trivially zero here
  CHECK(d < 1e-10);
}

TEST_CASE("Ricci curvature", "[geometry][ricci]") {
  SECTION("flat metric") {
    FlatMetric m(1.3);
    const Mat4 R = ricci(m.jet({0.1, 1, 2, 3}, 2));
    for (const auto& row : R)
      for (double v : row) CHECK(std::abs(v) < 1e-8);
    CHECK(std::abs(ricci_LL(m, {0, 0, 0, 0}, {1, 1.3, 0, 0}).value) < 1e-8);
  }
  SECTION("expanding toy metric against the closed form") {
    auto m = frw();
    for (double t : {0.0, 0.4, 1.1}) {
      const Mat4 R = ricci(m->jet({t, 0.3, 0.2, 0.1}, 2));
      const double a = frw_a(t), da = frw_da(t), dda = frw_dda(t);
      CHECK(std::abs(R[0][0] + 3 * dda / a) < 1e-4);
      for (int i = 1; i < 4; ++i) CHECK(std::abs(R[i][i] - (a * dda + 2 * da * da)) < 1e-4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          CHECK(std::abs(R[i][j] - R[j][i]) < 1e-8);
          if (i != j) CHECK(std::abs(R[i][j]) < 1e-10);
        }
      // Ric(L, L) for a null L with unit spatial g-length: -2 a''/a + 2 a'^2/a^2
      const Vec4 L{1, 1 / a, 0, 0};
      CHECK(std::abs(ricci_LL(*m, {t, 0, 0, 0}, L).value - (-2 * dda / a + 2 * da * da / (a * a))) < 1e-4);
    }
  }
  SECTION("spline-resampled toy metric keeps the curvature") {
    Grid3 g(8, 2 * pi);
    auto fill = [&](double v) {
      SpacetimeSpline::Samples s(6 * g.points(), 0.0);
      for (int c : {0, 3, 5}) std::fill(s.begin() + c * g.points(), s.begin() + (c + 1) * g.points(), v);
      return s;
    };
    std::vector<SpacetimeSpline::Samples> vals;
    const double h = 0.1;
    for (int k = 0; k <= 12; ++k) vals.push_back(fill(frw_a(k * h) * frw_a(k * h)));
    auto a2d = [](double t) { return 2 * frw_a(t) * frw_da(t); };
    auto a2dd = [](double t) { return 2 * (frw_da(t) * frw_da(t) + frw_a(t) * frw_dda(t)); };
    const SpacetimeSpline sp(g, 6, 0.0, h, vals, {fill(a2d(0)), fill(a2dd(0)), fill(a2d(1.2)), fill(a2dd(1.2))});
    AnalyticMetric m([&](const Vec4& x, int order) {
      double v[6], d1[24], d2[96];
      sp.eval(x, order, v, d1, d2);
      static constexpr int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
      MetricJet j;
      j.g[0][0] = -1;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
          const int c = idx[i][k];
          j.g[i + 1][k + 1] = v[c];
          for (int a = 0; a < 4 && order >= 1; ++a) j.dg[a][i + 1][k + 1] = d1[4 * c + a];
          for (int a = 0; a < 4 && order >= 2; ++a)
            for (int b = 0; b < 4; ++b) j.ddg[a][b][i + 1][k + 1] = d2[16 * c + 4 * a + b];
        }
      j.has_second = order >= 2;
      return j;
    });
    for (double t : {0.05, 0.55, 1.13}) {
      const Mat4 R = ricci(m.jet({t, 0.7, 1.1, 2.9}, 2));
      const double a = frw_a(t), da = frw_da(t), dda = frw_dda(t);
      CHECK(std::abs(R[0][0] + 3 * dda / a) < 1e-4);
      CHECK(std::abs(R[2][2] - (a * dda + 2 * da * da)) < 1e-4);
    }
  }
}

TEST_CASE("Raychaudhuri residual on the expanding toy metric", "[geometry][raychaudhuri]") {
  auto m = frw();
  GeodesicBundle b = trace_bundle(*m, {0, 0, 0, 0}, 642, 0.05, 1.0);
  connection_coefficients(b, *m);
  GeodesicBundle f = trace_bundle(*m, {0, 0, 0, 0}, 2562, 0.025, 1.0);
  connection_coefficients(f, *m);
  const auto rb = raychaudhuri_residual(b), rf = raychaudhuri_residual(f);
  const auto drop = raychaudhuri_residual(b, true);
  CHECK(rb.max_abs < 1e-2);
  CHECK(rb.max_abs / rf.max_abs >= 4);
  CHECK(drop.max_abs / rb.max_abs >= 10);
  // both chi routes and chi symmetry are exact on this metric
  double routes = 0, sym = 0;
  for (const Ray& r : b.rays)
    for (const RaySample& s : r.samples) {
      if (!s.has_coeffs) continue;
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) routes = std::max(routes, std::abs(s.chi[a][c] - s.chi_alt[a][c]));
      sym = std::max(sym, std::abs(s.chi[0][1] - s.chi[1][0]));
    }
  CHECK(routes < 1e-10);
  CHECK(sym < 1e-6);
}

TEST_CASE("trajectory metric", "[geometry][trajectory]") {
  const Trajectory& tr = curved_run();
  REQUIRE(tr.completed());
  const auto& m = curved_metric();
  const MetricSeries ms = trajectory_metric(tr);
  const Grid3& g = tr.snapshots[0].u.grid();
  SECTION("stored values are reproduced at nodes") {
    double err = 0;
    for (std::size_t s : {std::size_t(0), ms.times.size() / 2, ms.times.size() - 1})
      for (int i : {0, 7, 19})
        for (int j : {3, 30}) {
          const MetricJet jt = m.jet({ms.times[s], g.coord(i), g.coord(j), g.coord(5)}, 0);
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) err = std::max(err, std::abs(jt.g[a + 1][b + 1] - ms.g[s].at(3 * a + b, i, j, 5)));
        }
    CHECK(err < 1e-12);
  }
  SECTION("time derivative agrees with the material rate") {
    const std::size_t s = ms.times.size() / 2;
    const Field rate = spatial_metric_rate(gradient(tr.snapshots[s].u), gradient(tr.snapshots[s].v), tr.config.material);
    double err = 0, mag = 0;
    for (int i : {1, 11, 22})
      for (int j : {4, 17}) {
        const MetricJet jt = m.jet({ms.times[s], g.coord(i), g.coord(j), g.coord(9)}, 1);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            err = std::max(err, std::abs(jt.dg[0][a + 1][b + 1] - rate.at(3 * a + b, i, j, 9)));
            mag = std::max(mag, std::abs(rate.at(3 * a + b, i, j, 9)));
          }
      }
    CHECK(mag > 1e-3);
    CHECK(err < 1e-3 * mag);
  }
  SECTION("coverage") {
    CHECK(m.t_begin() == 0.0);
    CHECK(m.t_end() == Catch::Approx(1.0));
    CHECK_THROWS_AS(trace_bundle(m, {1.5, 0, 0, 0}, 42, 0.05), InputError);
    GeodesicBundle b = trace_bundle(m, {0.8, 0, 0, 0}, 42, 0.05, 2.0);
    CHECK(b.truncated);
    CHECK(b.rays[0].samples.back().t <= 1.0 + 1e-12);
  }
}

TEST_CASE("curved cone geometry", "[geometry][curved]") {
  const auto& m = curved_metric();
  SECTION("null drift is small and fourth order") {
    auto drift_at = [&](double dt) {
      GeodesicBundle b = trace_bundle(m, kCurvedTip, 162, dt, 0.5);
      double d = 0;
      for (const Ray& r : b.rays) d = std::max(d, std::abs(r.samples.back().null_drift));
      return d;
    };
    const double d1 = drift_at(0.1), d2 = drift_at(0.05);
    CHECK(d2 <= 1e-6);
    CHECK(d1 / d2 >= 12);
    CHECK(d1 / d2 <= 20);
  }
  GeodesicBundle& b = curved_bundle();
  SECTION("frame identities") {
    CHECK(frame_identities(b).max_dev < 1e-6);
    CHECK(frame_identities(b).max_lbar_null < 1e-6);
  }
  SECTION("two chi routes agree and z stays bounded") {
    double routes = 0, sym = 0, zr = 0;
    for (const Ray& r : b.rays)
      for (const RaySample& s : r.samples) {
        if (!s.has_coeffs || s.t - kCurvedTip[0] < tip_exclusion(b)) continue;
        for (int a = 0; a < 2; ++a)
          for (int c = 0; c < 2; ++c) routes = std::max(routes, std::abs(s.chi[a][c] - s.chi_alt[a][c]));
        sym = std::max(sym, std::abs(s.chi[0][1] - s.chi[1][0]));
        zr = std::max(zr, std::abs(s.z) * std::sqrt(s.t - kCurvedTip[0]));
      }
    CHECK(routes < 1e-4);
    CHECK(sym < 1e-4);  // asymmetry is angular discretization error here
    CHECK(zr < 1.0);
    CHECK(b.crossings == 0);
  }
  SECTION("Raychaudhuri residual") {
    const Residuals& r = curved_raychaudhuri();
    CHECK(r.base <= 1e-3);
    CHECK(r.base / r.refined >= 4);
    CHECK(r.dropped / r.base >= 10);
  }
  SECTION("h-spacelike cone") {
    const HSpacelikeResult h = h_spacelike_check(b, curved_run().config.material);
    CHECK(h.ok);
    CHECK(h.min_H > 0);
    CHECK(h.max_normalization_error < 1e-8);
    CHECK(h.margin_consistent);
  }
}

TEST_CASE("h-spacelike check on the flat cone", "[geometry][hspacelike]") {
  MaterialSpec spec;  // c1 = 1, c2 = 0.5
  FlatMetric m(spec.c1);
  GeodesicBundle b = trace_bundle(m, {0, 0, 0, 0}, 162, 0.1, 0.5);
  const HSpacelikeResult h = h_spacelike_check(b, spec);
  CHECK(h.ok);
  CHECK(std::abs(h.min_H - 3.0) < 1e-12);
  CHECK(std::abs(h.min_cov + 0.75) < 1e-10);
  CHECK(std::abs(h.max_cov + 0.75) < 1e-10);
  for (const Ray& r : b.rays)
    for (const RaySample& s : r.samples) CHECK(std::abs(s.V[0] - 1 / std::sqrt(0.75)) < 1e-8);
  CHECK(h.max_normalization_error < 1e-8);

  SECTION("equal speeds make the cone h-null") {
    MaterialSpec eq = spec;
    eq.c2 = 1.0;
    GeodesicBundle b2 = trace_bundle(m, {0, 0, 0, 0}, 42, 0.1, 0.3);
    const HSpacelikeResult h2 = h_spacelike_check(b2, eq);
    CHECK_FALSE(h2.ok);
    CHECK(h2.failures > 0);
  }
}

TEST_CASE("null fluxes", "[geometry][flux]") {
  MaterialSpec spec;
  FlatMetric m(spec.c1);
  const Vec4 tip{0, 0.5, 0.2, 0.1};
  GeodesicBundle b = trace_bundle(m, tip, 642, 0.05, 1.0);

  SECTION("constant field has zero flux") {
    AnalyticScalar c([](const Vec4&, double& v, Vec4& d) {
      v = 2.5;
      d = {0, 0, 0, 0};
    });
    const FluxResult f = null_fluxes(b, c, spec);
    CHECK(f.F1 == 0.0);
    CHECK(f.F2 == 0.0);
  }
  SECTION("plane wave against a dense quadrature of the exact cone") {
    const Vec3 k{1, 2, 0};
    const double w = spec.c2 * std::sqrt(5.0);
    const AnalyticScalar f = plane_scalar(k, w, 0.3);
    const FluxResult got = null_fluxes(b, f, spec);
    const double rmin = std::max(2 * b.spacing, 2 * b.dt), T = 1.0, c1 = spec.c1, c2 = spec.c2;
    std::vector<double> xt, wt, xc, wc;
    gauss_legendre(40, xt, wt);
    gauss_legendre(60, xc, wc);
    const int nphi = 120;
    double F1 = 0, F2 = 0, D = 0;
    const double s = std::sqrt(c1 * c1 - c2 * c2);
    for (int it = 0; it < 40; ++it) {
      const double r = rmin + (T - rmin) * (xt[it] + 1) / 2;
      for (int ic = 0; ic < 60; ++ic)
        for (int ip = 0; ip < nphi; ++ip) {
          const double ct = xc[ic], st = std::sqrt(1 - ct * ct), ph = 2 * pi * ip / nphi;
          const Vec3 om{st * std::cos(ph), st * std::sin(ph), ct};
          double v;
          Vec4 d;
          f.eval({tip[0] + r, tip[1] + c1 * r * om[0], tip[2] + c1 * r * om[1], tip[3] + c1 * r * om[2]}, v, d);
          const double gn = om[0] * d[1] + om[1] * d[2] + om[2] * d[3];
          const double g2 = d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
          const double area = r * r * wc[ic] * 2 * pi / nphi * wt[it] * (T - rmin) / 2;
          const double lphi = d[0] + c1 * gn;
          F1 += area * (lphi * lphi + c1 * c1 * (g2 - gn * gn));
          const double v0 = c1 / s, vphi = v0 * d[0] + c2 * c2 / s * gn;
          F2 += area * (d[0] * vphi + 0.5 * v0 * (-d[0] * d[0] + c2 * c2 * g2));
          D += area * (d[0] * d[0] + g2);
        }
    }
    CHECK(std::abs(got.F1 / F1 - 1) < 0.02);
    CHECK(std::abs(got.F2 / F2 - 1) < 0.02);
    CHECK(std::abs(got.denom / D - 1) < 0.02);
    CHECK(got.coercive_ratio >= 0.1);
    CHECK(got.coercive_ratio <= 10);
  }
  SECTION("curl part of a curved run is coercive") {
    GeodesicBundle& cb = curved_bundle();
    const TrajectoryScalar psi(curved_run(), FieldPart::psi, 1);
    const FluxResult f = null_fluxes(cb, psi, curved_run().config.material);
    CHECK(f.F1 > 0);
    CHECK(f.coercive_ratio >= 0.1);
    CHECK(f.coercive_ratio <= 10);
    CHECK(f.excluded_steps > 0);
  }
}

TEST_CASE("thread count does not change the bundle", "[geometry][parallel]") {
  auto m = frw();
  setenv("EWLAB_THREADS", "1", 1);
  GeodesicBundle a = trace_bundle(*m, {0, 0, 0, 0}, 162, 0.1, 0.6);
  setenv("EWLAB_THREADS", "3", 1);
  CHECK(thread_count() <= 3);
  GeodesicBundle b = trace_bundle(*m, {0, 0, 0, 0}, 162, 0.1, 0.6);
  unsetenv("EWLAB_THREADS");
  bool same = true;
  for (std::size_t r = 0; r < a.rays.size(); ++r)
    for (std::size_t k = 0; k < a.steps(); ++k)
      for (int i = 0; i < 3; ++i) same = same && a.rays[r].samples[k].x[i] == b.rays[r].samples[k].x[i];
  CHECK(same);
}
