#include "ewlab/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ewlab/parallel.hpp"
#include "ewlab/spectral.hpp"

namespace ewlab {

namespace {

constexpr int kSym[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
constexpr int kSymIndex[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
constexpr double kNullFlag = 1e-4;
// angular fits: full bivariate polynomial of this degree over the 2-ring
constexpr int kFitDegree = 4;

double gdot(const Mat3& g, const Vec3& a, const Vec3& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += g[i][j] * a[i] * b[j];
  return s;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Mat3 spatial_block(const MetricJet& j) {
  Mat3 g;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) g[a][b] = j.g[a + 1][b + 1];
  return g;
}

bool positive_definite(const Mat3& g) {
  const double m1 = g[0][0];
  const double m2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
  return m1 > 0 && m2 > 0 && det3(g) > 0;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

}  // namespace

MetricJet FlatMetric::jet(const Vec4&, int order) const {
  MetricJet j = flat_jet(c1_);
  j.has_second = order >= 2;
  return j;
}

std::unique_ptr<SpacetimeMetric> frw_metric(std::function<double(double)> a, std::function<double(double)> da,
                                            std::function<double(double)> dda) {
  return std::make_unique<AnalyticMetric>([a, da, dda](const Vec4& x, int order) {
    MetricJet j;
    const double t = x[0], av = a(t), ad = da(t), add = dda(t);
    j.g[0][0] = -1;
    for (int i = 1; i < 4; ++i) {
      j.g[i][i] = av * av;
      j.dg[0][i][i] = 2 * av * ad;
      j.ddg[0][0][i][i] = 2 * (ad * ad + av * add);
    }
    j.has_second = order >= 2;
    return j;
  });
}

void spatial_metric_jet_at(const double* m, const double* m_t, const double* m_tt, const MaterialSpec& spec,
                           Mat3& g, Mat3& g_t, Mat3& g_tt) {
  g = inverse3(spatial_inverse_metric_at(m, spec));
  Mat3 gi_t, gi_tt;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int ab = 3 * a + b, ba = 3 * b + a;
      gi_t[a][b] = 0.5 * (spec.gpp(m[ab]) * m_t[ab] + spec.gpp(m[ba]) * m_t[ba]);
      gi_tt[a][b] = 0.5 * (spec.gppp(m[ab]) * m_t[ab] * m_t[ab] + spec.gpp(m[ab]) * m_tt[ab] +
                           spec.gppp(m[ba]) * m_t[ba] * m_t[ba] + spec.gpp(m[ba]) * m_tt[ba]);
    }
  // g' = -g G' g, g'' = -g G'' g + 2 g G' g G' g
  const Mat3 gG = matmul(g, gi_t);
  const Mat3 first = matmul(gG, g);
  const Mat3 second = matmul(matmul(g, gi_tt), g);
  const Mat3 twice = matmul(gG, first);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      g_t[a][b] = -first[a][b];
      g_tt[a][b] = -second[a][b] + 2 * twice[a][b];
    }
}

namespace {

SpacetimeSpline build_metric_spline(const Trajectory& tr) {
  if (tr.snapshots.size() < 2) throw InputError("trajectory needs at least two snapshots for a metric");
  const MaterialSpec& spec = tr.config.material;
  const Grid3 grid = tr.snapshots[0].u.grid();
  const std::size_t np = grid.points();

  auto metric_values = [&](const State& s, SpacetimeSpline::Samples* g0, SpacetimeSpline::Samples* g1,
                           SpacetimeSpline::Samples* g2) {
    const Field m = gradient(s.u);
    Field mt(grid, Rank::matrix3x3), mtt(grid, Rank::matrix3x3);
    if (g1) {
      mt = gradient(s.v);
      mtt = gradient(acceleration(s.u, spec));
    }
    for (auto* out : {g0, g1, g2})
      if (out) out->assign(6 * np, 0.0);
    double a[9], b[9] = {}, c[9] = {};
    Mat3 g, gt, gtt;
    for (std::size_t p = 0; p < np; ++p) {
      for (int q = 0; q < 9; ++q) {
        a[q] = m.component(q)[p];
        if (g1) {
          b[q] = mt.component(q)[p];
          c[q] = mtt.component(q)[p];
        }
      }
      spatial_metric_jet_at(a, b, c, spec, g, gt, gtt);
      for (int q = 0; q < 6; ++q) {
        const int i = kSym[q][0], j = kSym[q][1];
        if (g0) (*g0)[q * np + p] = g[i][j];
        if (g1) (*g1)[q * np + p] = gt[i][j];
        if (g2) (*g2)[q * np + p] = gtt[i][j];
      }
    }
  };

  std::vector<SpacetimeSpline::Samples> values(tr.snapshots.size());
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s) metric_values(tr.snapshots[s], &values[s], nullptr, nullptr);
  SpacetimeSpline::Ends ends;
  SpacetimeSpline::Samples scratch;
  metric_values(tr.snapshots.front(), &scratch, &ends.d1_first, &ends.d2_first);
  metric_values(tr.snapshots.back(), &scratch, &ends.d1_last, &ends.d2_last);
  const double h = tr.snapshots[1].t - tr.snapshots[0].t;
  return SpacetimeSpline(grid, 6, tr.snapshots[0].t, h, values, ends);
}

}  // namespace

TrajectoryMetric::TrajectoryMetric(const Trajectory& tr) : spline_(build_metric_spline(tr)) {}

MetricJet TrajectoryMetric::jet(const Vec4& x, int order) const {
  double val[6], d1[24], d2[96];
  spline_.eval(x, order, val, d1, d2);
  MetricJet j;
  j.g[0][0] = -1;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      const int c = kSymIndex[i][k];
      j.g[i + 1][k + 1] = val[c];
      if (order >= 1)
        for (int a = 0; a < 4; ++a) j.dg[a][i + 1][k + 1] = d1[4 * c + a];
      if (order >= 2)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) j.ddg[a][b][i + 1][k + 1] = d2[16 * c + 4 * a + b];
    }
  j.has_second = order >= 2;
  return j;
}

// ---- icosphere

Icosphere make_icosphere(int level) {
  if (level < 0 || level > 7) throw InputError("icosphere level must be in [0, 7]");
  Icosphere s;
  const double p = (1 + std::sqrt(5.0)) / 2;
  const double base[12][3] = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                              {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  auto push = [&](Vec3 v) {
    const double r = std::sqrt(dot(v, v));
    s.vertices.push_back({v[0] / r, v[1] / r, v[2] / r});
    return int(s.vertices.size()) - 1;
  };
  for (const auto& b : base) push({b[0], b[1], b[2]});
  s.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const Vec3& x = s.vertices[a];
      const Vec3& y = s.vertices[b];
      const int id = push({x[0] + y[0], x[1] + y[1], x[2] + y[2]});
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& f : s.faces) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    s.faces = std::move(next);
  }
  for (auto& f : s.faces) {
    const Vec3 n = cross(sub(s.vertices[f[1]], s.vertices[f[0]]), sub(s.vertices[f[2]], s.vertices[f[0]]));
    if (dot(n, s.vertices[f[0]]) < 0) std::swap(f[1], f[2]);
  }
  const std::size_t nv = s.vertices.size();
  s.ring1.assign(nv, {});
  for (const auto& f : s.faces)
    for (int i = 0; i < 3; ++i) {
      s.ring1[f[i]].push_back(f[(i + 1) % 3]);
      s.ring1[f[i]].push_back(f[(i + 2) % 3]);
    }
  for (auto& r : s.ring1) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  s.ring2.assign(nv, {});
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<int> r;
    for (int a : s.ring1[v]) {
      r.push_back(a);
      for (int b : s.ring1[a])
        if (b != int(v)) r.push_back(b);
    }
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    s.ring2[v] = std::move(r);
  }
  return s;
}

int icosphere_level(int n_omega) {
  int best = 0;
  for (int l = 1; l <= 7; ++l)
    if (std::abs(icosphere_count(l) - n_omega) < std::abs(icosphere_count(best) - n_omega)) best = l;
  return best;
}

// ---- tracing

double GeodesicBundle::max_null_drift() const {
  double m = 0;
  for (const auto& r : rays)
    for (const auto& s : r.samples) m = std::max(m, std::abs(s.null_drift));
  return m;
}

namespace {

struct RayState {
  Vec3 x, n;
  double lnb, sigma;
};

RayState ray_rate(const SpacetimeMetric& metric, double t, const RayState& s) {
  const MetricJet j = metric.jet({t, s.x[0], s.x[1], s.x[2]}, 1);
  const Connection c = connection(j);
  const Vec4 L{1, s.n[0], s.n[1], s.n[2]};
  double G[4];
  for (int a = 0; a < 4; ++a) {
    double v = 0;
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) v += c.up[a][k][l] * L[k] * L[l];
    G[a] = v;
  }
  RayState d;
  d.x = s.n;
  for (int i = 0; i < 3; ++i) d.n[i] = -G[i + 1] + G[0] * s.n[i];
  d.lnb = G[0];
  double gl = 0;
  for (int a = 0; a < 4; ++a) gl += c.contracted[a] * L[a];
  d.sigma = 0.5 * gl;
  return d;
}

RayState axpy(const RayState& s, double h, const RayState& d) {
  RayState o;
  for (int i = 0; i < 3; ++i) {
    o.x[i] = s.x[i] + h * d.x[i];
    o.n[i] = s.n[i] + h * d.n[i];
  }
  o.lnb = s.lnb + h * d.lnb;
  o.sigma = s.sigma + h * d.sigma;
  return o;
}

RayState rk4(const SpacetimeMetric& metric, double t, double h, const RayState& s) {
  const RayState k1 = ray_rate(metric, t, s);
  const RayState k2 = ray_rate(metric, t + h / 2, axpy(s, h / 2, k1));
  const RayState k3 = ray_rate(metric, t + h / 2, axpy(s, h / 2, k2));
  const RayState k4 = ray_rate(metric, t + h, axpy(s, h, k3));
  RayState o;
  for (int i = 0; i < 3; ++i) {
    o.x[i] = s.x[i] + h / 6 * (k1.x[i] + 2 * k2.x[i] + 2 * k3.x[i] + k4.x[i]);
    o.n[i] = s.n[i] + h / 6 * (k1.n[i] + 2 * k2.n[i] + 2 * k3.n[i] + k4.n[i]);
  }
  o.lnb = s.lnb + h / 6 * (k1.lnb + 2 * k2.lnb + 2 * k3.lnb + k4.lnb);
  o.sigma = s.sigma + h / 6 * (k1.sigma + 2 * k2.sigma + 2 * k3.sigma + k4.sigma);
  return o;
}

}  // namespace

bool sphere_tangents(const Mat3& g, const Vec3& N, const Vec3* prev, Vec3 out[2]) {
  const double nn = gdot(g, N, N);
  auto project = [&](Vec3 v, int upto) {
    double c = gdot(g, v, N) / nn;
    for (int i = 0; i < 3; ++i) v[i] -= c * N[i];
    for (int b = 0; b < upto; ++b) {
      c = gdot(g, v, out[b]);
      for (int i = 0; i < 3; ++i) v[i] -= c * out[b][i];
    }
    return v;
  };
  bool reseeded = false;
  Vec3 seed[2];
  if (prev) {
    seed[0] = prev[0];
    seed[1] = prev[1];
  } else {
    reseeded = true;
  }
  for (int pass = 0; pass < 2; ++pass) {
    if (reseeded) {
      int ax = 0;
      for (int i = 1; i < 3; ++i)
        if (std::abs(N[i]) < std::abs(N[ax])) ax = i;
      Vec3 a{0, 0, 0};
      a[ax] = 1;
      seed[0] = a;
      seed[1] = cross(N, a);
    }
    bool ok = true;
    for (int b = 0; b < 2 && ok; ++b) {
      const double before = std::sqrt(gdot(g, seed[b], seed[b]));
      Vec3 v = project(seed[b], b);
      const double len = std::sqrt(gdot(g, v, v));
      if (!(len > 1e-3 * before)) {
        ok = false;
        break;
      }
      for (int i = 0; i < 3; ++i) out[b][i] = v[i] / len;
    }
    if (ok) break;
    reseeded = true;
  }
  if (dot(cross(out[0], out[1]), N) < 0)
    for (int i = 0; i < 3; ++i) out[1][i] = -out[1][i];
  return reseeded && prev != nullptr;
}

namespace {

RaySample make_sample(const SpacetimeMetric& metric, double t, const RayState& s) {
  RaySample r;
  r.t = t;
  r.x = s.x;
  r.n = s.n;
  r.ln_b = s.lnb;
  r.sigma = s.sigma;
  r.g = spatial_block(metric.jet({t, s.x[0], s.x[1], s.x[2]}, 0));
  r.null_drift = -1 + gdot(r.g, s.n, s.n);
  return r;
}

int count_new_inversions(const GeodesicBundle& b, std::size_t k) {
  const Vec3 tipx{b.tip[1], b.tip[2], b.tip[3]};
  auto inverted = [&](const std::array<int, 3>& f, std::size_t kk) {
    const Vec3& a = b.rays[f[0]].samples[kk].x;
    const Vec3& c1 = b.rays[f[1]].samples[kk].x;
    const Vec3& c2 = b.rays[f[2]].samples[kk].x;
    const Vec3 n = cross(sub(c1, a), sub(c2, a));
    const Vec3 out = sub(Vec3{(a[0] + c1[0] + c2[0]) / 3, (a[1] + c1[1] + c2[1]) / 3, (a[2] + c1[2] + c2[2]) / 3}, tipx);
    return dot(n, out) <= 0;
  };
  int count = 0;
  for (const auto& f : b.sphere.faces)
    if (inverted(f, k) && (k < 2 || !inverted(f, k - 1))) ++count;
  return count;
}

}  // namespace

GeodesicBundle trace_bundle(const SpacetimeMetric& metric, const Vec4& tip, int n_omega, double dt_ray,
                            double t_stop) {
  if (!(dt_ray > 0)) throw InputError("dt_ray must be positive");
  if (n_omega < 1) throw InputError("n_omega must be positive");
  if (tip[0] < metric.t_begin() || tip[0] > metric.t_end())
    throw InputError("tip time lies outside the metric's time coverage");
  GeodesicBundle b;
  b.tip = tip;
  b.dt = dt_ray;
  b.level = icosphere_level(n_omega);
  if (icosphere_count(b.level) != n_omega)
    log_warning("n_omega " + std::to_string(n_omega) + " snapped to icosphere count " +
                std::to_string(icosphere_count(b.level)));
  b.sphere = make_icosphere(b.level);
  b.spacing = metric.spacing();
  const MetricJet j0 = metric.jet(tip, 0);
  const Mat3 g0 = spatial_block(j0);
  if (!positive_definite(g0)) throw InstabilityError("metric is not Lorentzian at the cone tip");
  b.rays.resize(b.sphere.vertices.size());
  for (std::size_t r = 0; r < b.rays.size(); ++r) {
    Ray& ray = b.rays[r];
    ray.omega = b.sphere.vertices[r];
    const double len = std::sqrt(gdot(g0, ray.omega, ray.omega));
    RayState s{{tip[1], tip[2], tip[3]}, {ray.omega[0] / len, ray.omega[1] / len, ray.omega[2] / len}, 0, 0};
    RaySample smp = make_sample(metric, tip[0], s);
    sphere_tangents(smp.g, smp.n, nullptr, smp.e);
    ray.samples.push_back(smp);
  }
  if (std::isnan(t_stop)) t_stop = metric.t_end();
  extend_bundle(b, metric, t_stop);
  return b;
}

void extend_bundle(GeodesicBundle& b, const SpacetimeMetric& metric, double t_stop) {
  if (std::isinf(t_stop)) throw InputError("an end time is required for metrics without time coverage");
  if (t_stop > metric.t_end() + 1e-12) {
    b.truncated = true;
    t_stop = metric.t_end();
  }
  if (b.signature_failure) return;
  const double u = b.tip[0];
  const auto total = std::size_t(std::floor((t_stop - u) / b.dt + 1e-9));
  for (std::size_t k = b.steps(); k <= total; ++k) {
    const double t0 = u + double(k - 1) * b.dt;
    const double t1 = u + double(k) * b.dt;
    std::vector<RaySample> next(b.rays.size());
    std::vector<char> bad(b.rays.size(), 0);
    parallel_for(b.rays.size(), [&](std::size_t r) {
      const RaySample& p = b.rays[r].samples.back();
      const RayState s = rk4(metric, t0, t1 - t0, {p.x, p.n, p.ln_b, p.sigma});
      RaySample smp = make_sample(metric, t1, s);
      if (!positive_definite(smp.g) || !std::isfinite(smp.null_drift)) {
        bad[r] = 1;
        return;
      }
      if (sphere_tangents(smp.g, smp.n, p.e, smp.e)) bad[r] = 2;
      next[r] = smp;
    });
    if (std::count(bad.begin(), bad.end(), 1) > 0) {
      b.signature_failure = true;
      std::ostringstream os;
      os << "metric lost its signature at t = " << t1 << "; bundle stopped";
      b.note = os.str();
      log_warning(b.note);
      return;
    }
    for (std::size_t r = 0; r < b.rays.size(); ++r) {
      Ray& ray = b.rays[r];
      if (bad[r] == 2) ray.reseeded = true;
      if (std::abs(next[r].null_drift) > kNullFlag) ray.null_flag = true;
      ray.samples.push_back(next[r]);
    }
    b.crossings += count_new_inversions(b, b.steps() - 1);
  }
}

NullFrame null_frame(const RaySample& s) {
  NullFrame f;
  f.N = {0, s.n[0], s.n[1], s.n[2]};
  f.L = {1, s.n[0], s.n[1], s.n[2]};
  f.Lbar = {1, -s.n[0], -s.n[1], -s.n[2]};
  f.e1 = {0, s.e[0][0], s.e[0][1], s.e[0][2]};
  f.e2 = {0, s.e[1][0], s.e[1][1], s.e[1][2]};
  return f;
}

FrameCheck frame_identities(const GeodesicBundle& b) {
  FrameCheck c;
  for (const auto& r : b.rays)
    for (const auto& s : r.samples) {
      Mat4 g{};
      g[0][0] = -1;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g[i + 1][j + 1] = s.g[i][j];
      const NullFrame f = null_frame(s);
      auto dev = [&](const Vec4& a, const Vec4& bb, double want) {
        c.max_dev = std::max(c.max_dev, std::abs(contract(g, a, bb) - want));
      };
      dev(f.L, f.Lbar, -2);
      dev(f.N, f.N, 1);
      dev(f.e1, f.e1, 1);
      dev(f.e2, f.e2, 1);
      dev(f.e1, f.e2, 0);
      dev(f.e1, f.L, 0);
      dev(f.e2, f.L, 0);
      dev(f.e1, f.Lbar, 0);
      dev(f.e2, f.Lbar, 0);
      dev(f.L, f.L, 0);
      c.max_lbar_null = std::max(c.max_lbar_null, std::abs(contract(g, f.Lbar, f.Lbar)));
    }
  return c;
}

// ---- connection coefficients

RicciLL ricci_LL(const SpacetimeMetric& metric, const Vec4& event, const Vec4& L) {
  const MetricJet j = metric.jet(event, 2);
  RicciLL r;
  r.value = contract(ricci(j), L, L);
  r.principal = contract(ricci_principal(j), L, L);
  r.gap = r.value - r.principal;
  return r;
}

void connection_coefficients(GeodesicBundle& b, const SpacetimeMetric& metric) {
  if (b.level < 1) throw InputError("n_omega too coarse for angular derivatives (need at least 42 rays)");
  const std::size_t nk = b.steps();
  const double u = b.tip[0];
  parallel_for(b.rays.size(), [&](std::size_t r) {
    const auto& nbrs = b.sphere.ring2[r];
    const int m = int(nbrs.size()) + 1;
    const int nterms = (kFitDegree + 1) * (kFitDegree + 2) / 2;
    for (std::size_t k = 1; k < nk; ++k) {
      RaySample& s = b.rays[r].samples[k];
      const double rt = s.t - u;
      // polynomial fit in g-orthonormal tangent coordinates
      std::vector<std::array<double, 2>> st(m, {0.0, 0.0});
      double rho = 0;
      for (int q = 1; q < m; ++q) {
        const RaySample& o = b.rays[nbrs[q - 1]].samples[k];
        const Vec3 d = sub(o.x, s.x);
        st[q] = {gdot(s.g, d, s.e[0]), gdot(s.g, d, s.e[1])};
        rho = std::max({rho, std::abs(st[q][0]), std::abs(st[q][1])});
      }
      Eigen::MatrixXd A(m, nterms);
      Eigen::MatrixXd B(m, 4);
      for (int q = 0; q < m; ++q) {
        const RaySample& o = q == 0 ? s : b.rays[nbrs[q - 1]].samples[k];
        const double a1 = st[q][0] / rho, a2 = st[q][1] / rho;
        int col = 0;
        for (int deg = 0; deg <= kFitDegree; ++deg)
          for (int p2 = 0; p2 <= deg; ++p2) A(q, col++) = std::pow(a1, deg - p2) * std::pow(a2, p2);
        B.row(q) << o.n[0], o.n[1], o.n[2], o.ln_b;
      }
      const Eigen::MatrixXd C = A.colPivHouseholderQr().solve(B);
      double dn[2][3], dlnb[2];
      for (int a = 0; a < 2; ++a) {
        for (int i = 0; i < 3; ++i) dn[a][i] = C(1 + a, i) / rho;
        dlnb[a] = C(1 + a, 3) / rho;
      }

      const MetricJet j = metric.jet({s.t, s.x[0], s.x[1], s.x[2]}, 2);
      const Connection con = connection(j);
      const Vec4 L{1, s.n[0], s.n[1], s.n[2]};
      const Mat3& g = s.g;
      Mat3 k3;
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) k3[i][l] = -0.5 * j.dg[0][i + 1][l + 1];
      // spatial Christoffels of the slice metric
      const Mat3 gi = inverse3(spatial_block(j));
      double gam[3][3][3];
      for (int i = 0; i < 3; ++i)
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) {
            double v = 0;
            for (int l = 0; l < 3; ++l)
              v += gi[i][l] * 0.5 * (j.dg[p + 1][l + 1][q + 1] + j.dg[q + 1][l + 1][p + 1] - j.dg[l + 1][p + 1][q + 1]);
            gam[i][p][q] = v;
          }

      Vec3 DL[2], DN[2];
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 3; ++i) {
          double v = dn[a][i], w = dn[a][i];
          for (int p = 0; p < 3; ++p) {
            for (int lam = 0; lam < 4; ++lam) v += con.up[i + 1][p + 1][lam] * s.e[a][p] * L[lam];
            for (int q = 0; q < 3; ++q) w += gam[i][p][q] * s.e[a][p] * s.n[q];
          }
          DL[a][i] = v;
          DN[a][i] = w;
        }
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) {
          s.chi[a][c] = gdot(g, DL[a], s.e[c]);
          s.theta[a][c] = gdot(g, DN[a], s.e[c]);
          s.k_ab[a][c] = gdot(k3, s.e[a], s.e[c]);
          s.chi_alt[a][c] = s.theta[a][c] - s.k_ab[a][c];
        }
      s.trchi = s.chi[0][0] + s.chi[1][1];
      s.chi_hat_sq = 0;
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) {
          const double h = s.chi[a][c] - (a == c ? 0.5 * s.trchi : 0.0);
          s.chi_hat_sq += h * h;
        }
      s.k_nn = gdot(k3, s.n, s.n);
      for (int a = 0; a < 2; ++a) s.zeta[a] = dlnb[a] + gdot(k3, s.e[a], s.n);
      s.gamma_l = 0;
      for (int a = 0; a < 4; ++a) s.gamma_l += con.contracted[a] * L[a];
      s.z = s.trchi + s.gamma_l - 2 / rt;
      s.ric_ll = contract(ricci(j), L, L);
      s.ric_ll_principal = contract(ricci_principal(j), L, L);
      s.has_coeffs = true;
    }
  });
}

double tip_exclusion(const GeodesicBundle& b) { return std::max(2 * b.spacing, 0.1); }

RaychaudhuriResult raychaudhuri_residual(const GeodesicBundle& b, bool drop_knn, double r_min) {
  if (r_min < 0) r_min = tip_exclusion(b);
  RaychaudhuriResult out;
  const std::size_t nk = b.steps();
  out.residual.assign(b.rays.size(), std::vector<double>(nk, std::nan("")));
  double sq = 0;
  for (std::size_t r = 0; r < b.rays.size(); ++r) {
    const auto& sm = b.rays[r].samples;
    for (std::size_t k = 2; k + 1 < nk; ++k) {
      const RaySample& s = sm[k];
      const double rt = b.r_tilde(k);
      if (rt < r_min - 1e-12 || !sm[k - 1].has_coeffs || !s.has_coeffs || !sm[k + 1].has_coeffs) continue;
      // d/dt (r trchi) is smooth through the 2/r singular part; 4th-order
      // central difference where the stencil fits
      auto q = [&](std::size_t kk) { return b.r_tilde(kk) * sm[kk].trchi; };
      double dq;
      if (k >= 3 && k + 2 < nk && sm[k - 2].has_coeffs && sm[k + 2].has_coeffs)
        dq = (-q(k + 2) + 8 * q(k + 1) - 8 * q(k - 1) + q(k - 2)) / (12 * b.dt);
      else
        dq = (q(k + 1) - q(k - 1)) / (2 * b.dt);
      const double ltr = (dq - s.trchi) / rt;
      double res = ltr + 0.5 * s.trchi * s.trchi + s.chi_hat_sq + s.ric_ll;
      if (!drop_knn) res += s.k_nn * s.trchi;
      out.residual[r][k] = res;
      out.max_abs = std::max(out.max_abs, std::abs(res));
      out.scale = std::max(out.scale, 0.5 * s.trchi * s.trchi);
      sq += res * res;
      ++out.evaluated;
    }
  }
  if (out.evaluated) out.rms = std::sqrt(sq / double(out.evaluated));
  return out;
}

// ---- h-spacelike cone and its h-unit normal

bool cone_normal(const RaySample& s, double c2, Vec4& V, double& cov) {
  Vec3 ns = cross(s.e[0], s.e[1]);
  if (dot(ns, s.n) < 0)
    for (double& x : ns) x = -x;
  const double n0 = -dot(ns, s.n);
  const double c22 = c2 * c2;
  cov = (-n0 * n0 + c22 * dot(ns, ns)) / (n0 * n0);
  V = {-n0, c22 * ns[0], c22 * ns[1], c22 * ns[2]};
  const double hvv = -V[0] * V[0] + (V[1] * V[1] + V[2] * V[2] + V[3] * V[3]) / c22;
  if (!(hvv < 0)) return false;
  const double sc = 1 / std::sqrt(-hvv);
  for (double& x : V) x *= sc;
  return true;
}

HSpacelikeResult h_spacelike_check(GeodesicBundle& b, const MaterialSpec& spec) {
  HSpacelikeResult out;
  const double c22 = spec.c2 * spec.c2;
  out.min_H = INFINITY;
  out.min_cov = INFINITY;
  out.max_cov = -INFINITY;
  double v0sum = 0;
  std::size_t count = 0;
  for (auto& r : b.rays)
    for (auto& s : r.samples) {
      s.H = -1 + dot(s.n, s.n) / c22;
      double cov = 0;
      const bool vok = cone_normal(s, spec.c2, s.V, cov);
      Eigen::Matrix3d hg;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) hg(i, j) = (i == j ? 1 / c22 : 0.0) - s.g[i][j];
      const double margin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(hg, Eigen::EigenvaluesOnly).eigenvalues()(0);
      out.min_H = std::min(out.min_H, s.H);
      out.min_cov = std::min(out.min_cov, cov);
      out.max_cov = std::max(out.max_cov, cov);
      if (vok) {
        const double nrm = -s.V[0] * s.V[0] + (s.V[1] * s.V[1] + s.V[2] * s.V[2] + s.V[3] * s.V[3]) / c22;
        out.max_normalization_error = std::max(out.max_normalization_error, std::abs(nrm + 1));
        v0sum += s.V[0];
        ++count;
      }
      if (!(s.H > 0) || !vok) {
        if (out.failures == 0) out.margin_at_failure = margin;
        ++out.failures;
        out.ok = false;
        if (margin > 0) out.margin_consistent = false;
      }
    }
  out.mean_v0 = count ? v0sum / double(count) : std::nan("");
  return out;
}

std::string geodesics_csv(const GeodesicBundle& b) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(std::isnan(v) ? "nan" : buf);
  };
  const double nan = std::nan("");
  std::string out = "u,ray_id,t,x,y,z,L0,L1,L2,L3,trchi,zsmall,sigma,H,null_drift\n";
  for (std::size_t r = 0; r < b.rays.size(); ++r)
    for (const RaySample& s : b.rays[r].samples) {
      out += num(b.tip[0]) + "," + std::to_string(r) + "," + num(s.t);
      for (int i = 0; i < 3; ++i) out += "," + num(s.x[i]);
      out += ",1";
      for (int i = 0; i < 3; ++i) out += "," + num(s.n[i]);
      out += "," + num(s.has_coeffs ? s.trchi : nan) + "," + num(s.has_coeffs ? s.z : nan) + "," + num(s.sigma) +
             "," + num(s.H) + "," + num(s.null_drift) + "\n";
    }
  return out;
}

}  // namespace ewlab
