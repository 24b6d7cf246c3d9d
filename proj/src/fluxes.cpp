#include <Eigen/Dense>
#include <cmath>

#include "ewlab/geometry.hpp"
#include "ewlab/parallel.hpp"
#include "ewlab/spectral.hpp"

namespace ewlab {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double gdot(const Mat3& g, const Vec3& a, const Vec3& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += g[i][j] * a[i] * b[j];
  return s;
}

}  // namespace

FieldPart field_part_from_name(const std::string& s) {
  if (s == "u" || s == "full") return FieldPart::full;
  if (s == "phi") return FieldPart::phi;
  if (s == "psi") return FieldPart::psi;
  throw InputError("unknown field part '" + s + "' (expected phi, psi or u)");
}

namespace {

SpacetimeSpline build_scalar_spline(const Trajectory& tr, FieldPart part, int component) {
  if (component < 0 || component > 2) throw InputError("field component must be 0, 1 or 2");
  if (tr.snapshots.size() < 2) throw InputError("trajectory needs at least two snapshots");
  const MaterialSpec& spec = tr.config.material;
  const Grid3 grid = tr.snapshots[0].u.grid();
  auto pick = [&](const Field& f) {
    Field p = f;
    if (part != FieldPart::full) {
      Helmholtz h = helmholtz_decompose(f);
      p = part == FieldPart::phi ? h.phi_part : h.psi_part;
    }
    const auto c = p.component(component);
    return SpacetimeSpline::Samples(c.begin(), c.end());
  };
  std::vector<SpacetimeSpline::Samples> values;
  for (const State& s : tr.snapshots) values.push_back(pick(s.u));
  SpacetimeSpline::Ends ends{pick(tr.snapshots.front().v), pick(acceleration(tr.snapshots.front().u, spec)),
                             pick(tr.snapshots.back().v), pick(acceleration(tr.snapshots.back().u, spec))};
  const double h = tr.snapshots[1].t - tr.snapshots[0].t;
  return SpacetimeSpline(grid, 1, tr.snapshots[0].t, h, values, ends);
}

}  // namespace

TrajectoryScalar::TrajectoryScalar(const Trajectory& tr, FieldPart part, int component)
    : spline_(build_scalar_spline(tr, part, component)) {}

void TrajectoryScalar::eval(const Vec4& x, double& value, Vec4& grad) const {
  double d1[4];
  spline_.eval(x, 1, &value, d1, nullptr);
  for (int a = 0; a < 4; ++a) grad[a] = d1[a];
}

FluxResult null_fluxes(GeodesicBundle& b, const ScalarSource& field, const MaterialSpec& spec, double r_min) {
  if (r_min < 0) r_min = std::max(2 * b.spacing, 2 * b.dt);
  const double c22 = spec.c2 * spec.c2;
  FluxResult out;
  const std::size_t nk = b.steps(), nv = b.rays.size();
  std::vector<double> f1(nk, 0), f2(nk, 0), den(nk, 0);
  std::vector<char> used(nk, 0);
  for (std::size_t k = 0; k < nk; ++k) {
    if (b.r_tilde(k) < r_min - 1e-12) {
      ++out.excluded_steps;
      continue;
    }
    used[k] = 1;
    std::vector<double> w(nv, 0.0);
    for (const auto& f : b.sphere.faces) {
      const RaySample& s0 = b.rays[f[0]].samples[k];
      Mat3 g;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          g[i][j] = (s0.g[i][j] + b.rays[f[1]].samples[k].g[i][j] + b.rays[f[2]].samples[k].g[i][j]) / 3;
      const Vec3 a = sub(b.rays[f[1]].samples[k].x, s0.x);
      const Vec3 c = sub(b.rays[f[2]].samples[k].x, s0.x);
      const double aa = gdot(g, a, a), cc = gdot(g, c, c), ac = gdot(g, a, c);
      const double area = 0.5 * std::sqrt(std::max(0.0, aa * cc - ac * ac));
      for (int v : f) w[v] += area / 3;
    }
    std::vector<double> i1(nv), i2(nv), id(nv);
    parallel_for(nv, [&](std::size_t r) {
      const RaySample& s = b.rays[r].samples[k];
      double phi;
      Vec4 d;
      field.eval({s.t, s.x[0], s.x[1], s.x[2]}, phi, d);
      const Vec3 grad{d[1], d[2], d[3]};
      const double lphi = d[0] + dot(s.n, grad);
      double ang = 0;
      for (int a = 0; a < 2; ++a) ang += dot(s.e[a], grad) * dot(s.e[a], grad);
      Vec4 V;
      double cov;
      cone_normal(s, spec.c2, V, cov);
      const double vphi = V[0] * d[0] + V[1] * d[1] + V[2] * d[2] + V[3] * d[3];
      const double g2 = dot(grad, grad);
      i1[r] = lphi * lphi + ang;
      i2[r] = d[0] * vphi + 0.5 * V[0] * (-d[0] * d[0] + c22 * g2);
      id[r] = d[0] * d[0] + g2;
    });
    for (std::size_t r = 0; r < nv; ++r) {
      f1[k] += w[r] * i1[r];
      f2[k] += w[r] * i2[r];
      den[k] += w[r] * id[r];
    }
  }
  // trapezoid over the retained steps
  std::size_t first = nk, last = 0;
  for (std::size_t k = 0; k < nk; ++k)
    if (used[k]) {
      first = std::min(first, k);
      last = k;
      ++out.used_steps;
    }
  if (out.used_steps >= 2) {
    for (std::size_t k = first; k <= last; ++k) {
      const double wt = (k == first || k == last) ? 0.5 * b.dt : b.dt;
      out.F1 += wt * f1[k];
      out.F2 += wt * f2[k];
      out.denom += wt * den[k];
    }
  }
  out.coercive_ratio = out.denom > 0 ? out.F2 / out.denom : std::nan("");
  return out;
}

}  // namespace ewlab
