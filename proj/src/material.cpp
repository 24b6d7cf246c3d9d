#include "ewlab/material.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ewlab {

void MaterialSpec::validate() const {
  if (!(std::isfinite(c1) && std::isfinite(c2) && c2 > 0 && c1 > c2))
    throw InputError("material: need c1 > c2 > 0");
  if (!std::isfinite(b_coef)) throw InputError("material: b_coef must be finite");
  for (double k : gamma)
    if (!std::isfinite(k)) throw InputError("material: gamma coefficients must be finite");
}

double MaterialSpec::g(double m) const {
  double v = 0, mp = m * m;
  for (std::size_t i = 0; i < gamma.size(); ++i, mp *= m) v += gamma[i] * mp / double(i + 2);
  return v;
}

double MaterialSpec::gp(double m) const {
  double v = 0;
  for (std::size_t i = gamma.size(); i-- > 0;) v = v * m + gamma[i];
  return v * m;
}

double MaterialSpec::gpp(double m) const {
  double v = 0;
  for (std::size_t i = gamma.size(); i-- > 0;) v = v * m + gamma[i] * double(i + 1);
  return v;
}

double MaterialSpec::gppp(double m) const {
  double v = 0;
  for (std::size_t i = gamma.size(); i-- > 1;) v = v * m + gamma[i] * double(i + 1) * double(i);
  return v;
}

int MaterialSpec::degree() const {
  for (std::size_t i = gamma.size(); i-- > 0;)
    if (gamma[i] != 0) return int(i) + 2;
  return 0;
}

double MaterialSpec::max_abs_gpp(double range) const {
  double best = 0;
  const int steps = 200;
  for (int s = 0; s <= steps; ++s) best = std::max(best, std::abs(gpp(-range + 2 * range * s / steps)));
  return best;
}

namespace {

void require_vector(const Field& u, const char* where) {
  if (u.rank() != Rank::vector3) throw ContractViolation(std::string(where) + ": needs a vector field");
  u.require_finite(where);
}

// M_{jk} = d_j U^k as 9 spectra (component 3j + k).
Spectrum grad_matrix(const Spectrum& uhat) {
  const Grid3& g = uhat.grid();
  Spectrum m(g, 9);
  const cplx I(0, 1);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      cplx* o = m.comp(3 * j + k);
      const cplx* in = uhat.comp(k);
      for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
        const int ms[3] = {m1, m2, m3};
        o[idx] = I * odd_symbol(g, ms[j]) * in[idx];
      });
    }
  return m;
}

// d_i d_j U^k for i <= j; returns index table.
constexpr int pair_index(int i, int j) {
  const int a = i < j ? i : j, b = i < j ? j : i;
  return a == 0 ? b : a == 1 ? 2 + b : 5;
}

Spectrum hessians(const Spectrum& uhat) {
  const Grid3& g = uhat.grid();
  Spectrum h(g, 18);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        cplx* o = h.comp(3 * pair_index(i, j) + k);
        const cplx* in = uhat.comp(k);
        for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
          const int ms[3] = {m1, m2, m3};
          const double v = -odd_symbol(g, ms[i]) * odd_symbol(g, ms[j]);
          o[idx] = v * in[idx];
        });
      }
  return h;
}

std::vector<const cplx*> comps(const Spectrum& s) {
  std::vector<const cplx*> v;
  for (int c = 0; c < s.ncomp(); ++c) v.push_back(s.comp(c));
  return v;
}

Spectrum spectral_gradient(const Spectrum& s1) {
  const Grid3& g = s1.grid();
  Spectrum out(g, 3);
  const cplx I(0, 1);
  for (int a = 0; a < 3; ++a)
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      const int ms[3] = {m1, m2, m3};
      out.comp(a)[idx] = I * odd_symbol(g, ms[a]) * s1.comp(0)[idx];
    });
  return out;
}

Spectrum linear_part(const Spectrum& uhat, const MaterialSpec& spec) {
  const Grid3& g = uhat.grid();
  Spectrum out(g, 3);
  const double c22 = spec.c2 * spec.c2, d = spec.c1 * spec.c1 - c22;
  for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
    const double xf[3] = {g.wavenumber(m1), g.wavenumber(m2), g.wavenumber(m3)};
    const double xo[3] = {odd_symbol(g, m1), odd_symbol(g, m2), odd_symbol(g, m3)};
    const double x2 = xf[0] * xf[0] + xf[1] * xf[1] + xf[2] * xf[2];
    const cplx dot = xo[0] * uhat.comp(0)[idx] + xo[1] * uhat.comp(1)[idx] + xo[2] * uhat.comp(2)[idx];
    for (int c = 0; c < 3; ++c) out.comp(c)[idx] = -c22 * x2 * uhat.comp(c)[idx] - d * xo[c] * dot;
  });
  return out;
}

void add_into(Spectrum& a, const Spectrum& b, double s = 1.0) {
  for (std::size_t i = 0; i < a.raw().size(); ++i) a.raw()[i] += s * b.raw()[i];
}

Eigen::Matrix3d hyper_matrix(const double* m, const MaterialSpec& spec) {
  Eigen::Matrix3d a;
  const double d = spec.c1 * spec.c1 - spec.c2 * spec.c2;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k)
      a(j, k) = (j == k ? d : 0.0) + 0.5 * (spec.gp(m[3 * j + k]) + spec.gp(m[3 * k + j]));
  return a;
}

template <class F>
void for_each_point_matrix(const Field& du, F&& f) {
  const std::size_t np = du.grid().points();
  double m[9];
  for (std::size_t p = 0; p < np; ++p) {
    for (int c = 0; c < 9; ++c) m[c] = du.component(c)[p];
    f(p, m);
  }
}

}  // namespace

Field deformation_gradient(const Field& u) {
  require_vector(u, "deformation_gradient");
  Field f = gradient(u);
  for (int a = 0; a < 3; ++a)
    for (double& v : f.component(4 * a)) v += 1.0;
  return f;
}

PiolaResult piola_identity_residual(const Field& u) {
  require_vector(u, "piola_identity_residual");
  const Grid3& g = u.grid();
  const Spectrum m = grad_matrix(forward(u));
  // cofactor of F = I + M, quadratic in the entries
  Spectrum cof = dealiased_map(g, 2, comps(m), 9, [](const double* in, double* out) {
    double F[3][3];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) F[a][b] = in[3 * a + b] + (a == b ? 1.0 : 0.0);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const int a1 = (a + 1) % 3, a2 = (a + 2) % 3, b1 = (b + 1) % 3, b2 = (b + 2) % 3;
        out[3 * a + b] = F[a1][b1] * F[a2][b2] - F[a1][b2] * F[a2][b1];
      }
  });
  Spectrum div(g, 3);
  const cplx I(0, 1);
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a)
      for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
        const int ms[3] = {m1, m2, m3};
        div.comp(b)[idx] += I * odd_symbol(g, ms[a]) * cof.comp(3 * a + b)[idx];
      });
  Field r = inverse(div, Rank::vector3);
  const double mx = r.max_abs();
  return {std::move(r), mx};
}

Spectrum nonlinearity_spectrum(const Spectrum& uhat, const MaterialSpec& spec) {
  const Grid3& g = uhat.grid();
  const int deg = spec.degree();
  if (deg < 2) return Spectrum(g, 3);
  const Spectrum m = grad_matrix(uhat);
  const Spectrum h = hessians(uhat);
  std::vector<const cplx*> in = comps(m);
  for (int c = 0; c < 18; ++c) in.push_back(h.comp(c));
  return dealiased_map(g, deg, in, 3, [&](const double* a, double* out) {
    double gp[9];
    for (int c = 0; c < 9; ++c) gp[c] = spec.gp(a[c]);
    for (int i = 0; i < 3; ++i) {
      double v = 0;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) v += gp[3 * j + k] * a[9 + 3 * pair_index(i, j) + k];
      out[i] = v;
    }
  });
}

Field nonlinearity(const Field& u, const MaterialSpec& spec) {
  require_vector(u, "nonlinearity");
  return inverse(nonlinearity_spectrum(forward(u), spec), Rank::vector3);
}

namespace {
Spectrum potential_gradient(const Spectrum& uhat, const MaterialSpec& spec) {
  const Grid3& g = uhat.grid();
  const int deg = spec.degree();
  if (deg < 2) return Spectrum(g, 3);
  const Spectrum m = grad_matrix(uhat);
  Spectrum G = dealiased_map(g, deg, comps(m), 1, [&](const double* a, double* out) {
    double v = 0;
    for (int c = 0; c < 9; ++c) v += spec.g(a[c]);
    out[0] = v;
  });
  return spectral_gradient(G);
}
}  // namespace

Field nonlinearity_gradient_form(const Field& u, const MaterialSpec& spec) {
  require_vector(u, "nonlinearity_gradient_form");
  return inverse(potential_gradient(forward(u), spec), Rank::vector3);
}

Spectrum acceleration_spectrum(const Spectrum& uhat, const MaterialSpec& spec) {
  Spectrum a = linear_part(uhat, spec);
  // gradient form: 10 padded transforms instead of 30, same values to roundoff
  if (spec.degree() >= 2) add_into(a, potential_gradient(uhat, spec));
  return a;
}

Field acceleration(const Field& u, const MaterialSpec& spec) {
  require_vector(u, "acceleration");
  return inverse(acceleration_spectrum(forward(u), spec), Rank::vector3);
}

Field acceleration_unreduced(const Field& u, const MaterialSpec& spec) {
  require_vector(u, "acceleration_unreduced");
  const Spectrum uhat = forward(u);
  Spectrum a = linear_part(uhat, spec);
  add_into(a, potential_gradient(uhat, spec));
  Field out = inverse(a, Rank::vector3);
  if (spec.b_coef != 0) out.axpy(spec.b_coef, piola_identity_residual(u).residual);
  return out;
}

HyperbolicityResult hyperbolicity_check(const Field& du, const MaterialSpec& spec) {
  if (du.rank() != Rank::matrix3x3) throw ContractViolation("hyperbolicity_check: needs a matrix field");
  double lo = INFINITY, hi = -INFINITY;
  bool finite = true;
  for_each_point_matrix(du, [&](std::size_t, const double* m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(hyper_matrix(m, spec), Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues();
    if (!ev.allFinite()) finite = false;
    lo = std::min(lo, ev(0));
    hi = std::max(hi, ev(2));
  });
  if (!finite) return {false, NAN, NAN, INFINITY};
  const double bound = lo > 0 ? std::max(hi, 1.0 / lo) : INFINITY;
  return {lo > 0 && std::isfinite(hi), lo, hi, bound};
}

double max_wave_speed_sq(const Field& du, const MaterialSpec& spec) {
  const HyperbolicityResult h = hyperbolicity_check(du, spec);
  return std::max(spec.c1 * spec.c1, h.lambda_max + spec.c2 * spec.c2);
}

Mat3 spatial_inverse_metric_at(const double* m, const MaterialSpec& spec) {
  Mat3 gi;
  const double c11 = spec.c1 * spec.c1;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k)
      gi[j][k] = (j == k ? c11 : 0.0) + 0.5 * (spec.gp(m[3 * j + k]) + spec.gp(m[3 * k + j]));
  return gi;
}

MetricField acoustic_metrics(const Field& dphi, const Field& dpsi, const MaterialSpec& spec) {
  if (dphi.rank() != Rank::matrix3x3 || dpsi.rank() != Rank::matrix3x3)
    throw ContractViolation("acoustic_metrics: needs matrix fields");
  MetricField out{dphi.grid(), std::vector<MetricSample>(dphi.grid().points())};
  const Field du = dphi + dpsi;
  const double c22 = spec.c2 * spec.c2;
  for_each_point_matrix(du, [&](std::size_t p, const double* m) {
    const Mat3 gi = spatial_inverse_metric_at(m, spec);
    Eigen::Matrix3d e;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) e(a, b) = gi[a][b];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(e, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues()(0) > 0)) throw InstabilityError("acoustic metric lost Lorentzian signature");
    const Mat3 gl = inverse3(gi);
    MetricSample& s = out.samples[p];
    s = MetricSample{};
    s.g_inv[0][0] = -1;
    s.g[0][0] = -1;
    s.h_inv[0][0] = -1;
    s.h[0][0] = -1;
    for (int a = 0; a < 3; ++a) {
      s.h_inv[a + 1][a + 1] = c22;
      s.h[a + 1][a + 1] = 1.0 / c22;
      for (int b = 0; b < 3; ++b) {
        s.g_inv[a + 1][b + 1] = gi[a][b];
        s.g[a + 1][b + 1] = gl[a][b];
      }
    }
  });
  return out;
}

Field spatial_metric(const Field& du, const MaterialSpec& spec) {
  if (du.rank() != Rank::matrix3x3) throw ContractViolation("spatial_metric: needs a matrix field");
  Field out(du.grid(), Rank::matrix3x3);
  for_each_point_matrix(du, [&](std::size_t p, const double* m) {
    const Mat3 gl = inverse3(spatial_inverse_metric_at(m, spec));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) out.component(3 * a + b)[p] = gl[a][b];
  });
  return out;
}

Field spatial_metric_rate(const Field& du, const Field& du_dt, const MaterialSpec& spec) {
  Field out(du.grid(), Rank::matrix3x3);
  const std::size_t np = du.grid().points();
  double m[9], md[9];
  for (std::size_t p = 0; p < np; ++p) {
    for (int c = 0; c < 9; ++c) {
      m[c] = du.component(c)[p];
      md[c] = du_dt.component(c)[p];
    }
    const Mat3 gl = inverse3(spatial_inverse_metric_at(m, spec));
    Mat3 dgi;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        dgi[a][b] = 0.5 * (spec.gpp(m[3 * a + b]) * md[3 * a + b] + spec.gpp(m[3 * b + a]) * md[3 * b + a]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double v = 0;
        for (int c = 0; c < 3; ++c)
          for (int d = 0; d < 3; ++d) v -= gl[a][c] * dgi[c][d] * gl[d][b];
        out.component(3 * a + b)[p] = v;
      }
  }
  return out;
}

EllipticityResult ellipticity_check(const Field& g_spatial, const MaterialSpec& spec) {
  if (g_spatial.rank() != Rank::matrix3x3) throw ContractViolation("ellipticity_check: needs a matrix field");
  const double c22 = spec.c2 * spec.c2;
  double m_inv = INFINITY, m_low = INFINITY;
  for_each_point_matrix(g_spatial, [&](std::size_t, const double* m) {
    Mat3 gl;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) gl[a][b] = m[3 * a + b];
    const Mat3 gi = inverse3(gl);
    Eigen::Matrix3d A, B;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        A(a, b) = gi[a][b] - (a == b ? c22 : 0.0);
        B(a, b) = -(gl[a][b] - (a == b ? 1.0 / c22 : 0.0));
      }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ea, eb;
    ea.computeDirect(A, Eigen::EigenvaluesOnly);
    eb.computeDirect(B, Eigen::EigenvaluesOnly);
    m_inv = std::min(m_inv, ea.eigenvalues()(0));
    m_low = std::min(m_low, eb.eigenvalues()(0));
  });
  return {m_inv > 0 && m_low > 0, m_inv, m_low};
}

namespace {

struct SnapshotDerivs {
  const Field* g;
  Field gt;
  std::array<Field, 3> gx;
};

Field component_derivative(const Field& f, int axis) {
  Field out(f.grid(), f.rank());
  for (int c = 0; c < f.ncomp(); ++c) {
    Field s = slice(f, c, Rank::scalar);
    Field d = spectral_derivative(s, DerivKind::grad);
    auto src = d.component(axis);
    std::copy(src.begin(), src.end(), out.component(c).begin());
  }
  return out;
}

SnapshotDerivs snapshot_derivs(const MetricSeries& m, std::size_t s) {
  if (m.g.size() != m.times.size() || m.g.size() < 3 || s < 1 || s + 1 >= m.g.size())
    throw InputError("metric snapshots: need neighbours on both sides of the requested time");
  const Field& a = m.g[s - 1];
  const Field& b = m.g[s + 1];
  Field gt = b - a;
  gt *= 1.0 / (m.times[s + 1] - m.times[s - 1]);
  return {&m.g[s], std::move(gt), {component_derivative(m.g[s], 0), component_derivative(m.g[s], 1),
                                   component_derivative(m.g[s], 2)}};
}

MetricJet jet_at(const SnapshotDerivs& d, std::size_t p) {
  MetricJet j;
  j.g[0][0] = -1;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int c = 3 * a + b;
      j.g[a + 1][b + 1] = d.g->component(c)[p];
      j.dg[0][a + 1][b + 1] = d.gt.component(c)[p];
      for (int x = 0; x < 3; ++x) j.dg[x + 1][a + 1][b + 1] = d.gx[x].component(c)[p];
    }
  return j;
}

std::size_t snapshot_index(const MetricSeries& m, double t) {
  for (std::size_t s = 0; s < m.times.size(); ++s)
    if (std::abs(m.times[s] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
  throw InputError("christoffel: time is not a snapshot time");
}

}  // namespace

Connection christoffel(const MetricSeries& m, double t, int i, int j, int k) {
  const std::size_t s = snapshot_index(m, t);
  const SnapshotDerivs d = snapshot_derivs(m, s);
  return connection(jet_at(d, d.g->grid().index(i, j, k)));
}

std::array<Field, 4> contracted_christoffel_field(const MetricSeries& m, std::size_t s) {
  const SnapshotDerivs d = snapshot_derivs(m, s);
  const Grid3& g = m.g[s].grid();
  std::array<Field, 4> out{Field(g, Rank::scalar), Field(g, Rank::scalar), Field(g, Rank::scalar),
                           Field(g, Rank::scalar)};
  for (std::size_t p = 0; p < g.points(); ++p) {
    const Connection c = connection(jet_at(d, p));
    for (int a = 0; a < 4; ++a) out[a].component(0)[p] = c.contracted_up[a];
  }
  return out;
}

Field wave_operator(const FieldSeries& phi, const MetricSeries& m, bool reduced, std::size_t s) {
  if (phi.fields.size() != m.g.size() || phi.times.size() != m.times.size())
    throw InputError("wave_operator: snapshot counts differ");
  if (s < 1 || s + 1 >= phi.fields.size()) throw InputError("wave_operator: need neighbouring snapshots");
  const Grid3& g = phi.fields[s].grid();
  for (std::size_t q = s - 1; q <= s + 1; ++q)
    if (!(phi.fields[q].grid() == g) || !(m.g[q].grid() == g) || phi.fields[q].rank() != Rank::scalar)
      throw InputError("wave_operator: mismatched grids");
  const double dt = 0.5 * (phi.times[s + 1] - phi.times[s - 1]);
  const std::size_t np = g.points();
  const auto f0 = phi.fields[s - 1].component(0), f1 = phi.fields[s].component(0),
             f2 = phi.fields[s + 1].component(0);
  Field out(g, Rank::scalar);
  auto o = out.component(0);
  for (std::size_t p = 0; p < np; ++p) o[p] = -(f2[p] - 2 * f1[p] + f0[p]) / (dt * dt);

  auto ginv_at = [&](const Field& gl, std::size_t p) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] = gl.component(3 * i + j)[p];
    return a;
  };
  const Field dphi = gradient(phi.fields[s]);
  if (reduced) {
    Field hess[3][3] = {{Field(g, Rank::scalar), Field(g, Rank::scalar), Field(g, Rank::scalar)},
                        {Field(g, Rank::scalar), Field(g, Rank::scalar), Field(g, Rank::scalar)},
                        {Field(g, Rank::scalar), Field(g, Rank::scalar), Field(g, Rank::scalar)}};
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        hess[i][j] = spectral_derivative(phi.fields[s], DerivKind::mixed, i, j);
        hess[j][i] = hess[i][j];
      }
    for (std::size_t p = 0; p < np; ++p) {
      const Mat3 gi = inverse3(ginv_at(m.g[s], p));
      double v = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v += gi[i][j] * hess[i][j].component(0)[p];
      o[p] += v;
    }
    return out;
  }
  // full Laplace-Beltrami form
  Field w(g, Rank::vector3);
  std::vector<double> vol(np);
  for (std::size_t p = 0; p < np; ++p) {
    const Mat3 gl = ginv_at(m.g[s], p);
    const Mat3 gi = inverse3(gl);
    vol[p] = std::sqrt(det3(gl));
    for (int i = 0; i < 3; ++i) {
      double v = 0;
      for (int j = 0; j < 3; ++j) v += gi[i][j] * dphi.component(j)[p];
      w.component(i)[p] = vol[p] * v;
    }
    const double lv0 = 0.5 * std::log(det3(ginv_at(m.g[s - 1], p)));
    const double lv2 = 0.5 * std::log(det3(ginv_at(m.g[s + 1], p)));
    o[p] -= (lv2 - lv0) / (2 * dt) * (f2[p] - f0[p]) / (2 * dt);
  }
  const Field dw = divergence(w);
  for (std::size_t p = 0; p < np; ++p) o[p] += dw.component(0)[p] / vol[p];
  return out;
}

}  // namespace ewlab
