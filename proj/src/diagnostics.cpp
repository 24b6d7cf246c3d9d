#include "ewlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ewlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dot4(const Mat4& gi, const Vec4& a, const Vec4& b) {
  double v = 0;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) v += gi[m][n] * a[m] * b[n];
  return v;
}

double spacing_of(const std::vector<double>& t) {
  if (t.size() < 2) throw InputError("time series needs at least two snapshots");
  return t[1] - t[0];
}

// true when the widest (6th-order) central stencil fits at s
bool interior(std::size_t s, std::size_t n) { return s >= 3 && s + 3 < n; }

constexpr int pair_index(int i, int j) {
  const int a = i < j ? i : j, b = i < j ? j : i;
  return a == 0 ? b : a == 1 ? 2 + b : 5;
}

// d_a d_b f for a <= b, in pair_index order
std::vector<Field> hessian(const Field& f) {
  std::vector<Field> h;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) h.push_back(spectral_derivative(f, DerivKind::mixed, a, b));
  return h;
}

// All spacetime second derivatives of a sector given (u, v, a) = (w, d_t w, d_t^2 w).
std::vector<Field> dd_fields(const Field& u, const Field& v, const Field& a) {
  std::vector<Field> out = hessian(u);
  out.push_back(gradient(v));
  out.push_back(a);
  return out;
}

double sup_of(const std::vector<Field>& fs) {
  double m = 0;
  for (const Field& f : fs) m = std::max(m, f.max_abs());
  return m;
}

struct Split {
  Helmholtz u, v, a;
};

Split split_state(const State& s, const MaterialSpec& spec) {
  return {helmholtz_decompose(s.u), helmholtz_decompose(s.v), helmholtz_decompose(acceleration(s.u, spec))};
}

double l2_sum(const std::vector<Field>& fs, const std::vector<double>& w) {
  double acc = 0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double n = l2_norm(fs[i]);
    acc += w[i] * n * n;
  }
  return std::sqrt(acc);
}

// ||d^2 phi||_{L^2} over ordered index pairs (mu, nu)
double dd_l2(const std::vector<Field>& dd) {
  // six Hessian pairs (off-diagonal counted twice), d_j d_t (twice), d_t^2
  const std::vector<double> w{1, 2, 2, 1, 2, 1, 2, 1};
  return l2_sum(dd, w);
}

void band_cut(Spectrum& s) {
  const Grid3& g = s.grid();
  const int cut = two_thirds_cut(g.n());
  for (int c = 0; c < s.ncomp(); ++c)
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      if (std::abs(m1) > cut || std::abs(m2) > cut || m3 > cut) s.comp(c)[idx] = 0;
    });
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Mat4 energy_momentum(const Vec4& d, const Mat4& g, const Mat4& gi) {
  const double q = dot4(gi, d, d);
  Mat4 out{};
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) out[m][n] = d[m] * d[n] - 0.5 * g[m][n] * q;
  return out;
}

Field series_time_derivative(const FieldSeries& f, std::size_t s) {
  const std::size_t n = f.fields.size();
  const double h = spacing_of(f.times);
  if (s >= n) throw ContractViolation("series_time_derivative: index out of range");
  const auto& F = f.fields;
  if (interior(s, n))
    return (1.0 / (60 * h)) *
           (F[s + 3] - 9.0 * F[s + 2] + 45.0 * F[s + 1] - 45.0 * F[s - 1] + 9.0 * F[s - 2] - F[s - 3]);
  if (s >= 2 && s + 2 < n)
    return (1.0 / (12 * h)) * (F[s - 2] - 8.0 * F[s - 1] + 8.0 * F[s + 1] - F[s + 2]);
  if (s >= 1 && s + 1 < n) return (0.5 / h) * (F[s + 1] - F[s - 1]);
  if (n >= 3) {
    if (s == 0) return (0.5 / h) * (-3.0 * F[0] + 4.0 * F[1] - F[2]);
    return (0.5 / h) * (3.0 * F[s] - 4.0 * F[s - 1] + F[s - 2]);
  }
  return (1.0 / h) * (F[1] - F[0]);
}

std::vector<Mat4> energy_momentum_field(const FieldSeries& phi, const MetricSeries& m, std::size_t s) {
  if (phi.fields.at(s).rank() != Rank::scalar) throw ContractViolation("energy_momentum_field: needs a scalar");
  const Field dt = series_time_derivative(phi, s);
  const Field dx = gradient(phi.fields[s]);
  const Field& gl = m.g.at(s);
  const std::size_t np = dt.grid().points();
  std::vector<Mat4> out(np);
  for (std::size_t p = 0; p < np; ++p) {
    Mat3 g3;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) g3[a][b] = gl.component(3 * a + b)[p];
    const Mat3 gi3 = inverse3(g3);
    Mat4 g{}, gi{};
    g[0][0] = gi[0][0] = -1;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        g[a + 1][b + 1] = g3[a][b];
        gi[a + 1][b + 1] = gi3[a][b];
      }
    const Vec4 d{dt.data()[p], dx.component(0)[p], dx.component(1)[p], dx.component(2)[p]};
    out[p] = energy_momentum(d, g, gi);
  }
  return out;
}

EnergyParts standard_energy(const State& s, const MaterialSpec& spec) {
  const Field du = gradient(s.u);
  const std::size_t np = du.grid().points();
  const double h = du.grid().spacing(), vol = h * h * h;
  double total = 0, kin = 0;
  double m[9];
  for (std::size_t p = 0; p < np; ++p) {
    for (int c = 0; c < 9; ++c) m[c] = du.component(c)[p];
    const Mat3 gi = spatial_inverse_metric_at(m, spec);
    const double dvol = 1.0 / std::sqrt(det3(gi));
    double e = 0;
    for (int i = 0; i < 3; ++i) {
      const double v = s.v.component(i)[p], u = s.u.component(i)[p];
      double grad = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) grad += gi[a][b] * m[3 * a + i] * m[3 * b + i];
      // Q^00 = Q_00 since g^00 = -1
      e += 0.5 * v * v + 0.5 * grad + u * u;
      kin += 0.5 * v * v;
    }
    total += e * dvol;
  }
  return {total * vol, kin * vol};
}

SecondDerivSup second_derivative_sup(const State& s, const MaterialSpec& spec) {
  const Split sp = split_state(s, spec);
  return {sup_of(dd_fields(sp.u.phi_part, sp.v.phi_part, sp.a.phi_part)),
          sup_of(dd_fields(sp.u.psi_part, sp.v.psi_part, sp.a.psi_part))};
}

EnergyFit energy_inequality_fit(const Trajectory& tr) {
  EnergyFit f;
  const MaterialSpec& spec = tr.config.material;
  double acc = 0, prev_rate = 0;
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
    const State& s = tr.snapshots[k];
    const SecondDerivSup d = second_derivative_sup(s, spec);
    const double rate = std::max(d.phi, d.psi) + 1.0;
    if (k > 0) acc += 0.5 * (s.t - tr.snapshots[k - 1].t) * (rate + prev_rate);
    prev_rate = rate;
    f.times.push_back(s.t);
    f.energy.push_back(standard_energy(s, spec).total);
    f.integral.push_back(acc);
  }
  if (f.energy.empty() || !(f.energy[0] > 0)) {
    f.degenerate = true;
    return f;
  }
  for (std::size_t k = 1; k < f.energy.size(); ++k)
    if (f.integral[k] > 0) f.c_fit = std::max(f.c_fit, std::log(f.energy[k] / f.energy[0]) / f.integral[k]);
  return f;
}

std::vector<DecouplingRow> decoupling_monitor(const Trajectory& tr) {
  std::vector<DecouplingRow> rows;
  if (tr.snapshots.empty()) return rows;
  const double c2 = tr.config.material.c2;
  const State& s0 = tr.snapshots.front();
  const Field psi0 = helmholtz_decompose(s0.u).psi_part;
  const Field psi1 = helmholtz_decompose(s0.v).psi_part;
  FieldSeries curl_v;
  for (const State& s : tr.snapshots) {
    curl_v.times.push_back(s.t);
    curl_v.fields.push_back(curl(s.v));
  }
  const std::size_t n = tr.snapshots.size();
  for (std::size_t k = 0; k < n; ++k) {
    const State& s = tr.snapshots[k];
    const Field cu = curl(s.u);
    const Field lin = linear_wave_evolve(psi0, psi1, c2, s.t);
    const double ref = l2_norm(lin);
    const double gap = l2_norm(helmholtz_decompose(s.u).psi_part - lin);
    double res = kNaN;
    if (interior(k, n)) {
      Field r = series_time_derivative(curl_v, k);
      r.axpy(-c2 * c2, laplacian(cu));
      res = l2_norm(r);
    }
    rows.push_back({s.t, sobolev_norm(cu, 1.0), ref > 0 ? gap / ref : gap, res});
  }
  return rows;
}

std::vector<ResidualRow> divpart_residual(const Trajectory& tr, bool flip_gpp) {
  std::vector<ResidualRow> rows;
  const MaterialSpec& spec = tr.config.material;
  const double c11 = spec.c1 * spec.c1;
  const double sgn = flip_gpp ? -1.0 : 1.0;
  const FieldSeries vs = tr.v_series();
  const std::size_t n = tr.snapshots.size();
  for (std::size_t k = 0; k < n; ++k) {
    const State& s = tr.snapshots[k];
    const Split sp = split_state(s, spec);
    const double scale = dd_l2(dd_fields(sp.u.phi_part, sp.v.phi_part, sp.a.phi_part));
    if (!interior(k, n)) {
      rows.push_back({s.t, kNaN, scale});
      continue;
    }
    const Grid3& g = s.u.grid();
    const Field d = divergence(s.u);
    const Spectrum m = forward(gradient(s.u));
    std::vector<Spectrum> parts;
    for (const Field& h : hessian(d)) parts.push_back(forward(h));
    parts.push_back(forward(laplacian(gradient(sp.u.psi_part))));
    for (const Field& h : hessian(s.u)) parts.push_back(forward(h));
    std::vector<const cplx*> in;
    for (int c = 0; c < 9; ++c) in.push_back(m.comp(c));          // 0..8   M_jk
    for (int p = 0; p < 6; ++p) in.push_back(parts[p].comp(0));    // 9..14  d d D
    for (int c = 0; c < 9; ++c) in.push_back(parts[6].comp(c));    // 15..23 Lap d_j psi^k
    for (int p = 0; p < 6; ++p)
      for (int c = 0; c < 3; ++c) in.push_back(parts[7 + p].comp(c));  // 24..41 d_a d_b U^k
    const int deg = std::max(spec.degree(), 2);
    Spectrum src = dealiased_map(g, deg, in, 1, [&](const double* a, double* out) {
      double v = 0;
      for (int j = 0; j < 3; ++j)
        for (int kk = 0; kk < 3; ++kk) {
          const double mjk = a[3 * j + kk];
          const double gij = (j == kk ? c11 : 0.0) + 0.5 * (spec.gp(mjk) + spec.gp(a[3 * kk + j]));
          v += gij * a[9 + pair_index(j, kk)];
          v += spec.gp(mjk) * a[15 + 3 * j + kk];
          double sq = 0;
          for (int i = 0; i < 3; ++i) {
            const double dm = a[24 + 3 * pair_index(i, j) + kk];
            sq += dm * dm;
          }
          v += sgn * spec.gpp(mjk) * sq;
        }
      out[0] = v;
    });
    Spectrum dtt = forward(divergence(series_time_derivative(vs, k)));
    band_cut(dtt);
    for (std::size_t i = 0; i < src.raw().size(); ++i) src.raw()[i] -= dtt.raw()[i];
    rows.push_back({s.t, l2_norm(inverse(src, Rank::scalar)), scale});
  }
  return rows;
}

std::vector<EnergyRecord> strichartz_norms(const Trajectory& tr, double delta0) {
  std::vector<EnergyRecord> out;
  const MaterialSpec& spec = tr.config.material;
  double acc_s = 0, acc_lp = 0, prev_s = 0, prev_lp = 0;
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
    const State& s = tr.snapshots[k];
    const Split sp = split_state(s, spec);
    const std::vector<Field> dd = dd_fields(sp.u.phi_part, sp.v.phi_part, sp.a.phi_part);
    const double sup = sup_of(dd);
    double lp = 0;
    for (const LPBand& b : lp_bands(s.u.grid())) {
      double m = 0;
      for (const Field& f : dd) m = std::max(m, lp_project(f, b).max_abs());
      lp += std::pow(b.nu, 2 * delta0) * m * m;
    }
    if (k > 0) {
      const double h = s.t - tr.snapshots[k - 1].t;
      acc_s += 0.5 * h * (sup * sup + prev_s);
      acc_lp += 0.5 * h * (lp + prev_lp);
    }
    prev_s = sup * sup;
    prev_lp = lp;
    EnergyRecord r{};
    r.t = s.t;
    const EnergyParts e = standard_energy(s, spec);
    r.e_std = e.total;
    r.e_kin = e.kinetic;
    for (int i = 0; i < 3; ++i) {
      r.div_ladder[i] = sobolev_norm(sp.u.phi_part, kLadder[i]);
      r.curl_ladder[i] = sobolev_norm(sp.u.psi_part, kLadder[i]);
    }
    r.strichartz_partial = acc_s;
    r.lp_weighted = acc_lp;
    r.hyper_margin = k < tr.rows.size() ? tr.rows[k].hyper_margin : kNaN;
    out.push_back(r);
  }
  return out;
}

DiagnosticsTable build_diagnostics(const Trajectory& tr, double delta0) {
  return {strichartz_norms(tr, delta0), decoupling_monitor(tr), divpart_residual(tr)};
}

std::string diagnostics_csv(const DiagnosticsTable& t) {
  std::ostringstream os;
  os << "t,E_std,E_kin";
  for (double s : kLadder) os << ",H" << s << "_div";
  for (double s : kLadder) os << ",H" << s << "_curl";
  os << ",curl_norm,psi_gap,psi_residual,div_residual,div_scale,hyper_margin,strichartz,lp_sum\n";
  for (std::size_t k = 0; k < t.energy.size(); ++k) {
    const EnergyRecord& e = t.energy[k];
    os << num(e.t) << ',' << num(e.e_std) << ',' << num(e.e_kin);
    for (double v : e.div_ladder) os << ',' << num(v);
    for (double v : e.curl_ladder) os << ',' << num(v);
    const DecouplingRow* d = k < t.decoupling.size() ? &t.decoupling[k] : nullptr;
    const ResidualRow* r = k < t.divpart.size() ? &t.divpart[k] : nullptr;
    os << ',' << num(d ? d->curl_h1 : kNaN) << ',' << num(d ? d->psi_gap : kNaN) << ','
       << num(d ? d->psi_residual : kNaN) << ',' << num(r ? r->residual : kNaN) << ','
       << num(r ? r->scale : kNaN) << ',' << num(e.hyper_margin) << ',' << num(e.strichartz_partial) << ','
       << num(e.lp_weighted) << '\n';
  }
  return os.str();
}

}  // namespace ewlab
