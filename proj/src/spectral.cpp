#include "ewlab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <set>

namespace ewlab {

namespace {

struct Plans {
  fftw_plan r2c;
  fftw_plan c2r;
};

std::mutex g_plan_mutex;
std::map<int, Plans> g_plans;

// Planning is not thread-safe in FFTW; execution with new arrays is.
const Plans& plans_for(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = g_plans.find(n);
  if (it != g_plans.end()) return it->second;
  const std::size_t nr = std::size_t(n) * n * n;
  const std::size_t nc = std::size_t(n) * n * (n / 2 + 1);
  double* r = fftw_alloc_real(nr);
  fftw_complex* c = fftw_alloc_complex(nc);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans p;
  p.r2c = fftw_plan_dft_r2c_3d(n, n, n, r, c, flags);
  p.c2r = fftw_plan_dft_c2r_3d(n, n, n, c, r, flags);
  fftw_free(r);
  fftw_free(c);
  return g_plans.emplace(n, p).first->second;
}

std::atomic<bool> g_broken_helmholtz{false};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mode_key(std::uint64_t seed, int c, int m1, int m2, int m3) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ std::uint64_t(c));
  h = splitmix(h ^ std::uint64_t(std::int64_t(m1)));
  h = splitmix(h ^ std::uint64_t(std::int64_t(m2)));
  return splitmix(h ^ std::uint64_t(std::int64_t(m3)));
}

bool is_nyquist(int m, int n) { return 2 * std::abs(m) == n; }

int fft_friendly(int target) {
  for (int v = std::max(target, 1);; ++v) {
    int r = v;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1 && v % 2 == 0) return v;
  }
}

template <class M>
Field apply_multiplier(const Field& f, M&& mult) {
  Spectrum s = forward(f);
  for (int c = 0; c < s.ncomp(); ++c) {
    cplx* d = s.comp(c);
    for_each_mode(f.grid(), [&](std::size_t idx, int m1, int m2, int m3) { d[idx] *= mult(m1, m2, m3); });
  }
  return inverse(s, f.rank());
}

double full_xi_norm(const Grid3& g, int m1, int m2, int m3) {
  const double a = g.wavenumber(m1), b = g.wavenumber(m2), c = g.wavenumber(m3);
  return std::sqrt(a * a + b * b + c * c);
}

}  // namespace

Spectrum::Spectrum(const Grid3& g, int ncomp)
    : grid_(g), ncomp_(ncomp), data_(ncomp * std::size_t(g.n()) * g.n() * (g.n() / 2 + 1)) {}

void fft_forward(int n, const double* in, cplx* out) {
  const Plans& p = plans_for(n);
  fftw_execute_dft_r2c(p.r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

void fft_inverse(int n, const cplx* in, double* out) {
  const Plans& p = plans_for(n);
  const std::size_t nc = std::size_t(n) * n * (n / 2 + 1);
  thread_local std::vector<cplx> scratch;
  scratch.assign(in, in + nc);  // c2r overwrites its input
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  const double inv = 1.0 / (double(n) * n * n);
  const std::size_t nr = std::size_t(n) * n * n;
  for (std::size_t i = 0; i < nr; ++i) out[i] *= inv;
}

Spectrum forward(const Field& f) {
  Spectrum s(f.grid(), f.ncomp());
  for (int c = 0; c < f.ncomp(); ++c) fft_forward(f.grid().n(), f.component(c).data(), s.comp(c));
  return s;
}

Field inverse(const Spectrum& s, Rank r) {
  if (components(r) != s.ncomp()) throw ContractViolation("inverse: rank does not match spectrum");
  Field f(s.grid(), r);
  for (int c = 0; c < s.ncomp(); ++c) fft_inverse(s.grid().n(), s.comp(c), f.component(c).data());
  return f;
}

double odd_symbol(const Grid3& g, int m) { return is_nyquist(m, g.n()) ? 0.0 : g.wavenumber(m); }

Field spectral_derivative(const Field& f, DerivKind kind, int a, int b) {
  f.require_finite("spectral_derivative");
  const Grid3& g = f.grid();
  const Spectrum s = forward(f);
  auto sym = [&](int axis, int m1, int m2, int m3) {
    return odd_symbol(g, axis == 0 ? m1 : axis == 1 ? m2 : m3);
  };
  const cplx I(0, 1);
  switch (kind) {
    case DerivKind::grad: {
      if (f.rank() == Rank::matrix3x3) throw ContractViolation("grad of a matrix field");
      const int nc = f.ncomp();
      Spectrum out(g, 3 * nc);
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < nc; ++k) {
          cplx* o = out.comp(j * nc + k);
          const cplx* in = s.comp(k);
          for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) { o[idx] = I * sym(j, m1, m2, m3) * in[idx]; });
        }
      return inverse(out, nc == 1 ? Rank::vector3 : Rank::matrix3x3);
    }
    case DerivKind::div: {
      if (f.rank() == Rank::scalar) throw ContractViolation("div of a scalar field");
      const int nout = f.rank() == Rank::vector3 ? 1 : 3;
      Spectrum out(g, nout);
      for (int k = 0; k < nout; ++k) {
        cplx* o = out.comp(k);
        for (int j = 0; j < 3; ++j) {
          const cplx* in = s.comp(nout == 1 ? j : 3 * j + k);
          for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) { o[idx] += I * sym(j, m1, m2, m3) * in[idx]; });
        }
      }
      return inverse(out, nout == 1 ? Rank::scalar : Rank::vector3);
    }
    case DerivKind::curl: {
      if (f.rank() != Rank::vector3) throw ContractViolation("curl needs a vector field");
      Spectrum out(g, 3);
      for (int c = 0; c < 3; ++c) {
        const int p = (c + 1) % 3, q = (c + 2) % 3;
        cplx* o = out.comp(c);
        const cplx* fq = s.comp(q);
        const cplx* fp = s.comp(p);
        for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
          o[idx] = I * (sym(p, m1, m2, m3) * fq[idx] - sym(q, m1, m2, m3) * fp[idx]);
        });
      }
      return inverse(out, Rank::vector3);
    }
    case DerivKind::laplacian: {
      Spectrum out = s;
      for (int c = 0; c < s.ncomp(); ++c) {
        cplx* o = out.comp(c);
        for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
          const double x = full_xi_norm(g, m1, m2, m3);
          o[idx] *= -x * x;
        });
      }
      return inverse(out, f.rank());
    }
    case DerivKind::mixed: {
      if (a < 0 || a > 2 || b < 0 || b > 2) throw ContractViolation("mixed derivative axis out of range");
      Spectrum out = s;
      for (int c = 0; c < s.ncomp(); ++c) {
        cplx* o = out.comp(c);
        for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
          const int ms[3] = {m1, m2, m3};
          double v;
          if (a == b) {
            const double x = g.wavenumber(ms[a]);
            v = -x * x;
          } else {
            v = -odd_symbol(g, ms[a]) * odd_symbol(g, ms[b]);
          }
          o[idx] *= v;
        });
      }
      return inverse(out, f.rank());
    }
  }
  throw ContractViolation("unknown derivative kind");
}

Field gradient(const Field& f) { return spectral_derivative(f, DerivKind::grad); }
Field divergence(const Field& f) { return spectral_derivative(f, DerivKind::div); }
Field curl(const Field& f) { return spectral_derivative(f, DerivKind::curl); }
Field laplacian(const Field& f) { return spectral_derivative(f, DerivKind::laplacian); }

namespace testing_hooks {
void set_broken_helmholtz(bool on) { g_broken_helmholtz.store(on); }
bool broken_helmholtz() { return g_broken_helmholtz.load(); }
}  // namespace testing_hooks

Helmholtz helmholtz_decompose(const Field& v) {
  if (v.rank() != Rank::vector3) throw ContractViolation("helmholtz_decompose needs a vector field");
  v.require_finite("helmholtz_decompose");
  const Grid3& g = v.grid();
  const Spectrum s = forward(v);
  Spectrum phi(g, 3), psi(g, 3);
  const bool broken = testing_hooks::broken_helmholtz();
  const double npts = double(g.points());
  Helmholtz out{Field(g, Rank::vector3), Field(g, Rank::vector3), {0, 0, 0}};
  for (int c = 0; c < 3; ++c) out.mean[c] = s.comp(c)[0].real() / npts;
  for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
    if (idx == 0) return;  // mean belongs to neither part
    double xi[3] = {odd_symbol(g, m1), odd_symbol(g, m2), odd_symbol(g, m3)};
    if (broken) xi[2] = 0.0;
    const double x2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    const cplx vh[3] = {s.comp(0)[idx], s.comp(1)[idx], s.comp(2)[idx]};
    if (x2 == 0.0) {
      for (int c = 0; c < 3; ++c) psi.comp(c)[idx] = vh[c];
      return;
    }
    const cplx dot = (xi[0] * vh[0] + xi[1] * vh[1] + xi[2] * vh[2]) / x2;
    for (int c = 0; c < 3; ++c) {
      phi.comp(c)[idx] = xi[c] * dot;
      psi.comp(c)[idx] = vh[c] - xi[c] * dot;
    }
  });
  out.phi_part = inverse(phi, Rank::vector3);
  out.psi_part = inverse(psi, Rank::vector3);
  return out;
}

double lp_eta(double r) {
  auto e = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
  if (r <= 0.5) return 1.0;
  if (r >= 1.0) return 0.0;
  const double a = e(2 - 2 * r), b = e(2 * r - 1);
  return a / (a + b);
}

double lp_bump(double r) { return lp_eta(r / 2) * (1.0 - lp_eta(r)); }

LPBand::LPBand(double nu_) : nu(nu_) {
  const double k = std::log2(nu_);
  if (!(nu_ >= 2) || std::abs(k - std::round(k)) > 1e-12)
    throw ContractViolation("LP band frequency must be 2^k with k >= 1");
}

Field lp_project(const Field& f, const LPBand& band) {
  const Grid3& g = f.grid();
  if (band.nu > g.nyquist()) {
    // once per (grid, band)
    static std::mutex mu;
    static std::set<std::pair<int, double>> seen;
    std::lock_guard<std::mutex> lock(mu);
    if (seen.insert({g.n(), band.nu}).second)
      log_warning("LP band " + std::to_string(band.nu) + " beyond grid Nyquist; band truncated by the grid");
  }
  return apply_multiplier(f, [&](int m1, int m2, int m3) { return lp_bump(full_xi_norm(g, m1, m2, m3) / band.nu); });
}

Field lp_low(const Field& f) {
  const Grid3& g = f.grid();
  return apply_multiplier(f, [&](int m1, int m2, int m3) { return lp_eta(full_xi_norm(g, m1, m2, m3) / 2.0); });
}

std::vector<LPBand> lp_bands(const Grid3& g) {
  const double rmax = std::sqrt(3.0) * g.nyquist();
  std::vector<LPBand> out;
  for (double nu = 2; nu / 2 < rmax; nu *= 2) out.emplace_back(nu);
  return out;
}

double sobolev_norm(const Field& f, double s) {
  const Grid3& g = f.grid();
  const Spectrum sp = forward(f);
  const int n = g.n();
  double total = 0;
  for (int c = 0; c < sp.ncomp(); ++c) {
    const cplx* d = sp.comp(c);
    double acc = 0;
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      const double x = full_xi_norm(g, m1, m2, m3);
      acc += half_weight(m3, n) * std::pow(1 + x * x, s) * std::norm(d[idx]);
    });
    total += acc;
  }
  const double L = g.box_len();
  const double np = double(g.points());
  return std::sqrt(total * L * L * L / (np * np));
}

double lp_sobolev_norm(const Field& f, double s) {
  double acc = 0;
  for (const LPBand& b : lp_bands(f.grid())) {
    // top bands are cut by the grid on purpose here, no warning
    const Grid3& g = f.grid();
    const double p = l2_norm(apply_multiplier(f, [&](int m1, int m2, int m3) {
      return lp_bump(full_xi_norm(g, m1, m2, m3) / b.nu);
    }));
    acc += std::pow(b.nu, 2 * s) * p * p;
  }
  return l2_norm(f) + std::sqrt(acc);
}

double l2_norm(const Field& f) {
  double acc = 0;
  for (double v : f.data()) acc += v * v;
  const double h = f.grid().spacing();
  return std::sqrt(acc * h * h * h);
}

double holder_seminorm(const Field& f, double beta, int r_max, bool periodic) {
  const Grid3& g = f.grid();
  const int n = g.n();
  if (r_max < 1 || r_max > n / 4) throw ContractViolation("holder_seminorm: r_max must lie in [1, n/4]");
  if (!(beta > 0 && beta < 1)) throw ContractViolation("holder_seminorm: beta must lie in (0, 1)");
  const double h = g.spacing();
  double best = 0;
  for (int c = 0; c < f.ncomp(); ++c) {
    const auto d = f.component(c);
    for (int di = 0; di <= r_max; ++di)
      for (int dj = -r_max; dj <= r_max; ++dj)
        for (int dk = -r_max; dk <= r_max; ++dk) {
          // half of the symmetric offset set
          if (di == 0 && (dj < 0 || (dj == 0 && dk <= 0))) continue;
          const double dist = h * std::sqrt(double(di * di + dj * dj + dk * dk));
          const double w = 1.0 / std::pow(dist, beta);
          for (int i = 0; i < n; ++i) {
            if (!periodic && (i + di >= n)) continue;
            for (int j = 0; j < n; ++j) {
              if (!periodic && (j + dj < 0 || j + dj >= n)) continue;
              for (int k = 0; k < n; ++k) {
                if (!periodic && (k + dk < 0 || k + dk >= n)) continue;
                const double q = std::abs(d[g.index(i, j, k)] - d[g.index(i + di, j + dj, k + dk)]) * w;
                best = std::max(best, q);
              }
            }
          }
        }
  }
  return best;
}

Field rough_random_field(const Grid3& g, double s, double amplitude, std::uint64_t seed, Rank r,
                         std::optional<int> kmax) {
  if (!(s > 0)) throw ContractViolation("rough_random_field: s must be positive");
  const int n = g.n();
  Spectrum sp(g, components(r));
  const double expo = -s - 1.5 - 0.01;
  for (int c = 0; c < sp.ncomp(); ++c) {
    cplx* d = sp.comp(c);
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      if (idx == 0 || is_nyquist(m1, n) || is_nyquist(m2, n) || is_nyquist(m3, n)) return;
      if (kmax && std::max({std::abs(m1), std::abs(m2), std::abs(m3)}) > *kmax) return;
      // the pair (m, -m) shares one phase; both members may be stored when m3 == 0
      const bool canonical = m3 > 0 || m1 > 0 || (m1 == 0 && m2 > 0);
      const int sgn = canonical ? 1 : -1;
      const std::uint64_t key = mode_key(seed, c, sgn * m1, sgn * m2, sgn * m3);
      const double theta = 2 * std::numbers::pi * double(key >> 11) * 0x1.0p-53;
      const double x = full_xi_norm(g, m1, m2, m3);
      const double mag = std::pow(1 + x * x, 0.5 * expo);
      d[idx] = std::polar(mag, sgn * theta);
    });
  }
  Field f = inverse(sp, r);
  const double norm = sobolev_norm(f, s);
  if (norm > 0) f *= amplitude / norm;
  return f;
}

Field resample(const Field& f, int n_target) {
  const Grid3& g = f.grid();
  const Grid3 gt(n_target, g.box_len());
  if (n_target == g.n()) return f;
  const Spectrum s = forward(f);
  Spectrum t(gt, s.ncomp());
  const int nmin = std::min(g.n(), n_target);
  const double scale = double(gt.points()) / double(g.points());
  for (int c = 0; c < s.ncomp(); ++c) {
    const cplx* in = s.comp(c);
    cplx* out = t.comp(c);
    for_each_mode(g, [&](std::size_t idx, int m1, int m2, int m3) {
      if (2 * std::abs(m1) >= nmin || 2 * std::abs(m2) >= nmin || 2 * m3 >= nmin) return;
      const int i = m1 < 0 ? m1 + n_target : m1;
      const int j = m2 < 0 ? m2 + n_target : m2;
      out[(std::size_t(i) * n_target + j) * (n_target / 2 + 1) + m3] = in[idx] * scale;
    });
  }
  return inverse(t, f.rank());
}

FieldSeries frequency_rescale(const FieldSeries& f, double lambda, double t_k,
                              const std::vector<double>& rescaled_times, int n_target) {
  if (!(lambda >= 1)) throw ContractViolation("frequency_rescale: lambda must be >= 1");
  if (f.times.empty() || f.times.size() != f.fields.size())
    throw ContractViolation("frequency_rescale: malformed snapshot series");
  const Grid3& g = f.fields.front().grid();
  const Grid3 gout(n_target, lambda * g.box_len());
  FieldSeries out;
  const double tol = 1e-12 * std::max(1.0, std::abs(f.times.back()));
  for (double tau : rescaled_times) {
    const double t = t_k + tau / lambda;
    if (t < f.times.front() - tol || t > f.times.back() + tol)
      throw InputError("frequency_rescale: requested time outside snapshot coverage");
    std::size_t s = 0;
    while (s + 1 < f.times.size() && f.times[s + 1] < t) ++s;
    Field v = f.fields[s];
    if (s + 1 < f.times.size()) {
      const double w = std::clamp((t - f.times[s]) / (f.times[s + 1] - f.times[s]), 0.0, 1.0);
      v *= 1 - w;
      v.axpy(w, f.fields[s + 1]);
    }
    Field r = resample(v, n_target);
    out.times.push_back(tau);
    out.fields.emplace_back(gout, r.rank(), std::vector<double>(r.data().begin(), r.data().end()));
  }
  return out;
}

PaddedEvaluator::PaddedEvaluator(const Grid3& g, int degree) : grid_(g) {
  const int n = g.n();
  np_ = fft_friendly(std::max(n, ((std::max(degree, 1) + 1) * n + 1) / 2));
}

void PaddedEvaluator::to_real(const cplx* base, double* out) const {
  const int n = grid_.n(), nph = np_ / 2 + 1;
  thread_local std::vector<cplx> buf;
  buf.assign(std::size_t(np_) * np_ * nph, cplx(0));
  const double scale = double(padded_points()) / double(grid_.points());
  for_each_mode(grid_, [&](std::size_t idx, int m1, int m2, int m3) {
    if (is_nyquist(m1, n) || is_nyquist(m2, n) || is_nyquist(m3, n)) return;
    const int i = m1 < 0 ? m1 + np_ : m1;
    const int j = m2 < 0 ? m2 + np_ : m2;
    buf[(std::size_t(i) * np_ + j) * nph + m3] = base[idx] * scale;
  });
  fft_inverse(np_, buf.data(), out);
}

void PaddedEvaluator::to_spectral(const double* padded, cplx* base) const {
  const int n = grid_.n(), nph = np_ / 2 + 1, cut = two_thirds_cut(n);
  thread_local std::vector<cplx> buf;
  buf.resize(std::size_t(np_) * np_ * nph);
  fft_forward(np_, padded, buf.data());
  const double scale = double(grid_.points()) / double(padded_points());
  for_each_mode(grid_, [&](std::size_t idx, int m1, int m2, int m3) {
    if (std::abs(m1) > cut || std::abs(m2) > cut || m3 > cut) {
      base[idx] = 0;
      return;
    }
    const int i = m1 < 0 ? m1 + np_ : m1;
    const int j = m2 < 0 ? m2 + np_ : m2;
    base[idx] = buf[(std::size_t(i) * np_ + j) * nph + m3] * scale;
  });
}

}  // namespace ewlab
