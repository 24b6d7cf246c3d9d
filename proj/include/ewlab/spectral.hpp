#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "ewlab/grid.hpp"

namespace ewlab {

using cplx = std::complex<double>;

// Half-complex spectrum (last axis 0..n/2) of each component, unnormalized
// forward transform.
class Spectrum {
 public:
  Spectrum(const Grid3& g, int ncomp);

  const Grid3& grid() const { return grid_; }
  int ncomp() const { return ncomp_; }
  int nh() const { return grid_.n() / 2 + 1; }
  std::size_t comp_size() const { return std::size_t(grid_.n()) * grid_.n() * nh(); }
  cplx* comp(int c) { return data_.data() + c * comp_size(); }
  const cplx* comp(int c) const { return data_.data() + c * comp_size(); }
  std::vector<cplx>& raw() { return data_; }
  const std::vector<cplx>& raw() const { return data_; }

 private:
  Grid3 grid_;
  int ncomp_;
  std::vector<cplx> data_;
};

// Visit every stored mode: f(idx, m1, m2, m3) with m3 >= 0.
template <class F>
void for_each_mode(const Grid3& g, F&& f) {
  const int n = g.n(), nh = n / 2 + 1;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    const int m1 = g.wave_index(i);
    for (int j = 0; j < n; ++j) {
      const int m2 = g.wave_index(j);
      for (int k = 0; k < nh; ++k, ++idx) f(idx, m1, m2, k);
    }
  }
}

// Plancherel multiplicity of a half-spectrum entry.
inline double half_weight(int m3, int n) { return (m3 == 0 || 2 * m3 == n) ? 1.0 : 2.0; }

// Raw 3D transforms on an n^3 real array (any FFT-friendly n).
void fft_forward(int n, const double* in, cplx* out);
// Inverse, normalized by 1/n^3. Input is not modified.
void fft_inverse(int n, const cplx* in, double* out);

Spectrum forward(const Field& f);
Field inverse(const Spectrum& s, Rank r);

// Symbol of an odd derivative along one axis (Nyquist zeroed).
double odd_symbol(const Grid3& g, int m);

enum class DerivKind { grad, div, curl, laplacian, mixed };

// Fourier-multiplier derivative. For `mixed`, (a, b) select d_a d_b.
Field spectral_derivative(const Field& f, DerivKind kind, int a = 0, int b = 0);

// Convenience wrappers.
Field gradient(const Field& f);  // scalar -> vector, vector -> matrix with entry (j,k) = d_j f^k
Field divergence(const Field& f);  // vector -> scalar, matrix -> vector (contracts first index)
Field curl(const Field& f);
Field laplacian(const Field& f);

struct Helmholtz {
  Field phi_part;
  Field psi_part;
  double mean[3];
};

Helmholtz helmholtz_decompose(const Field& v);

namespace testing_hooks {
// Corrupts the Helmholtz projector (mutation tests only).
void set_broken_helmholtz(bool on);
bool broken_helmholtz();
}  // namespace testing_hooks

// Littlewood-Paley machinery.
double lp_eta(double r);
double lp_bump(double r);

struct LPBand {
  explicit LPBand(double nu);
  double nu;
};

Field lp_project(const Field& f, const LPBand& band);
// Complement of all bands nu >= 2: multiplier eta(|xi| / 2).
Field lp_low(const Field& f);
// Dyadic bands whose support meets the grid spectrum.
std::vector<LPBand> lp_bands(const Grid3& g);

double sobolev_norm(const Field& f, double s);
double l2_norm(const Field& f);
// LP-side equivalent ||f||_L2 + (sum_nu nu^(2s) ||P_nu f||^2)^(1/2).
double lp_sobolev_norm(const Field& f, double s);

double holder_seminorm(const Field& f, double beta, int r_max, bool periodic = true);

// Random phases, magnitudes <xi>^(-s-3/2-0.01), rescaled to H^s norm
// `amplitude`. Zero mean, Nyquist planes empty. kmax optionally restricts
// to max|m_a| <= kmax.
Field rough_random_field(const Grid3& g, double s, double amplitude, std::uint64_t seed,
                         Rank r = Rank::scalar, std::optional<int> kmax = std::nullopt);

// Trigonometric interpolation onto another resolution of the same box.
Field resample(const Field& f, int n_target);

struct FieldSeries {
  std::vector<double> times;
  std::vector<Field> fields;
};

// Samples of f(t_k + t / lambda, x / lambda) on a box of length lambda * L
// with n_target points per axis, at the requested rescaled times.
FieldSeries frequency_rescale(const FieldSeries& f, double lambda, double t_k,
                              const std::vector<double>& rescaled_times, int n_target);

// Exact evaluation of pointwise polynomial maps of band-limited fields.
class PaddedEvaluator {
 public:
  PaddedEvaluator(const Grid3& g, int degree);
  int padded_n() const { return np_; }
  std::size_t padded_points() const { return std::size_t(np_) * np_ * np_; }
  // Base-grid half spectrum -> real samples on the padded grid (Nyquist planes dropped).
  void to_real(const cplx* base, double* out) const;
  // Padded samples -> base-grid half spectrum, 2/3-truncated.
  void to_spectral(const double* padded, cplx* base) const;

 private:
  Grid3 grid_;
  int np_;
};

// Largest retained |m_a| after the 2/3 truncation.
inline int two_thirds_cut(int n) { return n / 3; }

// Apply f(in, out) pointwise on the padded grid; inputs are spectra of
// single components, outputs returned as a spectrum with n_out components.
template <class F>
Spectrum dealiased_map(const Grid3& g, int degree, const std::vector<const cplx*>& inputs,
                       int n_out, F&& f) {
  PaddedEvaluator ev(g, degree);
  const std::size_t np = ev.padded_points();
  const int nin = int(inputs.size());
  std::vector<double> in(nin * np), out(std::size_t(n_out) * np);
  for (int c = 0; c < nin; ++c) ev.to_real(inputs[c], in.data() + c * np);
  std::vector<double> a(nin), b(n_out);
  for (std::size_t p = 0; p < np; ++p) {
    for (int c = 0; c < nin; ++c) a[c] = in[c * np + p];
    f(a.data(), b.data());
    for (int c = 0; c < n_out; ++c) out[c * np + p] = b[c];
  }
  Spectrum res(g, n_out);
  for (int c = 0; c < n_out; ++c) ev.to_spectral(out.data() + c * np, res.comp(c));
  return res;
}

}  // namespace ewlab
