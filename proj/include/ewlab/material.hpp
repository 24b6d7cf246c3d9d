#pragma once

#include <vector>

#include "ewlab/grid.hpp"
#include "ewlab/spacetime.hpp"
#include "ewlab/spectral.hpp"

namespace ewlab {

// Admissible harmonic material. gamma holds (k2, k3, ...) of
// gamma(m) = sum_p k_p m^p / p, and G(dU) = sum_{j,k} gamma(d_j U^k).
struct MaterialSpec {
  double c1 = 1.0;
  double c2 = 0.5;
  double b_coef = 0.5;
  std::vector<double> gamma{0.4, 0.1};

  void validate() const;
  double g(double m) const;
  double gp(double m) const;
  double gpp(double m) const;
  double gppp(double m) const;
  // Highest power of gamma with a nonzero coefficient (0 when linear).
  int degree() const;
  double max_abs_gpp(double range) const;
};

Field deformation_gradient(const Field& u);

struct PiolaResult {
  Field residual;
  double max_norm;
};
PiolaResult piola_identity_residual(const Field& u);

// f_i = sum_{j,k} gamma'(d_j U^k) d_i d_j U^k, products evaluated exactly.
Field nonlinearity(const Field& u, const MaterialSpec& spec);
// Same quantity as grad of G(dU).
Field nonlinearity_gradient_form(const Field& u, const MaterialSpec& spec);

Field acceleration(const Field& u, const MaterialSpec& spec);
// Unreduced right side: linear part + div{G I + b cof(F)}.
Field acceleration_unreduced(const Field& u, const MaterialSpec& spec);

// Spectral kernels used by the integrator.
Spectrum nonlinearity_spectrum(const Spectrum& uhat, const MaterialSpec& spec);
Spectrum acceleration_spectrum(const Spectrum& uhat, const MaterialSpec& spec);

struct HyperbolicityResult {
  bool ok;
  double margin;      // smallest eigenvalue over the grid
  double lambda_max;  // largest eigenvalue over the grid
  double bound;       // C = max(lambda_max, 1 / margin)
};
HyperbolicityResult hyperbolicity_check(const Field& du, const MaterialSpec& spec);

// Largest eigenvalue of the spatial block of g^{-1} over the grid.
double max_wave_speed_sq(const Field& du, const MaterialSpec& spec);

struct MetricSample {
  Mat4 g_inv;
  Mat4 g;
  Mat4 h_inv;
  Mat4 h;
};

struct MetricField {
  Grid3 grid;
  std::vector<MetricSample> samples;
};

MetricField acoustic_metrics(const Field& dphi, const Field& dpsi, const MaterialSpec& spec);

// Spatial inverse block c1^2 delta + symmetrized gamma' and its inverse.
Mat3 spatial_inverse_metric_at(const double* du9, const MaterialSpec& spec);
Field spatial_metric(const Field& du, const MaterialSpec& spec);
// Time derivative of the lower spatial metric given d(dU)/dt.
Field spatial_metric_rate(const Field& du, const Field& du_dt, const MaterialSpec& spec);

struct EllipticityResult {
  bool ok;
  double margin_inverse;  // min eigenvalue of g^-1 - h^-1
  double margin_lower;    // min eigenvalue of -(g - h)
};
EllipticityResult ellipticity_check(const Field& g_spatial, const MaterialSpec& spec);

// Lower spatial metric snapshots of a metric with g_00 = -1, g_0i = 0.
struct MetricSeries {
  std::vector<double> times;
  std::vector<Field> g;
};

// Christoffel data at a snapshot time and grid point.
Connection christoffel(const MetricSeries& m, double t, int i, int j, int k);

// Contracted Gamma^a as four scalar fields at snapshot s.
std::array<Field, 4> contracted_christoffel_field(const MetricSeries& m, std::size_t s);

// box_g phi (reduced = false) or g^{ab} d_a d_b phi (reduced = true) at
// snapshot s, using central time differences.
Field wave_operator(const FieldSeries& phi, const MetricSeries& m, bool reduced, std::size_t s);

}  // namespace ewlab
