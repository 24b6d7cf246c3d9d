#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ewlab/evolve.hpp"
#include "ewlab/material.hpp"
#include "ewlab/spacetime.hpp"
#include "ewlab/spline.hpp"

namespace ewlab {

// Lorentzian metric on (t, x, y, z) with g_00 = -1 and g_0i = 0 for every
// implementation here; only the spatial block varies.
class SpacetimeMetric {
 public:
  virtual ~SpacetimeMetric() = default;
  // order 0: g only; 1: first derivatives; 2: second derivatives too.
  virtual MetricJet jet(const Vec4& x, int order) const = 0;
  virtual double t_begin() const { return -std::numeric_limits<double>::infinity(); }
  virtual double t_end() const { return std::numeric_limits<double>::infinity(); }
  // Resolution of the underlying data, 0 for closed-form metrics.
  virtual double spacing() const { return 0.0; }
};

class FlatMetric final : public SpacetimeMetric {
 public:
  explicit FlatMetric(double c1) : c1_(c1) {}
  MetricJet jet(const Vec4&, int order) const override;

 private:
  double c1_;
};

class AnalyticMetric final : public SpacetimeMetric {
 public:
  using Fn = std::function<MetricJet(const Vec4&, int)>;
  explicit AnalyticMetric(Fn f) : f_(std::move(f)) {}
  MetricJet jet(const Vec4& x, int order) const override { return f_(x, order); }

 private:
  Fn f_;
};

// g = diag(-1, a(t)^2, a(t)^2, a(t)^2); da, dda are a' and a''.
std::unique_ptr<SpacetimeMetric> frw_metric(std::function<double(double)> a, std::function<double(double)> da,
                                            std::function<double(double)> dda);

// Acoustic metric of a stored trajectory, spline-interpolated.
class TrajectoryMetric final : public SpacetimeMetric {
 public:
  explicit TrajectoryMetric(const Trajectory& tr);
  MetricJet jet(const Vec4& x, int order) const override;
  double t_begin() const override { return spline_.t_begin(); }
  double t_end() const override { return spline_.t_end(); }
  double spacing() const override { return spline_.grid().spacing(); }

 private:
  SpacetimeSpline spline_;
};

// Lower spatial metric g(M) and its first two time derivatives at one point,
// from dU, its rate and its second rate (each 9 entries, (j,k) = d_j U^k).
void spatial_metric_jet_at(const double* m, const double* m_t, const double* m_tt, const MaterialSpec& spec,
                           Mat3& g, Mat3& g_t, Mat3& g_tt);

struct Icosphere {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // counter-clockwise seen from outside
  std::vector<std::vector<int>> ring1;
  std::vector<std::vector<int>> ring2;  // first and second neighbours
};
Icosphere make_icosphere(int level);
// Level whose vertex count 10 * 4^k + 2 is nearest to n_omega.
int icosphere_level(int n_omega);
inline int icosphere_count(int level) { return 10 * (1 << (2 * level)) + 2; }

struct RaySample {
  double t = 0;
  Vec3 x{};
  Vec3 n{};  // L = (1, n), N = n
  double ln_b = 0;
  double sigma = 0;
  Mat3 g{};  // spatial metric at x
  Vec3 e[2]{};
  double null_drift = 0;  // g(L, L)

  // filled by connection_coefficients
  bool has_coeffs = false;
  double chi[2][2]{};
  double chi_alt[2][2]{};  // theta - k route
  double theta[2][2]{};
  double k_ab[2][2]{};
  double trchi = 0;
  double chi_hat_sq = 0;
  double k_nn = 0;
  double zeta[2]{};
  double gamma_l = 0;
  double z = 0;
  double ric_ll = 0;
  double ric_ll_principal = 0;

  // filled by h_spacelike_check
  double H = std::numeric_limits<double>::quiet_NaN();
  Vec4 V{};
};

struct Ray {
  Vec3 omega{};
  std::vector<RaySample> samples;
  bool null_flag = false;
  bool reseeded = false;
};

struct GeodesicBundle {
  Vec4 tip{};
  double dt = 0;
  int level = 0;
  Icosphere sphere;
  std::vector<Ray> rays;
  double spacing = 0;
  bool truncated = false;          // requested end beyond the metric's coverage
  bool signature_failure = false;  // stopped where g lost its signature
  int crossings = 0;               // triangle orientation flips
  std::string note;

  std::size_t steps() const { return rays.empty() ? 0 : rays[0].samples.size(); }
  double r_tilde(std::size_t k) const { return rays[0].samples[k].t - tip[0]; }
  double max_null_drift() const;
};

// Lockstep RK4 of all rays from the tip up to t_stop (NaN: metric end).
GeodesicBundle trace_bundle(const SpacetimeMetric& metric, const Vec4& tip, int n_omega, double dt_ray,
                            double t_stop = std::numeric_limits<double>::quiet_NaN());
// Continue an existing bundle to a later t_stop with the same step.
void extend_bundle(GeodesicBundle& b, const SpacetimeMetric& metric, double t_stop);

// Null frame (L, Lbar, N, e_A) of a sample as spacetime vectors.
struct NullFrame {
  Vec4 L, Lbar, N, e1, e2;
};
NullFrame null_frame(const RaySample& s);

// g-orthonormal pair e_A orthogonal to N with det(e1, e2, N) > 0, continuing
// `prev` (may be null) by re-orthonormalization. True when a non-null prev
// collapsed and the pair was reseeded from the coordinate axes.
bool sphere_tangents(const Mat3& g, const Vec3& N, const Vec3* prev, Vec3 out[2]);

struct FrameCheck {
  double max_dev = 0;        // worst Gram-table deviation
  double max_lbar_null = 0;  // |g(Lbar, Lbar)|
};
FrameCheck frame_identities(const GeodesicBundle& b);

// Columns u, ray_id, t, x, y, z, L0..L3, trchi, zsmall, sigma, H, null_drift;
// nan where a quantity was not computed.
std::string geodesics_csv(const GeodesicBundle& b);

// Fills chi (both routes), theta, k, zeta, Gamma_L, z and Ric(L,L).
void connection_coefficients(GeodesicBundle& b, const SpacetimeMetric& metric);

struct RicciLL {
  double value;
  double principal;
  double gap;
};
RicciLL ricci_LL(const SpacetimeMetric& metric, const Vec4& event, const Vec4& L);

// Default exclusion radius near the tip: max(2 * spacing, 0.1).
double tip_exclusion(const GeodesicBundle& b);

struct RaychaudhuriResult {
  std::vector<std::vector<double>> residual;  // [ray][sample], NaN where not evaluated
  double max_abs = 0;
  double rms = 0;
  double scale = 0;  // max of trchi^2 / 2 over evaluated samples
  std::size_t evaluated = 0;
};
RaychaudhuriResult raychaudhuri_residual(const GeodesicBundle& b, bool drop_knn = false, double r_min = -1);

struct HSpacelikeResult {
  bool ok = true;
  double min_H = 0;
  double max_normalization_error = 0;  // |h(V, V) + 1|
  double min_cov = 0, max_cov = 0;      // h^-1(du, du) range
  double mean_v0 = 0;
  bool margin_consistent = true;  // positive ellipticity margin implies H > 0
  double margin_at_failure = 0;
  std::size_t failures = 0;
};
// h-unit future normal V to the cone tangent space (L, e1, e2) and
// h^-1(du, du) for the cone covector scaled to |du_0| = 1. False when the
// normal is not h-timelike.
bool cone_normal(const RaySample& s, double c2, Vec4& V, double& cov);
HSpacelikeResult h_spacelike_check(GeodesicBundle& b, const MaterialSpec& spec);

// Scalar field on spacetime: value and (d_t, d_x, d_y, d_z).
class ScalarSource {
 public:
  virtual ~ScalarSource() = default;
  virtual void eval(const Vec4& x, double& value, Vec4& grad) const = 0;
};

class AnalyticScalar final : public ScalarSource {
 public:
  using Fn = std::function<void(const Vec4&, double&, Vec4&)>;
  explicit AnalyticScalar(Fn f) : f_(std::move(f)) {}
  void eval(const Vec4& x, double& value, Vec4& grad) const override { f_(x, value, grad); }

 private:
  Fn f_;
};

enum class FieldPart { full, phi, psi };
FieldPart field_part_from_name(const std::string& s);

// One displacement component of a trajectory (or of its Helmholtz part).
class TrajectoryScalar final : public ScalarSource {
 public:
  TrajectoryScalar(const Trajectory& tr, FieldPart part, int component);
  void eval(const Vec4& x, double& value, Vec4& grad) const override;

 private:
  SpacetimeSpline spline_;
};

struct FluxResult {
  double F1 = 0, F2 = 0, denom = 0, coercive_ratio = 0;
  std::size_t used_steps = 0, excluded_steps = 0;
};
FluxResult null_fluxes(GeodesicBundle& b, const ScalarSource& field, const MaterialSpec& spec, double r_min = -1);

}  // namespace ewlab
