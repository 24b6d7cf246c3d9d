#include "ewlab/spline.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ewlab/spectral.hpp"

namespace ewlab {

double bspline5(double x, int deriv) {
  if (x <= -3 || x >= 3) return 0;
  // truncated-power form
  static const double binom[7] = {1, 6, 15, 20, 15, 6, 1};
  static const double fall[4][2] = {{1, 5}, {5, 4}, {20, 3}, {60, 2}};  // d^k y^5 = coeff * y^(5-k)
  const double c = fall[deriv][0];
  const int p = int(fall[deriv][1]);
  double s = 0;
  for (int k = 0; k < 7; ++k) {
    const double y = x + 3 - k;
    if (y <= 0) break;
    const double v = c * std::pow(y, p);
    s += (k % 2 ? -binom[k] : binom[k]) * v;
  }
  return s / 120.0;
}

namespace {

// weights of the 6 taps for fractional position f, derivative orders 0..2
void tap_weights(double f, double h, int order, double w[3][6]) {
  for (int o = 0; o <= order; ++o) {
    const double sc = std::pow(h, -o);
    for (int q = 0; q < 6; ++q) w[o][q] = bspline5(f + 2 - q, o) * sc;
  }
}

}  // namespace

SpacetimeSpline::SpacetimeSpline(const Grid3& grid, int ncomp, double t0, double dt,
                                 const std::vector<Samples>& values, const Ends& ends)
    : grid_(grid), ncomp_(ncomp), nt_(int(values.size())), t0_(t0), dt_(dt) {
  if (nt_ < 2) throw ContractViolation("SpacetimeSpline: needs at least two time samples");
  if (!(dt > 0)) throw ContractViolation("SpacetimeSpline: dt must be positive");
  const std::size_t np = grid_.points();
  const int nq = nt_ + 4;
  const int n = grid_.n();

  std::vector<double> beta(np);
  for_each_mode(grid_, [&](std::size_t idx, int m1, int m2, int m3) {
    double b = 1;
    for (int m : {m1, m2, m3}) {
      const double th = 2 * M_PI * m / n;
      b *= (66 + 52 * std::cos(th) + 2 * std::cos(2 * th)) / 120.0;
    }
    beta[idx] = b;
  });
  // spatial prefilter of every time slice and end condition
  auto prefilter = [&](const Samples& f) {
    if (f.size() != np * ncomp_) throw ContractViolation("SpacetimeSpline: sample size mismatch");
    Samples out(f.size());
    for (int c = 0; c < ncomp_; ++c) {
      Field one(grid_, Rank::scalar, std::vector<double>(f.begin() + c * np, f.begin() + (c + 1) * np));
      Spectrum s = forward(one);
      for (std::size_t i = 0; i < s.comp_size(); ++i) s.comp(0)[i] /= beta[i];
      const Field back = inverse(s, Rank::scalar);
      std::copy(back.data().begin(), back.data().end(), out.begin() + c * np);
    }
    return out;
  };
  std::vector<Samples> rhs;
  for (const Samples& f : values) rhs.push_back(prefilter(f));
  for (const Samples* f : {&ends.d1_first, &ends.d2_first, &ends.d1_last, &ends.d2_last}) rhs.push_back(prefilter(*f));

  // time collocation with clamped ends
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nq, nq);
  for (int i = 0; i < nt_; ++i)
    for (int d = -2; d <= 2; ++d) A(i, i + d + 2) = bspline5(d);
  for (int o = 1; o <= 2; ++o)
    for (int d = -2; d <= 2; ++d) {
      // node 0 uses coefficients j = d (index d + 2), node nt-1 uses j = nt-1+d
      A(nt_ + o - 1, d + 2) = bspline5(-d, o) * std::pow(dt, -o);
      A(nt_ + 1 + o, nt_ - 1 + d + 2) = bspline5(-d, o) * std::pow(dt, -o);
    }
  const Eigen::MatrixXd Ainv = A.partialPivLu().inverse();

  coef_.assign(std::size_t(nq) * ncomp_ * np, 0.0);
  std::vector<double> line(nq);
  for (int c = 0; c < ncomp_; ++c)
    for (std::size_t p = 0; p < np; ++p) {
      for (int r = 0; r < nq; ++r) line[r] = rhs[r][c * np + p];
      for (int q = 0; q < nq; ++q) {
        double v = 0;
        for (int r = 0; r < nq; ++r) v += Ainv(q, r) * line[r];
        coef_[(std::size_t(q) * ncomp_ + c) * np + p] = v;
      }
    }
}

void SpacetimeSpline::eval(const Vec4& x, int order, double* val, double* d1, double* d2) const {
  if (order < 0 || order > 2) throw ContractViolation("SpacetimeSpline::eval: order must be 0..2");
  const int n = grid_.n();
  const std::size_t np = grid_.points();
  const double h = grid_.spacing();

  double wt[3][6], w[3][3][6];
  const double tau = (x[0] - t0_) / dt_;
  int it = int(std::floor(tau));
  it = std::max(0, std::min(nt_ - 2, it));
  tap_weights(tau - it, dt_, order, wt);
  int base[3];
  for (int a = 0; a < 3; ++a) {
    const double s = x[a + 1] / h;
    const int i0 = int(std::floor(s));
    tap_weights(s - i0, h, order, w[a]);
    base[a] = i0 - 2;
  }
  int ix[6], iy[6], iz[6];
  for (int q = 0; q < 6; ++q) {
    ix[q] = ((base[0] + q) % n + n) % n;
    iy[q] = ((base[1] + q) % n + n) % n;
    iz[q] = ((base[2] + q) % n + n) % n;
  }

  for (int c = 0; c < ncomp_; ++c) {
    double T[3][3][3][3] = {};
    for (int q = 0; q < 6; ++q) {
      const double* cq = coef_.data() + (std::size_t(it + q) * ncomp_ + c) * np;
      double X[3][3][3] = {};
      for (int a = 0; a < 6; ++a) {
        double Y[3][3] = {};
        for (int b = 0; b < 6; ++b) {
          const double* row = cq + (std::size_t(ix[a]) * n + iy[b]) * n;
          double v[6];
          for (int d = 0; d < 6; ++d) v[d] = row[iz[d]];
          double Z[3];
          for (int oz = 0; oz <= order; ++oz) {
            double s = 0;
            for (int d = 0; d < 6; ++d) s += w[2][oz][d] * v[d];
            Z[oz] = s;
          }
          for (int oy = 0; oy <= order; ++oy)
            for (int oz = 0; oy + oz <= order; ++oz) Y[oy][oz] += w[1][oy][b] * Z[oz];
        }
        for (int ox = 0; ox <= order; ++ox)
          for (int oy = 0; ox + oy <= order; ++oy)
            for (int oz = 0; ox + oy + oz <= order; ++oz) X[ox][oy][oz] += w[0][ox][a] * Y[oy][oz];
      }
      for (int ot = 0; ot <= order; ++ot)
        for (int ox = 0; ot + ox <= order; ++ox)
          for (int oy = 0; ot + ox + oy <= order; ++oy)
            for (int oz = 0; ot + ox + oy + oz <= order; ++oz) T[ot][ox][oy][oz] += wt[ot][q] * X[ox][oy][oz];
    }
    val[c] = T[0][0][0][0];
    if (order >= 1) {
      double* g = d1 + 4 * c;
      g[0] = T[1][0][0][0];
      g[1] = T[0][1][0][0];
      g[2] = T[0][0][1][0];
      g[3] = T[0][0][0][1];
    }
    if (order >= 2) {
      double* hh = d2 + 16 * c;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          int o[4] = {0, 0, 0, 0};
          ++o[a];
          ++o[b];
          hh[4 * a + b] = T[o[0]][o[1]][o[2]][o[3]];
        }
    }
  }
}

}  // namespace ewlab
