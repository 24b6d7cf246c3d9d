#pragma once

#include <array>
#include <vector>

#include "ewlab/grid.hpp"
#include "ewlab/spacetime.hpp"

namespace ewlab {

// Centered quintic B-spline and its first three derivatives.
double bspline5(double x, int deriv = 0);

// Tensor-product quintic spline: periodic in space on the grid, clamped in
// time (first and second time derivatives prescribed at both ends).
// Interpolates the samples exactly and is C^4.
class SpacetimeSpline {
 public:
  // Samples are component-major arrays of ncomp * grid.points() values.
  using Samples = std::vector<double>;
  struct Ends {
    Samples d1_first, d2_first, d1_last, d2_last;
  };
  SpacetimeSpline(const Grid3& grid, int ncomp, double t0, double dt, const std::vector<Samples>& values,
                  const Ends& ends);

  int ncomp() const { return ncomp_; }
  double t_begin() const { return t0_; }
  double t_end() const { return t0_ + dt_ * (nt_ - 1); }
  const Grid3& grid() const { return grid_; }

  // Derivatives up to `order` (0..2) at x = (t, x, y, z):
  // val[c], d1[4 c + a], d2[16 c + 4 a + b].
  void eval(const Vec4& x, int order, double* val, double* d1, double* d2) const;

 private:
  Grid3 grid_;
  int ncomp_;
  int nt_;
  double t0_, dt_;
  std::vector<double> coef_;  // [(q * ncomp + c) * points + p], q over nt + 4 time coefficients
};

}  // namespace ewlab
