#include "ewlab/spacetime.hpp"

#include <cmath>
#include <stdexcept>

#include "ewlab/grid.hpp"

namespace ewlab {

double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 inverse3(const Mat3& m) {
  const double d = det3(m);
  if (d == 0 || !std::isfinite(d)) throw InstabilityError("singular 3x3 metric block");
  Mat3 r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int a1 = (b + 1) % 3, a2 = (b + 2) % 3, b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      r[a][b] = (m[a1][b1] * m[a2][b2] - m[a1][b2] * m[a2][b1]) / d;
    }
  return r;
}

Mat4 inverse4(const Mat4& m) {
  // Gauss-Jordan with partial pivoting
  double a[4][8];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) a[i][j] = j < 4 ? m[i][j] : (j - 4 == i ? 1.0 : 0.0);
  for (int c = 0; c < 4; ++c) {
    int p = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (a[p][c] == 0) throw InstabilityError("singular 4x4 metric");
    if (p != c)
      for (int j = 0; j < 8; ++j) std::swap(a[p][j], a[c][j]);
    const double inv = 1.0 / a[c][c];
    for (int j = 0; j < 8; ++j) a[c][j] *= inv;
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      if (f != 0)
        for (int j = 0; j < 8; ++j) a[r][j] -= f * a[c][j];
    }
  }
  Mat4 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[i][j] = a[i][j + 4];
  return out;
}

Connection connection(const MetricJet& j) {
  Connection c;
  c.ginv = inverse4(j.g);
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 4; ++k)
      for (int l = k; l < 4; ++l) {
        const double v = 0.5 * (j.dg[k][a][l] + j.dg[l][a][k] - j.dg[a][k][l]);
        c.low[a][k][l] = v;
        c.low[a][l][k] = v;
      }
  for (int b = 0; b < 4; ++b)
    for (int k = 0; k < 4; ++k)
      for (int l = k; l < 4; ++l) {
        double v = 0;
        for (int a = 0; a < 4; ++a) v += c.ginv[b][a] * c.low[a][k][l];
        c.up[b][k][l] = v;
        c.up[b][l][k] = v;
      }
  for (int a = 0; a < 4; ++a) {
    double v = 0;
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) v += c.low[a][k][l] * c.ginv[k][l];
    c.contracted[a] = v;
  }
  for (int a = 0; a < 4; ++a) {
    double v = 0;
    for (int b = 0; b < 4; ++b) v += c.ginv[a][b] * c.contracted[b];
    c.contracted_up[a] = v;
  }
  return c;
}

namespace {

// d_e g^{ab}
Tensor3_4 inverse_derivative(const MetricJet& j, const Mat4& gi) {
  Tensor3_4 out{};
  for (int e = 0; e < 4; ++e) {
    Mat4 tmp{};
    for (int a = 0; a < 4; ++a)
      for (int q = 0; q < 4; ++q) {
        double v = 0;
        for (int p = 0; p < 4; ++p) v += gi[a][p] * j.dg[e][p][q];
        tmp[a][q] = v;
      }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double v = 0;
        for (int q = 0; q < 4; ++q) v += tmp[a][q] * gi[q][b];
        out[e][a][b] = -v;
      }
  }
  return out;
}

// d_e Gamma_{a k l}
Tensor4_4 lower_connection_derivative(const MetricJet& j) {
  Tensor4_4 out{};
  for (int e = 0; e < 4; ++e)
    for (int a = 0; a < 4; ++a)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l)
          out[e][a][k][l] = 0.5 * (j.ddg[e][k][a][l] + j.ddg[e][l][a][k] - j.ddg[e][a][k][l]);
  return out;
}

}  // namespace

Tensor4_4 connection_derivative(const MetricJet& j, const Connection& c) {
  if (!j.has_second) throw ContractViolation("connection derivative needs a second-order jet");
  const Tensor3_4 dgi = inverse_derivative(j, c.ginv);
  const Tensor4_4 dlow = lower_connection_derivative(j);
  Tensor4_4 out{};
  for (int e = 0; e < 4; ++e)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int d = 0; d < 4; ++d) {
          double v = 0;
          for (int m = 0; m < 4; ++m) v += dgi[e][a][m] * c.low[m][b][d] + c.ginv[a][m] * dlow[e][m][b][d];
          out[e][a][b][d] = v;
        }
  return out;
}

Mat4 ricci(const MetricJet& j) {
  const Connection c = connection(j);
  const Tensor4_4 dG = connection_derivative(j, c);
  Mat4 r{};
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) {
      double v = 0;
      for (int a = 0; a < 4; ++a) {
        v += dG[a][a][b][d] - dG[d][a][b][a];
        for (int l = 0; l < 4; ++l) v += c.up[a][a][l] * c.up[l][b][d] - c.up[a][d][l] * c.up[l][b][a];
      }
      r[b][d] = v;
    }
  return r;
}

Mat4 ricci_principal(const MetricJet& j) {
  const Connection c = connection(j);
  const Tensor3_4 dgi = inverse_derivative(j, c.ginv);
  const Tensor4_4 dlow = lower_connection_derivative(j);
  // d_a Gamma_b
  Mat4 dGam{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double v = 0;
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) v += dlow[a][b][k][l] * c.ginv[k][l] + c.low[b][k][l] * dgi[a][k][l];
      dGam[a][b] = v;
    }
  Mat4 p{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double box = 0;
      for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 4; ++n) box += c.ginv[m][n] * j.ddg[m][n][a][b];
        box -= c.contracted_up[m] * j.dg[m][a][b];
      }
      double dab = dGam[a][b], dba = dGam[b][a];
      for (int m = 0; m < 4; ++m) {
        dab -= c.up[m][a][b] * c.contracted[m];
        dba -= c.up[m][b][a] * c.contracted[m];
      }
      p[a][b] = -0.5 * box + 0.5 * (dab + dba);
    }
  return p;
}

double contract(const Mat4& m, const Vec4& a, const Vec4& b) {
  double v = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) v += m[i][k] * a[i] * b[k];
  return v;
}

MetricJet flat_jet(double c1) {
  MetricJet j;
  j.g[0][0] = -1;
  for (int i = 1; i < 4; ++i) j.g[i][i] = 1.0 / (c1 * c1);
  j.has_second = true;
  return j;
}

}  // namespace ewlab
