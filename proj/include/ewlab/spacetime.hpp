#pragma once

#include <array>

namespace ewlab {

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;
using Mat3 = std::array<std::array<double, 3>, 3>;
using Mat4 = std::array<std::array<double, 4>, 4>;
using Tensor3_4 = std::array<Mat4, 4>;
using Tensor4_4 = std::array<Tensor3_4, 4>;

// Metric with derivatives at one event. dg[a][m][n] = d_a g_mn,
// ddg[a][b][m][n] = d_a d_b g_mn. Coordinates (t, x, y, z).
struct MetricJet {
  Mat4 g{};
  Tensor3_4 dg{};
  Tensor4_4 ddg{};
  bool has_second = false;
};

struct Connection {
  Mat4 ginv{};
  Tensor3_4 low{};  // Gamma_{a k l}
  Tensor3_4 up{};   // Gamma^b_{k l}
  Vec4 contracted{};  // Gamma_a = Gamma_{a k l} g^{k l}
  Vec4 contracted_up{};  // Gamma^a
};

Mat4 inverse4(const Mat4& m);
Mat3 inverse3(const Mat3& m);
double det3(const Mat3& m);

Connection connection(const MetricJet& j);

// d_e Gamma^a_{b d} as dGamma[e][a][b][d]; needs second derivatives.
Tensor4_4 connection_derivative(const MetricJet& j, const Connection& c);

Mat4 ricci(const MetricJet& j);

// Principal part -1/2 box_g g_ab + 1/2 (D_a Gamma_b + D_b Gamma_a), the metric
// components treated as scalars under box_g.
Mat4 ricci_principal(const MetricJet& j);

double contract(const Mat4& m, const Vec4& a, const Vec4& b);

// Flat jet g = diag(-1, c^-2, c^-2, c^-2).
MetricJet flat_jet(double c1);

}  // namespace ewlab
