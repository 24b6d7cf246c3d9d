#pragma once

#include <array>
#include <string>
#include <vector>

#include "ewlab/evolve.hpp"
#include "ewlab/spacetime.hpp"

namespace ewlab {

// Q_{mu nu} = d_mu phi d_nu phi - 1/2 g_{mu nu} g^{ab} d_a phi d_b phi.
Mat4 energy_momentum(const Vec4& dphi, const Mat4& g, const Mat4& ginv);

// Q at every grid point of snapshot s of a scalar series, with the lower
// spatial metric from m (g_00 = -1, g_0i = 0) and d_t phi by central
// differences (6th order in the interior).
std::vector<Mat4> energy_momentum_field(const FieldSeries& phi, const MetricSeries& m, std::size_t s);

// Time derivative of a uniformly spaced series at index s: central
// differences of order 6, 4 or 2 depending on room, one-sided at the ends.
Field series_time_derivative(const FieldSeries& f, std::size_t s);

struct EnergyParts {
  double total;    // sum over U^i of int (Q^00 + (U^i)^2) dvol_g
  double kinetic;  // 1/2 int |V|^2 dx
};
EnergyParts standard_energy(const State& s, const MaterialSpec& spec);

// sup over spacetime second derivatives of the divergence and curl parts.
struct SecondDerivSup {
  double phi;
  double psi;
};
SecondDerivSup second_derivative_sup(const State& s, const MaterialSpec& spec);

struct EnergyFit {
  double c_fit = 0.0;
  bool degenerate = false;  // zero initial energy: report only
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> integral;  // int_0^t (||dd phi, dd psi||_inf + 1)
};
EnergyFit energy_inequality_fit(const Trajectory& tr);

struct DecouplingRow {
  double t;
  double curl_h1;
  double psi_gap;       // relative to ||psi_linear||
  double psi_residual;  // ||d_t^2 curl U - c2^2 Lap curl U||_{L^2}; NaN near the ends
};
std::vector<DecouplingRow> decoupling_monitor(const Trajectory& tr);

struct ResidualRow {
  double t;
  double residual;  // L^2 norm, NaN where second time differences are unavailable
  double scale;     // ||d^2 phi||_{L^2}
};
// box_hat_g(div phi) + P(div phi) on the resolved band. flip_gpp reverses the
// sign of the gamma'' term (mutation tests).
std::vector<ResidualRow> divpart_residual(const Trajectory& tr, bool flip_gpp = false);

struct EnergyRecord {
  double t;
  double e_std;
  double e_kin;
  std::array<double, 3> div_ladder;   // ||phi||_{H^s}, s = 2.1, 1.1, 0.1
  std::array<double, 3> curl_ladder;  // same for psi
  double strichartz_partial;          // int ||dd phi||_inf^2
  double lp_weighted;                 // int sum_nu nu^{2 delta0} ||P_nu dd phi||_inf^2
  double hyper_margin;
};
constexpr std::array<double, 3> kLadder{2.1, 1.1, 0.1};
std::vector<EnergyRecord> strichartz_norms(const Trajectory& tr, double delta0 = 0.01);

// Full table behind diagnostics.csv.
struct DiagnosticsTable {
  std::vector<EnergyRecord> energy;
  std::vector<DecouplingRow> decoupling;
  std::vector<ResidualRow> divpart;
};
DiagnosticsTable build_diagnostics(const Trajectory& tr, double delta0 = 0.01);
std::string diagnostics_csv(const DiagnosticsTable& t);

}  // namespace ewlab
