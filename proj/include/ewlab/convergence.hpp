#pragma once

#include <string>
#include <vector>

#include "ewlab/config.hpp"

namespace ewlab {

// Error sequence of one quantity over refinement levels and the orders
// log2(e_k / e_{k+1}) between consecutive levels.
struct OrderRow {
  std::string quantity;
  std::string measure;  // what e_k is
  std::vector<double> errors;
  std::vector<double> orders;
  double target = 0;    // minimum acceptable order
  std::string status;   // ok | low | n/a | exact
  std::string note;
  bool pass() const { return status == "ok" || status == "exact"; }
};

struct ConvergenceReport {
  int levels = 0;
  std::vector<OrderRow> rows;
  bool unstable = false;  // some level's run halted
  bool pass() const;
  std::string text() const;
  std::string json() const;
};

// Errors all at or below `floor` are roundoff: the row is "exact".
OrderRow order_row(std::string quantity, std::string measure, std::vector<double> errors, double target,
                   double floor = 1e-12);

// Solver (dt halving; exact solution when the config is linear plane waves,
// successive differences otherwise), geodesic tracer (null drift under
// dt_ray halving), Raychaudhuri residual (dt_ray halving with n_omega x4)
// and decoupling residual (dt halving). levels >= 2.
ConvergenceReport convergence_study(const RunConfig& c, int levels);

}  // namespace ewlab
