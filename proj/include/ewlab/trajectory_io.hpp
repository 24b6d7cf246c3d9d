#pragma once

#include <string>

#include "ewlab/evolve.hpp"

namespace ewlab {

// Trajectory directory layout:
//   config.json      canonical run config
//   run.json         step size, stride, monitors, failure record
//   series.csv       t, E_std, E_kin, hyper_margin, lambda_max, grad_max per snapshot
//   diagnostics.csv  diagnostics table (optional)
//   state_%06d.ewf   EWF1 rank "state": U then V (6 components)
void write_trajectory(const Trajectory& tr, const std::string& dir, bool with_diagnostics = true);
Trajectory read_trajectory(const std::string& dir);

std::string series_csv(const Trajectory& tr);

// Whole-file helpers; throw InputError on I/O failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace ewlab
