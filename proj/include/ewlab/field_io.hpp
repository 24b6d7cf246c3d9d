#pragma once

#include <span>
#include <string>
#include <vector>

#include "ewlab/grid.hpp"

namespace ewlab {

// EWF1 snapshot: magic "EWFIELD1", u64 little-endian header length, JSON
// header {n, box_len, rank, components, time}, then little-endian f64 data
// in component-major layout.
struct EwfRecord {
  Grid3 grid;
  std::string rank;  // scalar | vector3 | matrix3x3 | state (U then V)
  int components;
  double time;
  std::vector<double> data;
};

void write_ewf(const std::string& path, const Grid3& g, const std::string& rank, int components,
               double time, std::span<const double> data);
EwfRecord read_ewf(const std::string& path);

void write_field(const std::string& path, const Field& f, double time);
Field read_field(const std::string& path, double* time = nullptr);

}  // namespace ewlab
