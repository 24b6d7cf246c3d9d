#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ewlab/grid.hpp"
#include "ewlab/material.hpp"

namespace ewlab {

struct PlaneWave {
  std::array<int, 3> m{1, 0, 0};
  bool longitudinal = true;
  std::array<double, 3> polarization{0, 0, 0};  // transverse only; zero picks one
  double amp = 0.01;
  double phase = 0.0;
  bool traveling = false;
};

struct DataSpec {
  std::string kind = "mixed";  // rough | plane | mixed
  double s_div = 1.0;
  double s_curl = 1.0;
  double amp_div = 0.05;
  double amp_curl = 0.05;
  std::uint64_t seed = 1;
  std::optional<int> kmax;     // default n / 4
  std::string v_init = "zero"; // zero | traveling | rough
  std::vector<PlaneWave> waves;
};

struct TimeSpec {
  double t_end = 1.0;
  double cfl_safety = 0.4;
  std::optional<double> dt;
  std::optional<double> out_stride;
  std::optional<int> out_every;
};

struct RunConfig {
  Grid3 grid{32, 6.283185307179586};
  MaterialSpec material;
  DataSpec data;
  TimeSpec time;
  std::vector<std::string> checks{"hyperbolicity", "blowup"};  // monitors that halt a run
  std::string output_dir;
  bool force = false;

  int kmax() const { return data.kmax.value_or(grid.n() / 4); }
};

// Strict parse: unknown keys and malformed values raise InputError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& c);
// FNV-1a of the canonical dump, hex.
std::string config_hash(const RunConfig& c);
// Text block for --help listing keys and defaults.
std::string config_help();

}  // namespace ewlab
