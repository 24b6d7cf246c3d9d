#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ewlab/config.hpp"
#include "ewlab/material.hpp"
#include "ewlab/spectral.hpp"

namespace ewlab {

struct State {
  Field u;  // displacement
  Field v;  // d_t u
  double t = 0.0;
};

struct SnapshotRow {
  double t;
  double hyper_margin;
  double lambda_max;
  double grad_max;  // max |d_j U^k|
};

struct Failure {
  double t;
  std::string cause;  // hyperbolicity | blowup | nonfinite | cfl
};

struct Trajectory {
  RunConfig config;
  std::string hash;
  double dt = 0.0;
  int out_every = 1;
  std::vector<State> snapshots;
  std::vector<SnapshotRow> rows;
  std::optional<Failure> failure;  // run halted here
  std::vector<Failure> flagged;    // monitors that fired on a forced run
  double initial_margin = 0.0;
  double blowup_threshold = 0.0;

  bool completed() const { return !failure; }
  std::vector<double> times() const;
  FieldSeries u_series() const;
  FieldSeries v_series() const;
};

// Lower spatial metric g_ij(dU) at every snapshot.
MetricSeries trajectory_metric(const Trajectory& tr);

State initial_state(const RunConfig& c);
// Sum of the configured plane waves, evolved exactly by the linear system.
State exact_plane_solution(const RunConfig& c, double t);

double cfl_dt(const State& s, const MaterialSpec& spec, double safety = 0.4);

// Classical RK4 on (U, V). check_cfl enforces dt <= 1.01 cfl_dt.
State rk4_step(const State& s, double dt, const MaterialSpec& spec, bool check_cfl = true);

// Step size and snapshot stride actually used for a config.
struct StepPlan {
  double dt;
  int steps;
  int out_every;
};
StepPlan plan_steps(const RunConfig& c, const State& s0);

Trajectory simulate(const RunConfig& c);

// Exact solution of d_t^2 w = c^2 Lap w, mode by mode.
Field linear_wave_evolve(const Field& w0, const Field& w1, double speed, double t);

struct DecomposedRow {
  double t;
  double curl_h1;      // ||curl U||_{H^1}
  double psi_gap;      // ||psi_full - psi_linear||_{L^2} / ||psi_linear||_{L^2}
  double psi_gap_abs;
};

struct DecomposedRun {
  Trajectory full;
  FieldSeries phi;         // divergence part of U
  FieldSeries psi;         // curl part of U
  FieldSeries psi_linear;  // exact linear evolution of the initial curl part
  std::vector<DecomposedRow> rows;
};

DecomposedRun simulate_decomposed(const RunConfig& c);

}  // namespace ewlab
