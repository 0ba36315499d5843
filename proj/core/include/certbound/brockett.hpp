#pragma once

#include "certbound/apps.hpp"
#include "certbound/model.hpp"

namespace certbound {

/// Brockett's integrator: f(x, u) = (u1, u2, u1 x2 - u2 x1) with
/// X = {||x||_inf <= state_radius}, U = {||u||_2 <= 1}, X_T = {0},
/// l = 1, l_T = 0, free terminal time (minimum time to reach the origin).
/// The benchmark grid uses initial states with coordinates up to 3, hence
/// the state_radius knob (default harness value 4).
ControlProblem brockett_problem(double state_radius = 1.0);
/// Same data on the fixed unit horizon (used by the reachability program).
ControlProblem brockett_fixed_horizon_problem(double state_radius = 1.0);

struct OracleConfig {
  int segments = 128;          // piecewise-constant control segments
  double term_tol = 1e-3;      // feasibility: ||x(T)||_2 <= term_tol
  double state_radius = 4.0;   // candidate trajectories must stay in this box
  double t_max = 0.0;          // search horizon cap; 0 = automatic
  int resample_points = 240;   // samples of the returned trajectory
};

/// Best feasible minimum-time estimate found by nested grid refinement over
/// phase-rotating piecewise-constant controls, polished against a smooth
/// fine-step RK4 rollout. T is an upper-bound-style estimate backed by the
/// returned feasible trajectory.
struct OracleResult {
  double T = 0.0;
  Trajectory trajectory;
  double convergence_gap = 0.0;  // |T at N segments - T at 2N segments|
  double terminal_miss = 0.0;    // ||x(T)|| of the returned trajectory
  int segments = 0;
  double phase = 0.0;  // control angle at t = 0
  double sweep = 0.0;  // total phase swept over [0, T]
};

OracleResult oracle_min_time(const std::vector<double>& x0, const OracleConfig& cfg = {});

/// Near-minimum-time admissible trajectories resampled on uniform grids.
std::vector<Trajectory> oracle_trajectories(const std::vector<std::vector<double>>& x0s,
                                            const OracleConfig& cfg = {});

struct Table1Row {
  std::vector<double> x0;
  int order = 0;
  double sos_bound = 0.0;
  double oracle_T = 0.0;
  double gap = 0.0;  // oracle_T - sos_bound
  bool verified = false;
  bool carried = false;  // backed by a lower-order certificate (see below)
  SdpStatus status = SdpStatus::NumericalTrouble;
};

struct Table1Config {
  Table1Config() { app.sdp.tol = 1e-8; }
  std::vector<int> orders = {2, 3, 4};
  double state_radius = 4.0;
  OracleConfig oracle;
  AppSolveOptions app;  // tight tolerance: order sweeps saturate, and the
                        // monotonicity check needs bounds resolved well
                        // below 1e-6
  int jobs = 1;
};

/// Value bounds against the oracle on the 3x3 grid of initial states
/// x1 = 1, (x2, x3) in {1, 2, 3}^2, one row per (state, order). A verified
/// certificate of degree 2d' is a fortiori one for every order d >= d'
/// (bases nest), so when a fresh solve lands below an already-certified
/// lower-order bound -- solver noise at hierarchy saturation -- the row
/// carries the better certified bound forward and says so.
std::vector<Table1Row> table1_harness(const Table1Config& cfg = {});
std::string table1_csv(const std::vector<Table1Row>& rows);

/// The nine initial states of the benchmark grid, row-major in (x2, x3).
std::vector<std::vector<double>> table1_states();

/// Map free-time trajectories on [0, T_j] to the unit horizon, absorbing
/// each duration into the control (f is linear in u, so time scaling is a
/// control scaling); all trajectories then share one fixed-unit problem
/// with an enlarged control ball of radius max_j T_j * (1 + margin).
struct RescaledIoc {
  ControlProblem problem;
  std::vector<Trajectory> trajectories;
  double control_radius = 0.0;
};

RescaledIoc rescale_to_unit_horizon(const std::vector<Trajectory>& trajs,
                                    double state_box_radius, double control_margin = 0.05);

}  // namespace certbound
