#pragma once

#include <optional>
#include <string>
#include <vector>

#include "certbound/poly.hpp"

namespace certbound {

/// Basic closed semialgebraic set {z : g_i(z) >= 0 for all i}.
/// Membership is decided by evaluation with a small negative tolerance to
/// absorb round-off at boundaries. A bounding box, when known, is kept for
/// rejection sampling.
class SemialgebraicSet {
 public:
  static constexpr double kMembershipTol = 1e-8;

  SemialgebraicSet() = default;
  SemialgebraicSet(VariableSet vars, std::vector<Polynomial> inequalities,
                   std::vector<std::pair<double, double>> bounding_box = {});

  const VariableSet& vars() const { return vars_; }
  const std::vector<Polynomial>& inequalities() const { return inequalities_; }
  const std::vector<std::pair<double, double>>& bounding_box() const { return bounding_box_; }
  bool has_bounding_box() const { return !bounding_box_.empty(); }

  bool membership(const std::vector<double>& point, double tol = kMembershipTol) const;
  /// Largest constraint violation max_i max(0, -g_i(z)); 0 inside the set.
  double violation(const std::vector<double>& point) const;

 private:
  VariableSet vars_;
  std::vector<Polynomial> inequalities_;
  std::vector<std::pair<double, double>> bounding_box_;
};

/// Axis-aligned box given per-variable [lo, hi], one inequality
/// (hi - z)(z - lo) >= 0 per variable.
SemialgebraicSet box_set(const VariableSet& vars,
                         const std::vector<std::pair<double, double>>& bounds);

/// Euclidean ball of given radius: radius^2 - sum z_i^2 >= 0.
SemialgebraicSet ball_set(const VariableSet& vars, double radius);

/// Singleton {point}: the single inequality -sum (z_i - p_i)^2 >= 0 holds
/// only at the point (up to tolerance).
SemialgebraicSet point_set(const VariableSet& vars, const std::vector<double>& point);

enum class Horizon { FixedUnit, FreeTerminal };

/// Polynomial optimal-control problem data: dynamics f over (x, u),
/// running cost l over (x, u), terminal cost l_T over x, constraint sets
/// X, U, X_T, and the horizon mode. X_T is documented to lie inside X but
/// this is not checked structurally.
struct ControlProblem {
  VariableSet state_vars;    // x1..x_dX
  VariableSet control_vars;  // u1..u_dU
  VariableSet xu_vars;       // concatenated (x..., u...)
  std::vector<Polynomial> dynamics;  // d_X entries over xu_vars
  Polynomial lagrangian;             // over xu_vars
  Polynomial terminal_cost;          // over state_vars
  SemialgebraicSet X;                // over state_vars
  SemialgebraicSet U;                // over control_vars
  SemialgebraicSet XT;               // over state_vars
  Horizon horizon = Horizon::FixedUnit;

  std::size_t state_dim() const { return state_vars.size(); }
  std::size_t control_dim() const { return control_vars.size(); }
  /// Largest total degree over the dynamics components.
  int dynamics_degree() const;
  /// Evaluate f at a (state, control) pair.
  std::vector<double> eval_dynamics(const std::vector<double>& x,
                                    const std::vector<double>& u) const;
};

/// Build the combined (x..., u...) variable set and validate the pieces
/// live over the expected dictionaries.
ControlProblem make_control_problem(VariableSet state_vars, VariableSet control_vars,
                                    std::vector<Polynomial> dynamics, Polynomial lagrangian,
                                    Polynomial terminal_cost, SemialgebraicSet X,
                                    SemialgebraicSet U, SemialgebraicSet XT, Horizon horizon);

/// Sampled state/control path. Times are strictly increasing and start at
/// t0; for FixedUnit trajectories the last time is 1, for FreeTerminal it is
/// the terminal time. states is len(times) x d_X, controls len(times) x d_U.
struct Trajectory {
  double t0 = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> controls;

  std::size_t size() const { return times.size(); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

/// Admissibility report: all quantities are violations (0 = clean).
/// The ODE defect is max_k || x_{k+1} - x_k - (f_k + f_{k+1}) dt/2 ||_2,
/// a trapezoidal estimate of the integral identity between samples.
struct AdmissibilityReport {
  double max_state_violation = 0.0;
  double max_control_violation = 0.0;
  double terminal_violation = 0.0;  // distance-like violation of X_T membership
  double max_ode_defect = 0.0;
  bool structurally_valid = true;   // times increasing, dimensions consistent
  std::string note;

  bool ok(double ode_tol, double membership_tol = SemialgebraicSet::kMembershipTol,
          double terminal_tol = SemialgebraicSet::kMembershipTol) const {
    return structurally_valid && max_state_violation <= membership_tol &&
           max_control_violation <= membership_tol && terminal_violation <= terminal_tol &&
           max_ode_defect <= ode_tol;
  }
};

AdmissibilityReport check_admissible(const Trajectory& traj, const ControlProblem& prob,
                                     double ode_tol);

/// Least-squares polynomial fit of a trajectory, component-wise in t.
/// fit_residual is the max-over-samples Euclidean deviation of the fitted
/// (state, control) vector from the source samples.
struct PolynomialTrajectory {
  double t0 = 0.0;
  double t_end = 1.0;
  VariableSet time_var;             // the single variable "t"
  std::vector<Polynomial> x_polys;  // d_X polynomials in t
  std::vector<Polynomial> u_polys;  // d_U polynomials in t
  double fit_residual = 0.0;

  std::vector<double> eval_state(double t) const;
  std::vector<double> eval_control(double t) const;
};

PolynomialTrajectory fit_polynomial_trajectory(const Trajectory& traj, int degree);

}  // namespace certbound
