#pragma once

#include <optional>

#include "certbound/hjb.hpp"
#include "certbound/model.hpp"
#include "certbound/sos.hpp"

namespace certbound {

/// Lebesgue moment of one monomial over an axis-aligned box:
/// prod_i [hi^(a_i+1) - lo^(a_i+1)] / (a_i + 1).
double box_moment(const std::vector<std::pair<double, double>>& bounds, const Monomial& alpha);
std::vector<double> box_moment_vector(const std::vector<std::pair<double, double>>& bounds,
                                      const std::vector<Monomial>& basis);
double box_volume(const std::vector<std::pair<double, double>>& bounds);

/// Affine change of variables x_i = center_i + scale_i * y_i applied inside
/// the solvers to precondition box-shaped problems onto [-1, 1] boxes.
/// Inactive scaling is the identity.
struct AffineScaling {
  bool active = false;
  std::vector<double> state_center, state_scale;
  std::vector<double> control_center, control_scale;

  std::vector<double> to_scaled_state(const std::vector<double>& x) const;
  std::vector<double> to_original_state(const std::vector<double>& y) const;
};

/// Exact reformulation of the problem in scaled coordinates (sets carry the
/// same points, costs and dynamics are composed with the affine map).
/// Requires bounding boxes on X and U; returns inactive scaling otherwise.
std::pair<ControlProblem, AffineScaling> scale_to_unit_box(const ControlProblem& prob);

/// v_orig(t, x) = v_scaled(t, (x - c)/s); works for (t, x) and x-only polys.
Polynomial unscale_state_polynomial(const Polynomial& p_scaled, const AffineScaling& sc,
                                    const ControlProblem& original);

struct AppSolveOptions {
  AppSolveOptions() { sdp.tol = 2e-6; }
  SdpOptions sdp;  // 2e-6 by default here: the assembled programs sit on
                   // degenerate optimal faces where tighter gaps stall, and
                   // certificate validity is re-checked independently anyway
  bool scale_to_unit = true;
  double res_tol = 1e-6;  // certificate verification, scaled by target norm
  double eig_tol = 1e-6;
};

struct OcpResult {
  SdpStatus status = SdpStatus::NumericalTrouble;
  int order = 0;
  double bound = 0.0;  // v(t0, x0), a certified lower bound on v* when verified
  Polynomial v;        // original coordinates
  Polynomial v_scaled; // certificate coordinates
  std::vector<PutinarCertificate> certificates;
  AffineScaling scaling;
  bool verified = false;
  double worst_residual = 0.0;
  double worst_eigenvalue = 0.0;
  std::vector<std::string> assembly_log;
};

/// Direct value bound: sup v(t0, x0) under the global lower-bound condition.
/// For free-terminal-time problems t0 is ignored and v is time independent.
OcpResult solve_ocp(const ControlProblem& prob, double t0, const std::vector<double>& x0,
                    int order, const AppSolveOptions& opts = {});

struct RoaResult {
  SdpStatus status = SdpStatus::NumericalTrouble;
  int order = 0;
  double objective = 0.0;  // integral of w over X
  Polynomial v, w;         // original coordinates
  Polynomial v_scaled, w_scaled;
  std::vector<PutinarCertificate> certificates;
  AffineScaling scaling;
  bool verified = false;
  double worst_residual = 0.0;
  double worst_eigenvalue = 0.0;
  std::vector<std::string> assembly_log;
};

/// Region-of-attraction outer approximation: sup int_X w subject to the
/// l = 0, l_T = 0 lower-bound condition on v, w <= v(., t0) and w <= 1 on X.
/// When verified, {x : v(x, t0) <= 0} contains every state from which the
/// terminal set is reachable within the horizon. X must be a box unless a
/// moment vector for the w basis over X is supplied (scaling off in that
/// case). The reported objective is the finite-order optimum, with no claim
/// about the infinite-dimensional supremum.
RoaResult solve_roa(const ControlProblem& prob, double t0, int order,
                    const AppSolveOptions& opts = {},
                    const std::optional<std::vector<double>>& moments_of_X = std::nullopt);

struct IocOptions {
  AppSolveOptions app;
  bool normalize = true;  // enforce mean(l) = 1 on X (normalized Lebesgue)
};

struct IocResult {
  SdpStatus status = SdpStatus::NumericalTrouble;
  int order = 0;
  double epsilon = 0.0;
  double lambda = 0.0;
  Polynomial lagrangian;  // recovered l over (x, u)
  Polynomial v;
  std::vector<Monomial> l_basis;
  std::vector<double> l_coeffs;
  double normalization_value = 0.0;  // mean of l over X (1 when normalized)
  std::vector<PutinarCertificate> certificates;
  bool verified = false;
  double worst_residual = 0.0;
  double worst_eigenvalue = 0.0;
  double max_fit_residual = 0.0;
  std::vector<std::string> assembly_log;
};

/// Inverse optimal control: minimize epsilon + lambda * sum |l coefficients|
/// subject to the global condition with decision (l, v) and the local
/// trajectory conditions for every fitted trajectory. Requires l_T = 0 and a
/// fixed-unit horizon. The Lagrangian dictionary is caller supplied: state
/// monomials (the default prior) or full (x, u) monomials, told apart by
/// exponent arity. Normalization pins the mean of l over X x U to one.
IocResult solve_ioc(const ControlProblem& prob_without_l,
                    const std::vector<PolynomialTrajectory>& ptrajs, int order, double lambda,
                    const std::vector<Monomial>& l_basis, const IocOptions& opts = {});

struct GridSpec {
  std::vector<std::pair<double, double>> bounds;  // per state variable
  std::vector<int> counts;                        // samples per axis, >= 1
};

/// Deterministic row-major CSV of v(., t0) values with header x1,...,v.
/// Accepts v over (t, x) (evaluated at t0) or over x alone.
std::string sublevel_grid_csv(const Polynomial& v, double t0, const GridSpec& grid);

/// Coefficients of p on the given basis; throws if p has terms outside it.
std::vector<double> coeffs_on_basis(const Polynomial& p, const std::vector<Monomial>& basis);

/// || a/|a| - b/|b| ||_2 / 2, in [0, 1]; 0 for aligned directions.
double normalized_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace certbound
