#pragma once

#include <optional>

#include "certbound/model.hpp"
#include "certbound/sos.hpp"

namespace certbound {

/// Candidate value-function lower bound: a polynomial in (t, x) for
/// fixed-unit horizons, in x alone for free terminal time.
struct ValueCandidate {
  Polynomial v;
  Horizon horizon = Horizon::FixedUnit;
};

ValueCandidate make_value_candidate(const ControlProblem& prob, Polynomial v);

/// Variable dictionary (t, x..., u...) for the Lie-derivative constraint
/// domain of a fixed-unit problem, (x..., u...) for free terminal time.
VariableSet hjb_domain_vars(const ControlProblem& prob);
/// Constraint domain X x U x [0,1] (t encoded as t(1-t) >= 0), or X x U.
SemialgebraicSet hjb_domain_set(const ControlProblem& prob);
/// Variable dictionary of v itself: (t, x...) or (x...).
VariableSet value_vars(const ControlProblem& prob);

struct LowerBoundHandles {
  SdpBuilder::PutinarHandle lie;       // l + dv/dt + grad v . f >= 0 on X x U x [0,1]
  SdpBuilder::PutinarHandle terminal;  // l_T - v(1, .) >= 0 on X_T
};

/// Emit the global lower-bound condition for a decision candidate v given as
/// an AffineExpr over value_vars(prob). The running cost enters as an
/// AffineExpr too so it can itself be a decision polynomial.
/// Requires deg(l + Lie derivative of v) <= 2 * order.
LowerBoundHandles lower_bound_constraints(SdpBuilder& builder, const AffineExpr& v,
                                          const AffineExpr& lagrangian,
                                          const ControlProblem& prob, int order);
LowerBoundHandles lower_bound_constraints(SdpBuilder& builder, const DecisionPolynomial& v,
                                          const ControlProblem& prob, int order);

/// Largest sensible degree for v at a given order: the Lie derivative
/// dv/dt + grad v . f must fit inside the degree-2*order certificate.
int value_degree_for_order(const ControlProblem& prob, int order);

struct LocalUpperHandles {
  SdpBuilder::PutinarHandle lie;  // eps/2 - [l + dv/dt + grad v . f] >= 0 on [t0, 1]
  int terminal_row_emitted = 0;   // eps/2 - l_T(x(1)) + v(1, x(1)) >= 0 (scalar)
};

/// Emit the trajectory-local upper condition along a fitted polynomial
/// trajectory. The composed expression is univariate in t on the interval
/// {(t - t0)(1 - t) >= 0}; `order` bounds its certificate degree and must
/// satisfy 2 * order >= composed degree.
LocalUpperHandles local_upper_constraints(SdpBuilder& builder, const AffineExpr& v,
                                          const AffineExpr& lagrangian,
                                          const ControlProblem& prob,
                                          const PolynomialTrajectory& ptraj,
                                          const AffineExpr& half_epsilon, int order);

/// Smallest Putinar order that fits the composed local-upper expression.
int local_upper_order(const ControlProblem& prob, const PolynomialTrajectory& ptraj,
                      int v_degree, int l_degree);

/// Evaluate a certified lower bound v at (t0, x0). The caller owns
/// certificate verification; pass verified = false to get an exception.
double evaluate_bound(const ValueCandidate& cand, double t0, const std::vector<double>& x0,
                      bool certificates_verified);

/// Pointwise lower-bound evaluations of one certified candidate, with the
/// certificate files that back them.
struct BoundReport {
  struct Entry {
    double t0 = 0.0;
    std::vector<double> x0;
    double value = 0.0;
  };
  std::vector<Entry> lower_bounds;
  std::vector<std::string> certificate_refs;
};

/// epsilon-suboptimality accounting for one trajectory (Prop.-2 semantics):
/// the reported guarantee is epsilon + quadrature error + Lipschitz * fit
/// residual, never bare epsilon.
struct SuboptimalityReport {
  double epsilon = 0.0;
  double trajectory_cost = 0.0;
  double bound_value = 0.0;  // v(t0, x0)
  double gap = 0.0;          // trajectory_cost - bound_value
  double quad_error = 0.0;   // trapezoid refinement estimate
  double lipschitz = 0.0;    // sampled Lipschitz constant of the integrand
  double fit_residual = 0.0;
  double slack() const { return quad_error + lipschitz * fit_residual; }
  bool consistent(double margin = 1e-9) const { return gap <= epsilon + slack() + margin; }
};

/// Cost by composite trapezoid on the sampled trajectory; requires both
/// condition certificates already verified for this v (flag from caller).
SuboptimalityReport suboptimality(const Polynomial& v, double epsilon, const Trajectory& traj,
                                  const PolynomialTrajectory& ptraj, const ControlProblem& prob,
                                  bool certificates_verified);

}  // namespace certbound
