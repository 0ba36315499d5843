#include "certbound/hjb.hpp"

#include <cmath>
#include <sstream>

namespace certbound {

namespace {
const char* kTimeName = "t";
}

ValueCandidate make_value_candidate(const ControlProblem& prob, Polynomial v) {
  if (v.vars() != value_vars(prob))
    throw std::invalid_argument("make_value_candidate: v does not match the horizon's variables");
  return ValueCandidate{std::move(v), prob.horizon};
}

VariableSet value_vars(const ControlProblem& prob) {
  std::vector<std::string> names;
  if (prob.horizon == Horizon::FixedUnit) names.push_back(kTimeName);
  for (const auto& n : prob.state_vars.names()) names.push_back(n);
  return VariableSet(names);
}

VariableSet hjb_domain_vars(const ControlProblem& prob) {
  std::vector<std::string> names;
  if (prob.horizon == Horizon::FixedUnit) names.push_back(kTimeName);
  for (const auto& n : prob.state_vars.names()) names.push_back(n);
  for (const auto& n : prob.control_vars.names()) names.push_back(n);
  return VariableSet(names);
}

SemialgebraicSet hjb_domain_set(const ControlProblem& prob) {
  const VariableSet dv = hjb_domain_vars(prob);
  std::vector<Polynomial> gs;
  std::vector<std::pair<double, double>> bbox;
  if (prob.horizon == Horizon::FixedUnit) {
    const Polynomial t = Polynomial::variable(dv, kTimeName);
    gs.push_back(t * (Polynomial::constant(dv, 1.0) - t));  // t(1 - t) >= 0
    bbox.emplace_back(0.0, 1.0);
  }
  for (const auto& g : prob.X.inequalities()) gs.push_back(g.embedded_into(dv));
  for (const auto& g : prob.U.inequalities()) gs.push_back(g.embedded_into(dv));
  if (prob.X.has_bounding_box() && prob.U.has_bounding_box()) {
    for (const auto& b : prob.X.bounding_box()) bbox.push_back(b);
    for (const auto& b : prob.U.bounding_box()) bbox.push_back(b);
  } else {
    bbox.clear();
  }
  return SemialgebraicSet(dv, std::move(gs), std::move(bbox));
}

int value_degree_for_order(const ControlProblem& prob, int order) {
  const int df = prob.dynamics_degree();
  // grad v . f must stay within degree 2*order.
  return std::max(1, 2 * order - std::max(0, df - 1));
}

LowerBoundHandles lower_bound_constraints(SdpBuilder& builder, const AffineExpr& v,
                                          const AffineExpr& lagrangian,
                                          const ControlProblem& prob, int order) {
  const VariableSet vv = value_vars(prob);
  if (v.vars() != vv)
    throw std::invalid_argument("lower_bound_constraints: v must live over " +
                                std::string(prob.horizon == Horizon::FixedUnit ? "(t, x)" : "(x)"));
  const VariableSet dv = hjb_domain_vars(prob);
  const SemialgebraicSet domain = hjb_domain_set(prob);

  AffineExpr lie = lagrangian.embedded_into(dv);
  if (prob.horizon == Horizon::FixedUnit) lie = lie + v.partial(kTimeName).embedded_into(dv);
  for (std::size_t i = 0; i < prob.state_dim(); ++i) {
    const AffineExpr vxi = v.partial(prob.state_vars.name(i)).embedded_into(dv);
    lie = lie + vxi * prob.dynamics[i].embedded_into(dv);
  }
  if (lie.degree() > 2 * order) {
    std::ostringstream os;
    os << "lower_bound_constraints: degree of l + Lie derivative is " << lie.degree()
       << " which exceeds 2*order = " << 2 * order
       << "; lower the degree of v (<= " << value_degree_for_order(prob, order)
       << ") or raise the order";
    throw std::invalid_argument(os.str());
  }

  // v at the terminal time over the state variables alone.
  AffineExpr v_term = v;
  if (prob.horizon == Horizon::FixedUnit) {
    std::map<std::string, Polynomial> at_one;
    at_one[kTimeName] = Polynomial::constant(prob.state_vars, 1.0);
    for (const auto& n : prob.state_vars.names())
      at_one[n] = Polynomial::variable(prob.state_vars, n);
    v_term = v.substitute(at_one);
  }
  const AffineExpr term_expr = AffineExpr(prob.terminal_cost) - v_term;

  LowerBoundHandles out;
  out.lie = builder.putinar_nonneg(lie, domain, order, "hjb_lower_lie");
  out.terminal = builder.putinar_nonneg(term_expr, prob.XT, order, "hjb_lower_terminal");
  return out;
}

LowerBoundHandles lower_bound_constraints(SdpBuilder& builder, const DecisionPolynomial& v,
                                          const ControlProblem& prob, int order) {
  return lower_bound_constraints(builder, v.expr(),
                                 AffineExpr(prob.lagrangian), prob, order);
}

namespace {

/// Bindings mapping the (t, x..., u...) world onto the trajectory's time
/// variable. Used to restrict expressions to a fitted trajectory.
std::map<std::string, Polynomial> trajectory_bindings(const ControlProblem& prob,
                                                      const PolynomialTrajectory& ptraj) {
  std::map<std::string, Polynomial> bind;
  bind[kTimeName] = Polynomial::variable(ptraj.time_var, "t");
  for (std::size_t i = 0; i < prob.state_dim(); ++i)
    bind[prob.state_vars.name(i)] = ptraj.x_polys.at(i);
  for (std::size_t j = 0; j < prob.control_dim(); ++j)
    bind[prob.control_vars.name(j)] = ptraj.u_polys.at(j);
  return bind;
}

}  // namespace

int local_upper_order(const ControlProblem& prob, const PolynomialTrajectory& ptraj, int v_degree,
                      int l_degree) {
  int fit_deg = 0;
  for (const auto& p : ptraj.x_polys) fit_deg = std::max(fit_deg, p.degree());
  for (const auto& p : ptraj.u_polys) fit_deg = std::max(fit_deg, p.degree());
  const int composed =
      std::max(l_degree * std::max(1, fit_deg),
               (v_degree + prob.dynamics_degree()) * std::max(1, fit_deg));
  return (composed + 1) / 2;
}

LocalUpperHandles local_upper_constraints(SdpBuilder& builder, const AffineExpr& v,
                                          const AffineExpr& lagrangian,
                                          const ControlProblem& prob,
                                          const PolynomialTrajectory& ptraj,
                                          const AffineExpr& half_epsilon, int order) {
  if (prob.horizon != Horizon::FixedUnit)
    throw std::invalid_argument("local_upper_constraints: fixed-unit horizon required");
  const VariableSet dv = hjb_domain_vars(prob);
  const auto bind = trajectory_bindings(prob, ptraj);

  // Compose l(x(t), u(t)) + dv/dt(t, x(t)) + grad v(t, x(t)) . f(x(t), u(t)).
  AffineExpr lie = lagrangian.embedded_into(dv) + v.partial(kTimeName).embedded_into(dv);
  for (std::size_t i = 0; i < prob.state_dim(); ++i) {
    lie = lie + v.partial(prob.state_vars.name(i)).embedded_into(dv) *
                    prob.dynamics[i].embedded_into(dv);
  }
  const AffineExpr along = lie.substitute(bind);
  if (half_epsilon.vars() != ptraj.time_var)
    throw std::invalid_argument("local_upper_constraints: epsilon must live over the time variable");
  AffineExpr expr = half_epsilon - along;
  if (expr.degree() > 2 * order) {
    std::ostringstream os;
    os << "local_upper_constraints: composed degree " << expr.degree() << " exceeds 2*order = "
       << 2 * order;
    throw std::invalid_argument(os.str());
  }

  // Re-center the interval {(t - t0)(1 - t) >= 0} onto s in [-1, 1]: the
  // composed degrees run high and monomial Gram bases on one-sided
  // intervals condition far worse than on the symmetric one.
  VariableSet svar({"s"});
  const Polynomial s_poly = Polynomial::variable(svar, "s");
  const Polynomial t_of_s = Polynomial::constant(svar, 0.5 * (ptraj.t0 + 1.0)) +
                            0.5 * (1.0 - ptraj.t0) * s_poly;
  expr = expr.substitute({{"t", t_of_s}});
  const Polynomial g_interval = Polynomial::constant(svar, 1.0) - s_poly * s_poly;
  SemialgebraicSet interval(svar, {g_interval}, {{-1.0, 1.0}});

  LocalUpperHandles out;
  out.lie = builder.putinar_nonneg(expr, interval, order, "hjb_upper_lie");

  // Terminal half: eps/2 - l_T(x(1)) + v(1, x(1)) >= 0 as a scalar row.
  const std::vector<double> x_end = ptraj.eval_state(1.0);
  std::vector<double> tx_end;
  tx_end.push_back(1.0);
  tx_end.insert(tx_end.end(), x_end.begin(), x_end.end());
  const auto [v_const, v_lin] = v.eval_point(tx_end);
  const auto [e_const, e_lin] = half_epsilon.eval_point({1.0});
  const double lT_end = prob.terminal_cost.evaluate(x_end);

  std::map<int, double> lin = e_lin;
  for (const auto& [var, c] : v_lin) lin[var] += c;
  builder.add_scalar_inequality(lin, e_const - lT_end + v_const);
  out.terminal_row_emitted = 1;
  return out;
}

double evaluate_bound(const ValueCandidate& cand, double t0, const std::vector<double>& x0,
                      bool certificates_verified) {
  if (!certificates_verified)
    throw std::invalid_argument("evaluate_bound: refusing to report a bound from an unverified v");
  std::vector<double> pt;
  if (cand.horizon == Horizon::FixedUnit) pt.push_back(t0);
  pt.insert(pt.end(), x0.begin(), x0.end());
  return cand.v.evaluate(pt);
}

SuboptimalityReport suboptimality(const Polynomial& v, double epsilon, const Trajectory& traj,
                                  const PolynomialTrajectory& ptraj, const ControlProblem& prob,
                                  bool certificates_verified) {
  if (!certificates_verified)
    throw std::invalid_argument("suboptimality: both condition certificates must be verified");
  SuboptimalityReport rep;
  rep.epsilon = epsilon;
  rep.fit_residual = ptraj.fit_residual;

  const std::size_t n = traj.size();
  auto l_at = [&](std::size_t k) {
    std::vector<double> xu = traj.states[k];
    xu.insert(xu.end(), traj.controls[k].begin(), traj.controls[k].end());
    return prob.lagrangian.evaluate(xu);
  };
  auto trapezoid = [&](std::size_t stride) {
    double total = 0.0;
    std::size_t prev = 0;
    for (std::size_t k = stride; k < n; k += stride) {
      total += 0.5 * (traj.times[k] - traj.times[prev]) * (l_at(prev) + l_at(k));
      prev = k;
    }
    if (prev != n - 1 && n > 1)
      total += 0.5 * (traj.times[n - 1] - traj.times[prev]) * (l_at(prev) + l_at(n - 1));
    return total;
  };

  const double run_cost = n > 1 ? trapezoid(1) : 0.0;
  rep.trajectory_cost = run_cost + prob.terminal_cost.evaluate(traj.states.back());
  if (n > 2) rep.quad_error = std::abs(trapezoid(1) - trapezoid(2)) / 3.0;

  {
    std::vector<double> tx;
    if (prob.horizon == Horizon::FixedUnit) tx.push_back(traj.t0);
    tx.insert(tx.end(), traj.states.front().begin(), traj.states.front().end());
    rep.bound_value = v.evaluate(tx);
  }
  rep.gap = rep.trajectory_cost - rep.bound_value;

  // Sampled Lipschitz estimate of the integrand G = l + dv/dt + grad v . f
  // with respect to (x, u), used to propagate the trajectory fit residual.
  const VariableSet dv = hjb_domain_vars(prob);
  Polynomial G = prob.lagrangian.embedded_into(dv);
  if (prob.horizon == Horizon::FixedUnit) G = G + v.partial("t").embedded_into(dv);
  for (std::size_t i = 0; i < prob.state_dim(); ++i)
    G = G + v.partial(prob.state_vars.name(i)).embedded_into(dv) * prob.dynamics[i].embedded_into(dv);
  std::vector<Polynomial> grads;
  for (std::size_t i = 0; i < prob.state_dim(); ++i) grads.push_back(G.partial(prob.state_vars.name(i)));
  for (std::size_t j = 0; j < prob.control_dim(); ++j)
    grads.push_back(G.partial(prob.control_vars.name(j)));
  double lip = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> z;
    if (prob.horizon == Horizon::FixedUnit) z.push_back(traj.times[k]);
    z.insert(z.end(), traj.states[k].begin(), traj.states[k].end());
    z.insert(z.end(), traj.controls[k].begin(), traj.controls[k].end());
    double sq = 0.0;
    for (const auto& g : grads) {
      const double gv = g.evaluate(z);
      sq += gv * gv;
    }
    lip = std::max(lip, std::sqrt(sq));
  }
  rep.lipschitz = lip;
  return rep;
}

}  // namespace certbound
