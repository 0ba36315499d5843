#include "certbound/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <set>

namespace certbound {

SemialgebraicSet::SemialgebraicSet(VariableSet vars, std::vector<Polynomial> inequalities,
                                   std::vector<std::pair<double, double>> bounding_box)
    : vars_(std::move(vars)),
      inequalities_(std::move(inequalities)),
      bounding_box_(std::move(bounding_box)) {
  for (const auto& g : inequalities_) {
    if (g.vars() != vars_)
      throw std::invalid_argument("SemialgebraicSet: inequality over a different variable set");
  }
  if (!bounding_box_.empty() && bounding_box_.size() != vars_.size())
    throw std::invalid_argument("SemialgebraicSet: bounding box dimension mismatch");
}

bool SemialgebraicSet::membership(const std::vector<double>& point, double tol) const {
  for (const auto& g : inequalities_)
    if (g.evaluate(point) < -tol) return false;
  return true;
}

double SemialgebraicSet::violation(const std::vector<double>& point) const {
  double worst = 0.0;
  for (const auto& g : inequalities_) worst = std::max(worst, -g.evaluate(point));
  return std::max(0.0, worst);
}

SemialgebraicSet box_set(const VariableSet& vars,
                         const std::vector<std::pair<double, double>>& bounds) {
  if (bounds.size() != vars.size())
    throw std::invalid_argument("box_set: one (lo, hi) pair per variable required");
  std::vector<Polynomial> gs;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [lo, hi] = bounds[i];
    if (!(lo < hi)) throw std::invalid_argument("box_set: empty interval");
    const Polynomial z = Polynomial::variable(vars, vars.name(i));
    gs.push_back((Polynomial::constant(vars, hi) - z) * (z - Polynomial::constant(vars, lo)));
  }
  return SemialgebraicSet(vars, std::move(gs), bounds);
}

SemialgebraicSet ball_set(const VariableSet& vars, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("ball_set: radius must be positive");
  Polynomial g = Polynomial::constant(vars, radius * radius);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Polynomial z = Polynomial::variable(vars, vars.name(i));
    g = g - z * z;
  }
  std::vector<std::pair<double, double>> bbox(vars.size(), {-radius, radius});
  return SemialgebraicSet(vars, {std::move(g)}, std::move(bbox));
}

SemialgebraicSet point_set(const VariableSet& vars, const std::vector<double>& point) {
  if (point.size() != vars.size())
    throw std::invalid_argument("point_set: point dimension mismatch");
  Polynomial g(vars);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Polynomial d =
        Polynomial::variable(vars, vars.name(i)) - Polynomial::constant(vars, point[i]);
    g = g - d * d;
  }
  std::vector<std::pair<double, double>> bbox;
  for (double p : point) bbox.emplace_back(p, p);
  return SemialgebraicSet(vars, {std::move(g)}, std::move(bbox));
}

int ControlProblem::dynamics_degree() const {
  int d = 0;
  for (const auto& f : dynamics) d = std::max(d, f.degree());
  return d;
}

std::vector<double> ControlProblem::eval_dynamics(const std::vector<double>& x,
                                                  const std::vector<double>& u) const {
  std::vector<double> xu;
  xu.reserve(x.size() + u.size());
  xu.insert(xu.end(), x.begin(), x.end());
  xu.insert(xu.end(), u.begin(), u.end());
  std::vector<double> out(dynamics.size());
  for (std::size_t i = 0; i < dynamics.size(); ++i) out[i] = dynamics[i].evaluate(xu);
  return out;
}

ControlProblem make_control_problem(VariableSet state_vars, VariableSet control_vars,
                                    std::vector<Polynomial> dynamics, Polynomial lagrangian,
                                    Polynomial terminal_cost, SemialgebraicSet X,
                                    SemialgebraicSet U, SemialgebraicSet XT, Horizon horizon) {
  std::vector<std::string> names = state_vars.names();
  for (const auto& n : control_vars.names()) names.push_back(n);
  VariableSet xu(names);

  ControlProblem p;
  p.state_vars = std::move(state_vars);
  p.control_vars = std::move(control_vars);
  p.xu_vars = xu;
  if (dynamics.size() != p.state_vars.size())
    throw std::invalid_argument("make_control_problem: need one dynamics component per state");
  for (auto& f : dynamics) {
    if (f.vars() != xu) f = f.embedded_into(xu);
  }
  p.dynamics = std::move(dynamics);
  p.lagrangian = lagrangian.vars() == xu ? std::move(lagrangian) : lagrangian.embedded_into(xu);
  if (terminal_cost.vars() != p.state_vars)
    throw std::invalid_argument("make_control_problem: terminal cost must live over state vars");
  p.terminal_cost = std::move(terminal_cost);
  if (X.vars() != p.state_vars || XT.vars() != p.state_vars)
    throw std::invalid_argument("make_control_problem: X and X_T must live over state vars");
  if (U.vars() != p.control_vars)
    throw std::invalid_argument("make_control_problem: U must live over control vars");
  p.X = std::move(X);
  p.U = std::move(U);
  p.XT = std::move(XT);
  p.horizon = horizon;
  return p;
}

AdmissibilityReport check_admissible(const Trajectory& traj, const ControlProblem& prob,
                                     double ode_tol) {
  (void)ode_tol;
  AdmissibilityReport rep;
  const std::size_t n = traj.size();
  if (n == 0 || traj.states.size() != n || traj.controls.size() != n) {
    rep.structurally_valid = false;
    rep.note = "empty trajectory or inconsistent sample counts";
    return rep;
  }
  if (std::abs(traj.times.front() - traj.t0) > 1e-12) {
    rep.structurally_valid = false;
    rep.note = "first time does not equal t0";
    return rep;
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(traj.times[k + 1] > traj.times[k])) {
      rep.structurally_valid = false;
      rep.note = "times not strictly increasing";
      return rep;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (traj.states[k].size() != prob.state_dim() || traj.controls[k].size() != prob.control_dim()) {
      rep.structurally_valid = false;
      rep.note = "state/control dimension mismatch";
      return rep;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    rep.max_state_violation = std::max(rep.max_state_violation, prob.X.violation(traj.states[k]));
    rep.max_control_violation =
        std::max(rep.max_control_violation, prob.U.violation(traj.controls[k]));
  }
  rep.terminal_violation = prob.XT.violation(traj.states.back());

  // Trapezoidal defect of the integral identity on each sample interval.
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = traj.times[k + 1] - traj.times[k];
    const auto f0 = prob.eval_dynamics(traj.states[k], traj.controls[k]);
    const auto f1 = prob.eval_dynamics(traj.states[k + 1], traj.controls[k + 1]);
    double sq = 0.0;
    for (std::size_t i = 0; i < f0.size(); ++i) {
      const double d = traj.states[k + 1][i] - traj.states[k][i] - 0.5 * dt * (f0[i] + f1[i]);
      sq += d * d;
    }
    rep.max_ode_defect = std::max(rep.max_ode_defect, std::sqrt(sq));
  }
  return rep;
}

std::vector<double> PolynomialTrajectory::eval_state(double t) const {
  std::vector<double> out(x_polys.size());
  for (std::size_t i = 0; i < x_polys.size(); ++i) out[i] = x_polys[i].evaluate({t});
  return out;
}

std::vector<double> PolynomialTrajectory::eval_control(double t) const {
  std::vector<double> out(u_polys.size());
  for (std::size_t i = 0; i < u_polys.size(); ++i) out[i] = u_polys[i].evaluate({t});
  return out;
}

PolynomialTrajectory fit_polynomial_trajectory(const Trajectory& traj, int degree) {
  if (degree < 1) throw std::invalid_argument("fit_polynomial_trajectory: degree must be >= 1");
  const std::size_t n = traj.size();
  if (n < static_cast<std::size_t>(degree) + 1)
    throw std::invalid_argument("fit_polynomial_trajectory: need at least degree+1 samples");
  {
    std::set<double> uniq(traj.times.begin(), traj.times.end());
    if (uniq.size() != n)
      throw std::invalid_argument("fit_polynomial_trajectory: duplicated sample times");
  }

  const std::size_t dx = traj.states.front().size();
  const std::size_t du = traj.controls.front().size();

  Eigen::MatrixXd V(n, degree + 1);
  for (std::size_t k = 0; k < n; ++k) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      V(k, j) = p;
      p *= traj.times[k];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
  if (qr.rank() < degree + 1)
    throw std::invalid_argument("fit_polynomial_trajectory: rank-deficient fit (duplicated times?)");

  VariableSet tvar({"t"});
  auto fit_columns = [&](const std::vector<std::vector<double>>& rows, std::size_t dim) {
    std::vector<Polynomial> polys;
    Eigen::MatrixXd Y(n, dim);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < dim; ++i) Y(k, i) = rows[k][i];
    Eigen::MatrixXd C = qr.solve(Y);
    for (std::size_t i = 0; i < dim; ++i) {
      Polynomial p(tvar);
      for (int j = 0; j <= degree; ++j)
        p = p + Polynomial::monomial(tvar, Monomial({j}), C(j, i));
      polys.push_back(std::move(p));
    }
    return polys;
  };

  PolynomialTrajectory out;
  out.t0 = traj.t0;
  out.t_end = traj.times.back();
  out.time_var = tvar;
  out.x_polys = fit_columns(traj.states, dx);
  out.u_polys = du > 0 ? fit_columns(traj.controls, du) : std::vector<Polynomial>{};

  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double sq = 0.0;
    const auto xs = out.eval_state(traj.times[k]);
    for (std::size_t i = 0; i < dx; ++i) {
      const double d = xs[i] - traj.states[k][i];
      sq += d * d;
    }
    const auto us = out.eval_control(traj.times[k]);
    for (std::size_t i = 0; i < du; ++i) {
      const double d = us[i] - traj.controls[k][i];
      sq += d * d;
    }
    worst = std::max(worst, std::sqrt(sq));
  }
  out.fit_residual = worst;
  return out;
}

}  // namespace certbound
