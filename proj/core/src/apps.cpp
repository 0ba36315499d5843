#include "certbound/apps.hpp"

#include <cmath>
#include <sstream>

namespace certbound {

double box_moment(const std::vector<std::pair<double, double>>& bounds, const Monomial& alpha) {
  if (bounds.size() != alpha.exponents.size())
    throw std::invalid_argument("box_moment: dimension mismatch");
  double m = 1.0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [lo, hi] = bounds[i];
    const int a = alpha.exponents[i];
    m *= (std::pow(hi, a + 1) - std::pow(lo, a + 1)) / (a + 1);
  }
  return m;
}

std::vector<double> box_moment_vector(const std::vector<std::pair<double, double>>& bounds,
                                      const std::vector<Monomial>& basis) {
  std::vector<double> out;
  out.reserve(basis.size());
  for (const auto& m : basis) out.push_back(box_moment(bounds, m));
  return out;
}

double box_volume(const std::vector<std::pair<double, double>>& bounds) {
  double v = 1.0;
  for (const auto& [lo, hi] : bounds) v *= (hi - lo);
  return v;
}

std::vector<double> AffineScaling::to_scaled_state(const std::vector<double>& x) const {
  if (!active) return x;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - state_center[i]) / state_scale[i];
  return y;
}

std::vector<double> AffineScaling::to_original_state(const std::vector<double>& y) const {
  if (!active) return y;
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = state_center[i] + state_scale[i] * y[i];
  return x;
}

namespace {

std::map<std::string, Polynomial> affine_bindings(const VariableSet& vars,
                                                  const std::vector<std::string>& names,
                                                  const std::vector<double>& center,
                                                  const std::vector<double>& scale) {
  std::map<std::string, Polynomial> bind;
  for (const auto& n : vars.names()) bind[n] = Polynomial::variable(vars, n);
  for (std::size_t i = 0; i < names.size(); ++i) {
    bind[names[i]] = Polynomial::constant(vars, center[i]) +
                     scale[i] * Polynomial::variable(vars, names[i]);
  }
  return bind;
}

}  // namespace

std::pair<ControlProblem, AffineScaling> scale_to_unit_box(const ControlProblem& prob) {
  AffineScaling sc;
  if (!prob.X.has_bounding_box() || !prob.U.has_bounding_box()) return {prob, sc};

  auto centers_scales = [](const std::vector<std::pair<double, double>>& box,
                           std::vector<double>& c, std::vector<double>& s) {
    bool nontrivial = false;
    for (const auto& [lo, hi] : box) {
      c.push_back(0.5 * (lo + hi));
      const double half = 0.5 * (hi - lo);
      s.push_back(half > 1e-12 ? half : 1.0);
      if (std::abs(c.back()) > 1e-12 || std::abs(s.back() - 1.0) > 1e-12) nontrivial = true;
    }
    return nontrivial;
  };
  const bool sx = centers_scales(prob.X.bounding_box(), sc.state_center, sc.state_scale);
  const bool su = centers_scales(prob.U.bounding_box(), sc.control_center, sc.control_scale);
  if (!sx && !su) return {prob, sc};
  sc.active = true;

  const auto bind_xu = [&] {
    auto b = affine_bindings(prob.xu_vars, prob.state_vars.names(), sc.state_center, sc.state_scale);
    auto bu = affine_bindings(prob.xu_vars, prob.control_vars.names(), sc.control_center,
                              sc.control_scale);
    for (const auto& n : prob.control_vars.names()) b[n] = bu[n];
    return b;
  }();
  const auto bind_x =
      affine_bindings(prob.state_vars, prob.state_vars.names(), sc.state_center, sc.state_scale);
  const auto bind_u = affine_bindings(prob.control_vars, prob.control_vars.names(),
                                      sc.control_center, sc.control_scale);

  auto map_box = [](const std::vector<std::pair<double, double>>& box,
                    const std::vector<double>& c, const std::vector<double>& s) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < box.size(); ++i)
      out.emplace_back((box[i].first - c[i]) / s[i], (box[i].second - c[i]) / s[i]);
    return out;
  };

  auto map_set = [&](const SemialgebraicSet& set, const std::map<std::string, Polynomial>& bind,
                     const std::vector<double>& c, const std::vector<double>& s) {
    std::vector<Polynomial> gs;
    for (const auto& g : set.inequalities()) gs.push_back(g.substitute(bind));
    return SemialgebraicSet(set.vars(), std::move(gs),
                            set.has_bounding_box() ? map_box(set.bounding_box(), c, s)
                                                   : std::vector<std::pair<double, double>>{});
  };

  ControlProblem sp = prob;
  for (std::size_t i = 0; i < prob.dynamics.size(); ++i)
    sp.dynamics[i] = (1.0 / sc.state_scale[i]) * prob.dynamics[i].substitute(bind_xu);
  sp.lagrangian = prob.lagrangian.substitute(bind_xu);
  sp.terminal_cost = prob.terminal_cost.substitute(bind_x);
  sp.X = map_set(prob.X, bind_x, sc.state_center, sc.state_scale);
  sp.U = map_set(prob.U, bind_u, sc.control_center, sc.control_scale);
  sp.XT = map_set(prob.XT, bind_x, sc.state_center, sc.state_scale);
  return {sp, sc};
}

Polynomial unscale_state_polynomial(const Polynomial& p_scaled, const AffineScaling& sc,
                                    const ControlProblem& original) {
  if (!sc.active) return p_scaled;
  const VariableSet& pv = p_scaled.vars();
  std::map<std::string, Polynomial> bind;
  for (const auto& n : pv.names()) bind[n] = Polynomial::variable(pv, n);
  for (std::size_t i = 0; i < original.state_dim(); ++i) {
    const std::string& n = original.state_vars.name(i);
    if (!pv.contains(n)) continue;
    bind[n] = (1.0 / sc.state_scale[i]) *
              (Polynomial::variable(pv, n) - Polynomial::constant(pv, sc.state_center[i]));
  }
  return p_scaled.substitute(bind);
}

namespace {

// Certificates can be extracted from any near-feasible iterate; the
// independent verifier decides whether the result stands.
bool extractable(const SdpSolution& s) {
  return s.status == SdpStatus::Optimal || s.residuals.primal_feas <= 1e-6;
}

std::map<int, double> point_objective(const DecisionPolynomial& v,
                                      const std::vector<double>& point) {
  std::map<int, double> lin;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double val = Polynomial::monomial(v.vars(), v.basis()[k]).evaluate(point);
    if (val != 0.0) lin[v.coeff_vars()[k]] = val;
  }
  return lin;
}

struct VerifySummary {
  bool all_valid = true;
  double worst_residual = 0.0;
  double worst_eig = 0.0;
};

VerifySummary verify_all(const std::vector<PutinarCertificate>& certs, double res_tol,
                         double eig_tol) {
  VerifySummary s;
  bool first = true;
  for (const auto& c : certs) {
    const auto out = verify_certificate(c, res_tol, eig_tol);
    s.all_valid = s.all_valid && out.valid;
    s.worst_residual = std::max(s.worst_residual, out.worst_residual);
    s.worst_eig = first ? out.worst_eigenvalue : std::min(s.worst_eig, out.worst_eigenvalue);
    first = false;
  }
  return s;
}

}  // namespace

OcpResult solve_ocp(const ControlProblem& prob, double t0, const std::vector<double>& x0,
                    int order, const AppSolveOptions& opts) {
  if (x0.size() != prob.state_dim()) throw std::invalid_argument("solve_ocp: x0 dimension mismatch");
  auto [sp, sc] = opts.scale_to_unit ? scale_to_unit_box(prob)
                                     : std::make_pair(prob, AffineScaling{});
  const std::vector<double> y0 = sc.to_scaled_state(x0);

  OcpResult res;
  res.order = order;
  res.scaling = sc;

  SdpBuilder builder;
  const int vdeg = value_degree_for_order(sp, order);
  DecisionPolynomial v = builder.add_decision_polynomial(value_vars(sp), vdeg, "v");
  lower_bound_constraints(builder, v, sp, order);

  std::vector<double> pt;
  if (sp.horizon == Horizon::FixedUnit) pt.push_back(t0);
  pt.insert(pt.end(), y0.begin(), y0.end());
  builder.set_objective(true, point_objective(v, pt));

  SdpProblem sdp = builder.build();
  SdpSolution sol = solve(sdp, opts.sdp);
  res.status = sol.status;
  res.assembly_log = builder.log();
  if (!extractable(sol)) return res;

  const auto fv = builder.free_values(sol);
  res.v_scaled = v.value(fv);
  res.v = unscale_state_polynomial(res.v_scaled, sc, prob);
  res.bound = res.v_scaled.evaluate(pt);
  for (int h = 0; h < builder.num_putinar(); ++h)
    res.certificates.push_back(extract_certificate(builder, {h}, sdp, sol));
  const auto vs = verify_all(res.certificates, opts.res_tol, opts.eig_tol);
  res.verified = vs.all_valid;
  res.worst_residual = vs.worst_residual;
  res.worst_eigenvalue = vs.worst_eig;
  return res;
}

RoaResult solve_roa(const ControlProblem& prob, double t0, int order, const AppSolveOptions& opts,
                    const std::optional<std::vector<double>>& moments_of_X) {
  if (prob.horizon != Horizon::FixedUnit)
    throw std::invalid_argument("solve_roa: fixed-unit horizon required");
  if (moments_of_X && opts.scale_to_unit)
    throw std::invalid_argument("solve_roa: caller-supplied moments require scale_to_unit=false");
  if (!moments_of_X && !prob.X.has_bounding_box())
    throw std::invalid_argument("solve_roa: X needs a box (or supply a moment vector)");

  auto [sp, sc] = opts.scale_to_unit ? scale_to_unit_box(prob)
                                     : std::make_pair(prob, AffineScaling{});
  // The reachability condition uses l = 0 and l_T = 0.
  sp.lagrangian = Polynomial::zero(sp.xu_vars);
  sp.terminal_cost = Polynomial::zero(sp.state_vars);

  RoaResult res;
  res.order = order;
  res.scaling = sc;

  SdpBuilder builder;
  const int vdeg = value_degree_for_order(sp, order);
  DecisionPolynomial v = builder.add_decision_polynomial(value_vars(sp), vdeg, "v");
  DecisionPolynomial w = builder.add_decision_polynomial(sp.state_vars, 2 * order, "w");
  lower_bound_constraints(builder, v, sp, order);

  // v(., t0) over the states.
  std::map<std::string, Polynomial> at_t0;
  at_t0["t"] = Polynomial::constant(sp.state_vars, t0);
  for (const auto& n : sp.state_vars.names()) at_t0[n] = Polynomial::variable(sp.state_vars, n);
  const AffineExpr v_t0 = v.expr().substitute(at_t0);
  builder.putinar_nonneg(v_t0 - w.expr(), sp.X, order, "roa_w_below_v");
  builder.putinar_nonneg(AffineExpr(Polynomial::constant(sp.state_vars, 1.0)) - w.expr(), sp.X,
                         order, "roa_w_below_one");

  std::vector<double> moms;
  double volume_factor = 1.0;
  if (moments_of_X) {
    moms = *moments_of_X;
    if (moms.size() != w.size())
      throw std::invalid_argument("solve_roa: moment vector does not match the w basis");
  } else {
    const auto box = sp.X.bounding_box();
    moms = box_moment_vector(box, w.basis());
    if (sc.active)
      for (double s : sc.state_scale) volume_factor *= s;
  }
  std::map<int, double> obj;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (moms[k] != 0.0) obj[w.coeff_vars()[k]] = moms[k];
  builder.set_objective(true, obj);

  SdpProblem sdp = builder.build();
  SdpSolution sol = solve(sdp, opts.sdp);
  res.status = sol.status;
  res.assembly_log = builder.log();
  if (!extractable(sol)) return res;

  const auto fv = builder.free_values(sol);
  res.v_scaled = v.value(fv);
  res.w_scaled = w.value(fv);
  res.v = unscale_state_polynomial(res.v_scaled, sc, prob);
  res.w = unscale_state_polynomial(res.w_scaled, sc, prob);
  res.objective = volume_factor * builder.objective_value(sol);
  for (int h = 0; h < builder.num_putinar(); ++h)
    res.certificates.push_back(extract_certificate(builder, {h}, sdp, sol));
  const auto vs = verify_all(res.certificates, opts.res_tol, opts.eig_tol);
  res.verified = vs.all_valid;
  res.worst_residual = vs.worst_residual;
  res.worst_eigenvalue = vs.worst_eig;
  return res;
}

IocResult solve_ioc(const ControlProblem& prob_without_l,
                    const std::vector<PolynomialTrajectory>& ptrajs, int order, double lambda,
                    const std::vector<Monomial>& l_basis, const IocOptions& opts) {
  const ControlProblem& prob = prob_without_l;
  if (prob.horizon != Horizon::FixedUnit)
    throw std::invalid_argument("solve_ioc: fixed-unit horizon required");
  if (!prob.terminal_cost.is_zero())
    throw std::invalid_argument("solve_ioc: terminal cost must be fixed to zero");
  if (ptrajs.empty()) throw std::invalid_argument("solve_ioc: at least one trajectory required");
  if (opts.normalize && !prob.X.has_bounding_box())
    throw std::invalid_argument("solve_ioc: normalization needs a box X");

  IocResult res;
  res.order = order;
  res.lambda = lambda;
  res.l_basis = l_basis;

  SdpBuilder builder;
  const int vdeg = value_degree_for_order(prob, order);
  DecisionPolynomial v = builder.add_decision_polynomial(value_vars(prob), vdeg, "v");

  // Lagrangian dictionary: state-shaped monomials are padded with zero
  // control exponents; full (x, u) monomials pass through.
  std::vector<Monomial> basis_xu;
  for (const auto& m : l_basis) {
    if (m.exponents.size() == prob.xu_vars.size()) {
      basis_xu.push_back(m);
    } else if (m.exponents.size() == prob.state_dim()) {
      Monomial big = Monomial::unit(prob.xu_vars.size());
      for (std::size_t i = 0; i < m.exponents.size(); ++i) big.exponents[i] = m.exponents[i];
      basis_xu.push_back(std::move(big));
    } else {
      throw std::invalid_argument("solve_ioc: dictionary monomial has the wrong arity");
    }
  }
  DecisionPolynomial l = builder.add_decision_polynomial(prob.xu_vars, basis_xu, "l");
  const int eps = builder.add_free_var("epsilon");

  int l_deg = 0;
  for (const auto& m : basis_xu) l_deg = std::max(l_deg, m.degree());
  lower_bound_constraints(builder, v.expr(), l.expr(), prob, order);

  VariableSet tvar({"t"});
  const AffineExpr half_eps = AffineExpr::term(eps, Polynomial::constant(tvar, 0.5));
  double max_fit = 0.0;
  for (const auto& pt : ptrajs) {
    const int d_local = std::max(order, local_upper_order(prob, pt, vdeg, l_deg));
    local_upper_constraints(builder, v.expr(), l.expr(), prob, pt, half_eps, d_local);
    max_fit = std::max(max_fit, pt.fit_residual);
  }
  res.max_fit_residual = max_fit;

  if (opts.normalize) {
    // Mean over X times U (normalized Lebesgue on both boxes); for
    // state-only dictionaries this reduces to the mean over X.
    if (!prob.U.has_bounding_box())
      throw std::invalid_argument("solve_ioc: normalization needs control bounds too");
    auto box = prob.X.bounding_box();
    for (const auto& b : prob.U.bounding_box()) box.push_back(b);
    const double vol = box_volume(box);
    std::map<int, double> lin;
    for (std::size_t k = 0; k < basis_xu.size(); ++k) {
      const double m = box_moment(box, basis_xu[k]) / vol;
      if (m != 0.0) lin[l.coeff_vars()[k]] = m;
    }
    builder.add_linear_equality(lin, 1.0);
  }

  // |c_j| surrogate: s_j >= +-c_j, objective eps + lambda * sum s_j. The
  // auxiliaries are only staged when the weight is active, otherwise they
  // would form an unbounded optimal face.
  std::map<int, double> obj;
  obj[eps] = 1.0;
  if (lambda > 0.0) {
    for (std::size_t k = 0; k < l.size(); ++k) {
      const int cj = l.coeff_vars()[k];
      const int sj = builder.add_free_var("s[" + std::to_string(k) + "]");
      builder.add_scalar_inequality({{sj, 1.0}, {cj, -1.0}}, 0.0);
      builder.add_scalar_inequality({{sj, 1.0}, {cj, 1.0}}, 0.0);
      obj[sj] = lambda;
    }
  }
  builder.set_objective(false, obj);

  SdpProblem sdp = builder.build();
  SdpSolution sol = solve(sdp, opts.app.sdp);
  res.status = sol.status;
  res.assembly_log = builder.log();
  if (!extractable(sol)) return res;

  const auto fv = builder.free_values(sol);
  res.epsilon = fv.at(eps);
  res.v = v.value(fv);
  res.lagrangian = l.value(fv);
  res.l_coeffs.clear();
  for (std::size_t k = 0; k < l.size(); ++k) res.l_coeffs.push_back(fv.at(l.coeff_vars()[k]));
  if (opts.normalize) {
    auto box = prob.X.bounding_box();
    for (const auto& b : prob.U.bounding_box()) box.push_back(b);
    double nv = 0.0;
    for (std::size_t k = 0; k < basis_xu.size(); ++k)
      nv += res.l_coeffs[k] * box_moment(box, basis_xu[k]) / box_volume(box);
    res.normalization_value = nv;
  }
  for (int h = 0; h < builder.num_putinar(); ++h)
    res.certificates.push_back(extract_certificate(builder, {h}, sdp, sol));
  const auto vs = verify_all(res.certificates, opts.app.res_tol, opts.app.eig_tol);
  res.verified = vs.all_valid;
  res.worst_residual = vs.worst_residual;
  res.worst_eigenvalue = vs.worst_eig;
  return res;
}

std::string sublevel_grid_csv(const Polynomial& v, double t0, const GridSpec& grid) {
  const bool has_t = v.vars().contains("t");
  const std::size_t dx = v.vars().size() - (has_t ? 1 : 0);
  if (grid.bounds.size() != dx || grid.counts.size() != dx)
    throw std::invalid_argument("sublevel_grid_csv: grid spec does not match state dimension");
  for (int c : grid.counts)
    if (c < 1) throw std::invalid_argument("sublevel_grid_csv: counts must be >= 1");

  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& n : v.vars().names()) {
    if (n == "t" && has_t) continue;
    os << (first ? "" : ",") << n;
    first = false;
  }
  os << ",v\n";

  std::vector<int> idx(dx, 0);
  std::vector<double> x(dx);
  while (true) {
    for (std::size_t i = 0; i < dx; ++i) {
      const auto [lo, hi] = grid.bounds[i];
      x[i] = grid.counts[i] == 1 ? lo : lo + (hi - lo) * idx[i] / (grid.counts[i] - 1);
    }
    std::vector<double> pt;
    if (has_t) pt.push_back(t0);
    pt.insert(pt.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < dx; ++i) os << x[i] << ",";
    os << v.evaluate(pt) << "\n";

    // Row-major: last axis fastest.
    int axis = static_cast<int>(dx) - 1;
    while (axis >= 0 && ++idx[axis] == grid.counts[axis]) idx[axis--] = 0;
    if (axis < 0) break;
  }
  return os.str();
}

std::vector<double> coeffs_on_basis(const Polynomial& p, const std::vector<Monomial>& basis) {
  std::map<Monomial, std::size_t, GrlexLess> where;
  for (std::size_t k = 0; k < basis.size(); ++k) where[basis[k]] = k;
  std::vector<double> out(basis.size(), 0.0);
  for (const auto& [m, c] : p.terms()) {
    auto it = where.find(m);
    if (it == where.end())
      throw std::invalid_argument("coeffs_on_basis: polynomial has a term outside the basis");
    out[it->second] = c;
  }
  return out;
}

double normalized_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("normalized_distance: size mismatch");
  double na = 0.0, nb = 0.0;
  for (double x : a) na += x * x;
  for (double x : b) nb += x * x;
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na == 0.0 || nb == 0.0) return (na == nb) ? 0.0 : 1.0;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] / na - b[i] / nb;
    d += t * t;
  }
  return 0.5 * std::sqrt(d);
}

}  // namespace certbound
