#include "certbound/hjb.hpp"

#include <cmath>

#include "doctest.h"
#include "support/toy_dp.hpp"

using namespace certbound;
using testsupport::scalar_toy;
using testsupport::ToyDpOracle;

namespace {

// The assembled programs sit on degenerate optimal faces; 1e-7 is the
// tolerance the application layer uses for them as well.
SdpOptions loose() {
  SdpOptions o;
  o.tol = 1e-7;
  return o;
}

// Euler rollout of dx/dt = u with a constant control.
Trajectory constant_control_rollout(double x0, double u, int n) {
  Trajectory tr;
  tr.t0 = 0.0;
  double x = x0;
  for (int k = 0; k <= n; ++k) {
    tr.times.push_back(double(k) / n);
    tr.states.push_back({x});
    tr.controls.push_back({u});
    x += u / n;
  }
  return tr;
}

}  // namespace

TEST_CASE("nonnegative costs admit v = 0") {
  const ControlProblem prob = scalar_toy();  // l = x^2 >= 0, l_T = 0
  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 2, "v");
  lower_bound_constraints(b, v, prob, 2);
  const SdpSolution s = solve(b.build());
  CHECK(s.status == SdpStatus::Optimal);  // feasible; v = 0 is in the set
}

TEST_CASE("free terminal time drops the time derivative") {
  VariableSet xs({"x"});
  VariableSet us({"u"});
  VariableSet xu({"x", "u"});
  const auto prob = make_control_problem(
      xs, us, {Polynomial::variable(xu, "u")}, Polynomial::constant(xu, 1.0),
      Polynomial::zero(xs), box_set(xs, {{-1.0, 1.0}}), box_set(us, {{-1.0, 1.0}}),
      point_set(xs, {0.0}), Horizon::FreeTerminal);

  CHECK(value_vars(prob).names() == std::vector<std::string>{"x"});
  CHECK(hjb_domain_vars(prob).names() == std::vector<std::string>{"x", "u"});

  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 2, "v");
  const auto handles = lower_bound_constraints(b, v, prob, 1);
  // Constraint (i) target is 1 + v'(x) u over (x, u).
  const auto& info = b.info(handles.lie);
  CHECK(info.target.constant().coeff(Monomial({0, 0})) == doctest::Approx(1.0));
  CHECK(info.set.vars().names() == std::vector<std::string>{"x", "u"});
  CHECK(solve(b.build()).status == SdpStatus::Optimal);
}

TEST_CASE("falsification fixture: v = x^2 fails the minimum-effort condition") {
  // With l = 1, f = u the expression is 1 + 2 x u; its minimum on the box
  // is -1 (grid oracle below), so no certificate can exist at any order.
  const Polynomial one = Polynomial::constant(VariableSet({"x", "u"}), 1.0);
  const ControlProblem prob = scalar_toy(&one);

  double grid_min = 1e30;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const double x = -1.0 + i / 20.0, u = -1.0 + j / 20.0;
      grid_min = std::min(grid_min, 1.0 + 2.0 * x * u);
    }
  CHECK(grid_min == doctest::Approx(-1.0).epsilon(1e-12));

  const VariableSet vv = value_vars(prob);
  const Polynomial v_fixed =
      Polynomial::variable(vv, "x") * Polynomial::variable(vv, "x");  // time-independent
  for (int order = 1; order <= 2; ++order) {
    SdpBuilder b;
    lower_bound_constraints(b, AffineExpr(v_fixed), AffineExpr(prob.lagrangian), prob, order);
    CAPTURE(order);
    CHECK(solve(b.build()).status == SdpStatus::Infeasible);
  }
}

TEST_CASE("degree overflow diagnostics") {
  const ControlProblem prob = scalar_toy();
  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 6, "v");
  CHECK_THROWS_WITH_AS(lower_bound_constraints(b, v, prob, 2),
                       doctest::Contains("degree"), std::invalid_argument);
  CHECK(value_degree_for_order(prob, 2) == 4);  // deg f = 1 keeps v at 2d
}

TEST_CASE("local upper condition: exact value function gives epsilon ~ 0") {
  // v = x^3/3 satisfies both conditions with equality along x(t) = 1 - t,
  // u = -1 for the l = x^2 toy.
  const ControlProblem prob = scalar_toy();
  const Trajectory traj = constant_control_rollout(1.0, -1.0, 100);
  const auto ptraj = fit_polynomial_trajectory(traj, 3);
  REQUIRE(ptraj.fit_residual <= 1e-9);

  const VariableSet vv = value_vars(prob);
  const Polynomial x = Polynomial::variable(vv, "x");
  const Polynomial v_exact = (1.0 / 3.0) * x * x * x;

  SdpBuilder b;
  const int eps = b.add_free_var("eps");
  VariableSet tvar({"t"});
  const AffineExpr half_eps = AffineExpr::term(eps, Polynomial::constant(tvar, 0.5));
  local_upper_constraints(b, AffineExpr(v_exact), AffineExpr(prob.lagrangian), prob, ptraj,
                          half_eps, local_upper_order(prob, ptraj, 3, 2));
  b.set_objective(false, {{eps, 1.0}});
  SdpProblem p = b.build();
  const SdpSolution s = solve(p);
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(b.free_value(s, eps) <= 1e-6);
  CHECK(b.free_value(s, eps) >= -1e-9);
}

TEST_CASE("local upper condition: v = 0 with unit cost forces epsilon >= 2") {
  const Polynomial one = Polynomial::constant(VariableSet({"x", "u"}), 1.0);
  const ControlProblem prob = scalar_toy(&one);
  const Trajectory traj = constant_control_rollout(1.0, -1.0, 60);
  const auto ptraj = fit_polynomial_trajectory(traj, 2);

  SdpBuilder b;
  const int eps = b.add_free_var("eps");
  VariableSet tvar({"t"});
  const AffineExpr half_eps = AffineExpr::term(eps, Polynomial::constant(tvar, 0.5));
  const Polynomial v0 = Polynomial::zero(value_vars(prob));
  local_upper_constraints(b, AffineExpr(v0), AffineExpr(prob.lagrangian), prob, ptraj, half_eps,
                          local_upper_order(prob, ptraj, 1, 0));
  b.set_objective(false, {{eps, 1.0}});
  const SdpSolution s = solve(b.build());
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(b.free_value(s, eps) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("local upper condition: v = x along the straight line") {
  // 1 + dv/dt + v' u = 1 + 0 - 1 = 0 along u = -1, so every eps >= 0 works.
  const Polynomial one = Polynomial::constant(VariableSet({"x", "u"}), 1.0);
  const ControlProblem prob = scalar_toy(&one);
  const Trajectory traj = constant_control_rollout(1.0, -1.0, 60);
  const auto ptraj = fit_polynomial_trajectory(traj, 2);

  SdpBuilder b;
  const int eps = b.add_free_var("eps");
  VariableSet tvar({"t"});
  const AffineExpr half_eps = AffineExpr::term(eps, Polynomial::constant(tvar, 0.5));
  const Polynomial vx = Polynomial::variable(value_vars(prob), "x");
  local_upper_constraints(b, AffineExpr(vx), AffineExpr(prob.lagrangian), prob, ptraj, half_eps,
                          local_upper_order(prob, ptraj, 1, 0));
  b.set_objective(false, {{eps, 1.0}});
  const SdpSolution s = solve(b.build());
  REQUIRE(s.status == SdpStatus::Optimal);
  CHECK(std::abs(b.free_value(s, eps)) <= 1e-6);
}

TEST_CASE("evaluate_bound guards on verification") {
  const ControlProblem prob = scalar_toy();
  const ValueCandidate cand = make_value_candidate(prob, Polynomial::zero(value_vars(prob)));
  CHECK(evaluate_bound(cand, 0.0, {0.5}, true) == 0.0);
  CHECK_THROWS_AS((void)evaluate_bound(cand, 0.0, {0.5}, false), std::invalid_argument);
}

TEST_CASE("lower-bound soundness against oracle trajectories") {
  // Certify a v by maximizing v(0, 0.8), then check every admissible
  // trajectory the DP oracle produces costs at least v(t0, x0) - 1e-4.
  const ControlProblem prob = scalar_toy();
  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 6, "v");
  lower_bound_constraints(b, v, prob, 3);
  std::map<int, double> obj;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double val = Polynomial::monomial(v.vars(), v.basis()[k]).evaluate({0.0, 0.8});
    if (val != 0.0) obj[v.coeff_vars()[k]] = val;
  }
  b.set_objective(true, obj);
  SdpProblem p = b.build();
  const SdpSolution s = solve(p, loose());
  REQUIRE(s.status == SdpStatus::Optimal);
  const Polynomial v_sol = v.value(b.free_values(s));
  bool all_valid = true;
  for (int h = 0; h < b.num_putinar(); ++h)
    all_valid = all_valid &&
                verify_certificate(extract_certificate(b, {h}, p, s), 1e-6, 1e-6).valid;
  REQUIRE(all_valid);

  const ToyDpOracle oracle(prob);
  for (double x0 : {0.8, 0.5, 0.2, -0.4, -0.7}) {
    const Trajectory tr = oracle.extract(0.0, x0);
    // Greedy bang-bang switches cost one trapezoid interval each: the
    // expected defect there is dt * |du| / 2 = 0.0025.
    const auto rep = check_admissible(tr, prob, 3e-3);
    REQUIRE(rep.structurally_valid);
    REQUIRE(rep.max_ode_defect <= 3e-3);
    double cost = 0.0;
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
      const double l0 = prob.lagrangian.evaluate({tr.states[k][0], tr.controls[k][0]});
      const double l1 = prob.lagrangian.evaluate({tr.states[k + 1][0], tr.controls[k + 1][0]});
      cost += 0.5 * (tr.times[k + 1] - tr.times[k]) * (l0 + l1);
    }
    const double bound = v_sol.evaluate({0.0, x0});
    CAPTURE(x0);
    CHECK(cost >= bound - 1e-4);
  }
}

TEST_CASE("suboptimality accounting on the exact pair") {
  const ControlProblem prob = scalar_toy();
  const Trajectory traj = constant_control_rollout(1.0, -1.0, 200);
  const auto ptraj = fit_polynomial_trajectory(traj, 3);
  const VariableSet vv = value_vars(prob);
  const Polynomial x = Polynomial::variable(vv, "x");
  const Polynomial v_exact = (1.0 / 3.0) * x * x * x;

  const auto rep = suboptimality(v_exact, 1e-8, traj, ptraj, prob, true);
  CHECK(rep.trajectory_cost == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
  CHECK(rep.bound_value == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(std::abs(rep.gap) <= 1e-4);
  CHECK(rep.consistent(1e-4));
  CHECK_THROWS_AS((void)suboptimality(v_exact, 0.0, traj, ptraj, prob, false),
                  std::invalid_argument);

  SUBCASE("v = 0 makes the gap the full trajectory cost") {
    const auto rep0 = suboptimality(Polynomial::zero(vv), 2.0, traj, ptraj, prob, true);
    CHECK(rep0.bound_value == 0.0);
    CHECK(rep0.gap == doctest::Approx(rep0.trajectory_cost));
  }
}

TEST_CASE("pointwise value chain along a certified trajectory") {
  // Solve (2) + (4) jointly for the l = x^2 toy along the exact optimal
  // trajectory from x0 = 1 and check v(t, x(t)) brackets the tail cost.
  const ControlProblem prob = scalar_toy();
  const Trajectory traj = constant_control_rollout(1.0, -1.0, 100);
  const auto ptraj = fit_polynomial_trajectory(traj, 3);

  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 6, "v");
  const int eps = b.add_free_var("eps");
  lower_bound_constraints(b, v, prob, 3);
  VariableSet tvar({"t"});
  const AffineExpr half_eps = AffineExpr::term(eps, Polynomial::constant(tvar, 0.5));
  local_upper_constraints(b, v.expr(), AffineExpr(prob.lagrangian), prob, ptraj, half_eps,
                          local_upper_order(prob, ptraj, 6, 2));
  b.set_objective(false, {{eps, 1.0}});
  SdpProblem p = b.build();
  const SdpSolution s = solve(p, loose());
  REQUIRE(s.status == SdpStatus::Optimal);
  const double eps_val = b.free_value(s, eps);
  CHECK(eps_val <= 0.05);
  const Polynomial v_sol = v.value(b.free_values(s));

  const auto rep = suboptimality(v_sol, eps_val, traj, ptraj, prob, true);
  CHECK(rep.consistent(1e-6));

  // Tail cost from each sample vs. the certified wedge.
  const std::size_t n = traj.size();
  std::vector<double> tail(n, 0.0);
  for (std::size_t k = n - 1; k-- > 0;) {
    const double l0 = prob.lagrangian.evaluate({traj.states[k][0], traj.controls[k][0]});
    const double l1 =
        prob.lagrangian.evaluate({traj.states[k + 1][0], traj.controls[k + 1][0]});
    tail[k] = tail[k + 1] + 0.5 * (traj.times[k + 1] - traj.times[k]) * (l0 + l1);
  }
  const double slack = rep.slack() + 1e-5;
  for (std::size_t k = 0; k < n; k += 9) {
    const double vt = v_sol.evaluate({traj.times[k], traj.states[k][0]});
    CAPTURE(traj.times[k]);
    CHECK(vt <= tail[k] + slack);
    CHECK(tail[k] <= vt + eps_val + slack);
  }
}

TEST_CASE("free-terminal certificates embed into any fixed horizon") {
  // Solve the free-time minimum-cost structure, then re-verify the Lie
  // certificate after embedding everything into the (t, x, u) world.
  VariableSet xs({"x"});
  VariableSet us({"u"});
  VariableSet xu({"x", "u"});
  const auto prob = make_control_problem(
      xs, us, {Polynomial::variable(xu, "u")}, Polynomial::constant(xu, 1.0),
      Polynomial::zero(xs), box_set(xs, {{-1.0, 1.0}}), box_set(us, {{-1.0, 1.0}}),
      point_set(xs, {0.0}), Horizon::FreeTerminal);

  SdpBuilder b;
  DecisionPolynomial v = b.add_decision_polynomial(value_vars(prob), 2, "v");
  const auto handles = lower_bound_constraints(b, v, prob, 1);
  std::map<int, double> obj;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double val = Polynomial::monomial(v.vars(), v.basis()[k]).evaluate({0.9});
    if (val != 0.0) obj[v.coeff_vars()[k]] = val;
  }
  b.set_objective(true, obj);
  SdpProblem p = b.build();
  const SdpSolution s = solve(p, loose());
  // This corner sits on a non-strictly-complementary face: the gap may
  // saturate above tol, but the near-feasible iterate still certifies.
  REQUIRE(s.residuals.primal_feas <= 1e-7);
  auto cert = extract_certificate(b, handles.lie, p, s);
  REQUIRE(verify_certificate(cert).valid);

  // Fixed-unit domain: [t(1-t), X, U] with the time inequality first.
  const auto fixed = make_control_problem(xs, us, prob.dynamics, prob.lagrangian,
                                          prob.terminal_cost, prob.X, prob.U, prob.XT,
                                          Horizon::FixedUnit);
  const SemialgebraicSet domain = hjb_domain_set(fixed);
  PutinarCertificate embedded;
  embedded.set = domain;
  embedded.target = cert.target.embedded_into(domain.vars());
  for (const auto& blk : cert.blocks) {
    GramBlock nb;
    nb.gram = blk.gram;
    nb.multiplies = blk.multiplies < 0 ? -1 : blk.multiplies + 1;  // slot 0 is t(1-t)
    for (const auto& m : blk.basis) {
      Monomial big = Monomial::unit(domain.vars().size());
      for (std::size_t i = 0; i < m.exponents.size(); ++i) big.exponents[i + 1] = m.exponents[i];
      nb.basis.push_back(std::move(big));
    }
    embedded.blocks.push_back(std::move(nb));
  }
  CHECK(verify_certificate(embedded).valid);
}
