#include "certbound/apps.hpp"

#include <cmath>
#include <random>

#include "certbound/brockett.hpp"
#include "doctest.h"
#include "support/random_poly.hpp"
#include "support/toy_dp.hpp"

using namespace certbound;
using testsupport::random_point;
using testsupport::random_polynomial;
using testsupport::scalar_toy;
using testsupport::ToyDpOracle;

TEST_CASE("box moments") {
  CHECK(box_moment({{-1.0, 1.0}}, Monomial({2})) == doctest::Approx(2.0 / 3.0));
  CHECK(box_moment({{-1.0, 1.0}, {-1.0, 1.0}}, Monomial({3, 2})) == doctest::Approx(0.0));
  CHECK(box_moment({{-1, 1}, {-1, 1}, {-1, 1}}, Monomial({0, 0, 0})) == doctest::Approx(8.0));

  SUBCASE("Monte Carlo cross-check") {
    std::mt19937_64 rng(10);
    const std::vector<std::pair<double, double>> box{{-1.0, 2.0}, {0.5, 1.5}};
    for (const auto& exps : {std::vector<int>{2, 1}, std::vector<int>{4, 0}, std::vector<int>{1, 3}}) {
      const Monomial alpha(exps);
      double acc = 0.0;
      const int n = 200000;
      for (int s = 0; s < n; ++s) {
        const auto z = std::vector<double>{
            std::uniform_real_distribution<double>(box[0].first, box[0].second)(rng),
            std::uniform_real_distribution<double>(box[1].first, box[1].second)(rng)};
        double v = 1.0;
        for (std::size_t i = 0; i < 2; ++i)
          for (int e = 0; e < alpha.exponents[i]; ++e) v *= z[i];
        acc += v;
      }
      const double mc = acc / n * box_volume(box);
      CHECK(box_moment(box, alpha) == doctest::Approx(mc).epsilon(0.03));
    }
  }
}

TEST_CASE("unit-box scaling is an exact reformulation") {
  const ControlProblem prob = brockett_problem(4.0);
  const auto [sp, sc] = scale_to_unit_box(prob);
  REQUIRE(sc.active);
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const auto y = random_point(3, rng);
    const auto u = random_point(2, rng, -0.7, 0.7);
    const auto x = sc.to_original_state(y);
    CHECK(sp.X.membership(y) == prob.X.membership(x));
    CHECK(sp.U.membership(u) == prob.U.membership(u));
    const auto fy = sp.eval_dynamics(y, u);
    const auto fx = prob.eval_dynamics(x, u);
    for (int i = 0; i < 3; ++i)
      CHECK(fy[i] == doctest::Approx(fx[i] / sc.state_scale[i]).epsilon(1e-12));
  }

  SUBCASE("polynomials map back exactly") {
    const VariableSet vv({"t", "x1", "x2", "x3"});
    const Polynomial p = random_polynomial(vv, 4, 10, rng);
    const Polynomial q = unscale_state_polynomial(p, sc, prob);
    for (int rep = 0; rep < 20; ++rep) {
      const auto y = random_point(3, rng);
      const auto x = sc.to_original_state(y);
      const double t = 0.3;
      CHECK(q.evaluate({t, x[0], x[1], x[2]}) ==
            doctest::Approx(p.evaluate({t, y[0], y[1], y[2]})).epsilon(1e-9));
    }
  }
}

TEST_CASE("toy value bounds sit below the DP oracle") {
  const ControlProblem prob = scalar_toy();
  const ToyDpOracle oracle(prob);

  for (int order : {2, 3}) {
    const OcpResult r = solve_ocp(prob, 0.0, {0.8}, order);
    CAPTURE(order);
    REQUIRE(r.status == SdpStatus::Optimal);
    CHECK(r.verified);
    CHECK(r.bound <= oracle.value(0.0, 0.8) + 1e-3);
    // The true value is |x0|^3 / 3; order 3 should get close.
    if (order == 3) CHECK(r.bound == doctest::Approx(0.512 / 3.0).epsilon(2e-2));
  }

  SUBCASE("bounds are monotone in the order") {
    const OcpResult r2 = solve_ocp(prob, 0.0, {0.6}, 2);
    const OcpResult r3 = solve_ocp(prob, 0.0, {0.6}, 3);
    REQUIRE(r2.status == SdpStatus::Optimal);
    REQUIRE(r3.status == SdpStatus::Optimal);
    CHECK(r3.bound >= r2.bound - 1e-6);
  }

  SUBCASE("several initial conditions") {
    for (double x0 : {-0.5, 0.2, 0.7}) {
      const OcpResult r = solve_ocp(prob, 0.0, {x0}, 3);
      REQUIRE(r.status == SdpStatus::Optimal);
      CAPTURE(x0);
      CHECK(r.bound <= oracle.value(0.0, x0) + 1e-3);
    }
  }
}

TEST_CASE("zero costs bound the reachability indicator by zero") {
  // With l = 0 and l_T = 0 the value function is the indicator of the
  // region of attraction, so the bound must be <= 0 on feasible states.
  const Polynomial zero = Polynomial::zero(VariableSet({"x", "u"}));
  ControlProblem prob = scalar_toy(&zero);
  for (double x0 : {0.0, 0.3, -0.6}) {
    const OcpResult r = solve_ocp(prob, 0.0, {x0}, 2);
    REQUIRE(r.status == SdpStatus::Optimal);
    CAPTURE(x0);
    CHECK(r.bound <= 1e-7);
  }
}

TEST_CASE("trivial dynamics make all of X reachable") {
  // f = 0 and X_T = X: every initial state admits the constant trajectory,
  // so the certified sublevel set must cover X and w <= 1 on X.
  VariableSet xs({"x"});
  VariableSet us({"u"});
  VariableSet xu({"x", "u"});
  const auto prob = make_control_problem(
      xs, us, {Polynomial::zero(xu)}, Polynomial::zero(xu), Polynomial::zero(xs),
      box_set(xs, {{-1.0, 1.0}}), box_set(us, {{-1.0, 1.0}}), box_set(xs, {{-1.0, 1.0}}),
      Horizon::FixedUnit);

  const RoaResult r = solve_roa(prob, 0.0, 2);
  REQUIRE(r.status == SdpStatus::Optimal);
  CHECK(r.verified);
  for (int i = 0; i <= 40; ++i) {
    const double x = -1.0 + i / 20.0;
    CAPTURE(x);
    CHECK(r.v.evaluate({0.0, x}) <= 1e-6);
    CHECK(r.w.evaluate({x}) <= 1.0 + 1e-6);
  }
  // sup int w over [-1,1] with w <= min(1, v(., 0)) and v(0, .) <= 0 on all
  // of X caps the objective at 0.
  CHECK(r.objective <= 1e-4);
  CHECK(r.objective >= -3.0);
}

TEST_CASE("roa on the scalar toy covers the feasible cone") {
  const ControlProblem prob = scalar_toy();
  const ToyDpOracle oracle(prob);
  const RoaResult r = solve_roa(prob, 0.0, 3);
  REQUIRE(r.status == SdpStatus::Optimal);
  REQUIRE(r.verified);
  // Every DP-feasible (t0 = 0) state must lie in the zero sublevel set.
  for (double x0 = -0.95; x0 <= 0.95; x0 += 0.05) {
    if (!oracle.feasible(0.0, x0)) continue;
    CAPTURE(x0);
    CHECK(r.v.evaluate({0.0, x0}) <= 1e-6);
    CHECK(r.w.evaluate({x0}) <= std::min(1.0, r.v.evaluate({0.0, x0})) + 1e-6);
  }
}

TEST_CASE("ioc admits the trivial solution without normalization") {
  const Polynomial zero = Polynomial::zero(VariableSet({"x", "u"}));
  ControlProblem prob = scalar_toy(&zero);
  const ToyDpOracle oracle(scalar_toy());
  const Trajectory tr = oracle.extract(0.0, 1.0);
  const auto ptraj = fit_polynomial_trajectory(tr, 3);

  IocOptions opts;
  opts.normalize = false;
  const auto basis = monomial_basis(prob.state_vars, 4);
  const IocResult r = solve_ioc(prob, {ptraj}, 2, 0.0, basis, opts);
  REQUIRE(r.status == SdpStatus::Optimal);
  CHECK(r.epsilon <= 1e-5);  // trivial solution up to solver tolerance
  CHECK(r.epsilon >= -1e-9);
}

TEST_CASE("ioc recovers the quadratic cost from two optimal trajectories") {
  // Straight-line trajectories from +/-1 are optimal for l = x^2. The
  // dictionary excludes the constant (constants make every fixed-horizon
  // trajectory equally optimal, and the normalization would then lock onto
  // them regardless of the data).
  const Polynomial zero = Polynomial::zero(VariableSet({"x", "u"}));
  ControlProblem prob = scalar_toy(&zero);
  const ToyDpOracle oracle(scalar_toy());
  std::vector<PolynomialTrajectory> ptrajs;
  for (double x0 : {1.0, -1.0}) {
    const Trajectory tr = oracle.extract(0.0, x0);
    ptrajs.push_back(fit_polynomial_trajectory(tr, 3));
    REQUIRE(ptrajs.back().fit_residual <= 1e-8);
  }

  std::vector<Monomial> basis;
  for (int e = 1; e <= 4; ++e) basis.push_back(Monomial({e}));
  const std::vector<double> reference{0.0, 1.0, 0.0, 0.0};  // x^2 direction

  // The smallest adequate order keeps the optimal face well-conditioned
  // (higher orders only add degenerate directions here).
  double best_dist = 1.0, best_eps = 1.0;
  for (double lambda : {0.05, 0.2, 1.0}) {
    const IocResult r = solve_ioc(prob, ptrajs, 2, lambda, basis);
    CAPTURE(lambda);
    if (r.status != SdpStatus::Optimal) continue;
    CHECK(r.verified);
    CHECK(r.normalization_value == doctest::Approx(1.0).epsilon(1e-6));
    const double dist = normalized_distance(r.l_coeffs, reference);
    if (dist < best_dist) {
      best_dist = dist;
      best_eps = r.epsilon;
    }

    // Certificate semantics: the recovered pair reproduces epsilon within
    // the combined slack on the input trajectory.
    ControlProblem with_l = prob;
    with_l.lagrangian = r.lagrangian;
    const Trajectory tr = oracle.extract(0.0, 1.0);
    const auto rep = suboptimality(r.v, r.epsilon, tr, ptrajs[0], with_l, r.verified);
    CHECK(rep.consistent(1e-5));
  }
  CHECK(best_dist <= 0.1);
  CHECK(best_eps <= 0.1);
}

TEST_CASE("sublevel grids") {
  VariableSet v3({"x1", "x2", "x3"});
  Polynomial v(v3);
  for (const auto& n : v3.names()) {
    const Polynomial z = Polynomial::variable(v3, n);
    v = v + z * z;
  }
  v = v - 1.0;

  GridSpec grid;
  grid.bounds = {{-1, 1}, {-1, 1}, {-1, 1}};
  grid.counts = {11, 11, 11};
  const std::string csv = sublevel_grid_csv(v, 0.0, grid);
  CHECK(csv.substr(0, csv.find('\n')) == "x1,x2,x3,v");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11 * 11 * 11 + 1);
  // Spot values: center is -1, corner is +2.
  CHECK(csv.find("0,0,0,-1\n") != std::string::npos);
  CHECK(csv.find("1,1,1,2\n") != std::string::npos);

  SUBCASE("constant candidate") {
    const Polynomial c = Polynomial::constant(v3, -1.0) ;
    GridSpec g2;
    g2.bounds = {{-1, 1}, {-1, 1}, {-1, 1}};
    g2.counts = {3, 3, 3};
    const std::string s2 = sublevel_grid_csv(c, 0.0, g2);
    CHECK(std::count(s2.begin(), s2.end(), '\n') == 28);
    std::size_t rows_ending_minus1 = 0, pos = 0;
    while ((pos = s2.find(",-1\n", pos)) != std::string::npos) {
      ++rows_ending_minus1;
      pos += 4;
    }
    CHECK(rows_ending_minus1 == 27);
  }
}

TEST_CASE("coefficient utilities") {
  VariableSet xs({"x"});
  const Polynomial p = 2.0 * Polynomial::variable(xs, "x") + 1.0;
  std::vector<Monomial> basis{Monomial({0}), Monomial({1})};
  const auto c = coeffs_on_basis(p, basis);
  CHECK(c == std::vector<double>{1.0, 2.0});
  const Polynomial q = Polynomial::monomial(xs, Monomial({3}));
  CHECK_THROWS_AS((void)coeffs_on_basis(q, basis), std::invalid_argument);

  CHECK(normalized_distance({0, 2, 0}, {0, 1, 0}) == doctest::Approx(0.0));
  CHECK(normalized_distance({1, 0}, {0, 1}) == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(normalized_distance({1, 0}, {-1, 0}) == doctest::Approx(1.0));
}
