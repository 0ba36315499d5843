#include "certbound/model.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "support/random_poly.hpp"

using namespace certbound;
using testsupport::random_point;

namespace {

// Forward-Euler rollout at a fine step, used as the integration oracle.
Trajectory euler_rollout(const ControlProblem& prob, const std::vector<double>& x0,
                         const std::vector<std::vector<double>>& controls_at, double t0, double t1,
                         int n_samples, int substeps) {
  Trajectory tr;
  tr.t0 = t0;
  std::vector<double> x = x0;
  const double dt = (t1 - t0) / (n_samples - 1);
  for (int k = 0; k < n_samples; ++k) {
    tr.times.push_back(t0 + k * dt);
    tr.states.push_back(x);
    tr.controls.push_back(controls_at[k]);
    if (k + 1 < n_samples) {
      const double h = dt / substeps;
      for (int s = 0; s < substeps; ++s) {
        const auto f = prob.eval_dynamics(x, controls_at[k]);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += h * f[i];
      }
    }
  }
  return tr;
}

ControlProblem scalar_toy() {
  VariableSet xs({"x"});
  VariableSet us({"u"});
  VariableSet xu({"x", "u"});
  const Polynomial u = Polynomial::variable(xu, "u");
  const Polynomial x = Polynomial::variable(xu, "x");
  return make_control_problem(xs, us, {u}, x * x, Polynomial::zero(xs),
                              box_set(xs, {{-1.0, 1.0}}), box_set(us, {{-1.0, 1.0}}),
                              point_set(xs, {0.0}), Horizon::FixedUnit);
}

}  // namespace

TEST_CASE("box set membership") {
  VariableSet v3({"x1", "x2", "x3"});
  const auto X = box_set(v3, {{-1, 1}, {-1, 1}, {-1, 1}});
  REQUIRE(X.inequalities().size() == 3);
  CHECK(X.membership({0, 0, 0}));
  CHECK_FALSE(X.membership({1.5, 0, 0}));
  CHECK(X.violation({1.5, 0, 0}) > 0);
  CHECK_THROWS_AS(box_set(v3, {{1, -1}, {-1, 1}, {-1, 1}}), std::invalid_argument);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto z = random_point(3, rng, -1.4, 1.4);
    const bool direct = std::abs(z[0]) <= 1 && std::abs(z[1]) <= 1 && std::abs(z[2]) <= 1;
    CHECK(X.membership(z, 1e-12) == direct);
  }
}

TEST_CASE("ball set membership") {
  VariableSet v2({"u1", "u2"});
  const auto U = ball_set(v2, 1.0);
  REQUIRE(U.inequalities().size() == 1);
  CHECK(U.membership({0, 0}));
  CHECK_FALSE(U.membership({1, 1}));

  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto z = random_point(2, rng, -1.3, 1.3);
    CHECK(U.membership(z, 1e-12) == (z[0] * z[0] + z[1] * z[1] <= 1.0));
  }
}

TEST_CASE("point set membership") {
  VariableSet v3({"x1", "x2", "x3"});
  const auto XT = point_set(v3, {0, 0, 0});
  CHECK(XT.membership({0, 0, 0}));
  CHECK_FALSE(XT.membership({0.1, 0, 0}, 1e-6));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto z = random_point(3, rng, -0.2, 0.2);
    const double n2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    CHECK(XT.membership(z, 1e-8) == (n2 <= 1e-8));
  }
}

TEST_CASE("check_admissible on the constant trajectory at the origin") {
  // Brockett-style dynamics: f(0, 0) = 0, so the constant trajectory is clean.
  VariableSet xs({"x1", "x2", "x3"});
  VariableSet us({"u1", "u2"});
  VariableSet xu({"x1", "x2", "x3", "u1", "u2"});
  const Polynomial u1 = Polynomial::variable(xu, "u1");
  const Polynomial u2 = Polynomial::variable(xu, "u2");
  const Polynomial x1 = Polynomial::variable(xu, "x1");
  const Polynomial x2 = Polynomial::variable(xu, "x2");
  auto prob = make_control_problem(xs, us, {u1, u2, u1 * x2 - u2 * x1},
                                   Polynomial::constant(xu, 1.0), Polynomial::zero(xs),
                                   box_set(xs, {{-1, 1}, {-1, 1}, {-1, 1}}), ball_set(us, 1.0),
                                   point_set(xs, {0, 0, 0}), Horizon::FixedUnit);

  Trajectory tr;
  tr.t0 = 0;
  for (int k = 0; k <= 10; ++k) {
    tr.times.push_back(k / 10.0);
    tr.states.push_back({0, 0, 0});
    tr.controls.push_back({0, 0});
  }
  const auto rep = check_admissible(tr, prob, 1e-9);
  CHECK(rep.structurally_valid);
  CHECK(rep.max_state_violation == 0.0);
  CHECK(rep.max_control_violation == 0.0);
  CHECK(rep.terminal_violation == 0.0);
  CHECK(rep.max_ode_defect == 0.0);

  SUBCASE("a state leaving X is flagged") {
    tr.states[5] = {1.5, 0, 0};
    const auto bad = check_admissible(tr, prob, 1e-9);
    CHECK(bad.max_state_violation > 0);
  }
}

TEST_CASE("check_admissible accepts integrated and rejects perturbed trajectories") {
  const auto prob = scalar_toy();
  const int n = 101;
  std::vector<std::vector<double>> controls(n, std::vector<double>{-1.0});
  auto tr = euler_rollout(prob, {1.0}, controls, 0.0, 1.0, n, 200);
  const auto rep = check_admissible(tr, prob, 1e-4);
  CHECK(rep.structurally_valid);
  CHECK(rep.max_ode_defect <= 1e-6);
  CHECK(rep.terminal_violation <= 1e-6);

  SUBCASE("straight line with mismatched dynamics has a large defect") {
    // State claims to sit still while the control demands full speed.
    Trajectory still = tr;
    for (auto& s : still.states) s = {0.5};
    const auto bad = check_admissible(still, prob, 1e-4);
    CHECK(bad.max_ode_defect > 1e-3);
  }
  SUBCASE("state offset of 0.1 is flagged") {
    Trajectory shifted = tr;
    shifted.states[50][0] += 0.1;
    const auto bad = check_admissible(shifted, prob, 1e-4);
    CHECK(bad.max_ode_defect > 1e-3);
  }
}

TEST_CASE("polynomial trajectory fitting") {
  VariableSet xs({"x"});

  SUBCASE("exact quadratic is recovered") {
    Trajectory tr;
    tr.t0 = 0;
    for (int k = 0; k <= 20; ++k) {
      const double t = k / 20.0;
      tr.times.push_back(t);
      tr.states.push_back({t * t});
      tr.controls.push_back({0.0});
    }
    const auto fit = fit_polynomial_trajectory(tr, 2);
    CHECK(fit.fit_residual <= 1e-10);
    CHECK(fit.eval_state(0.5)[0] == doctest::Approx(0.25).epsilon(1e-9));
  }

  SUBCASE("constant samples with degree 3 fit exactly") {
    Trajectory tr;
    tr.t0 = 0;
    for (int k = 0; k <= 10; ++k) {
      tr.times.push_back(k / 10.0);
      tr.states.push_back({0.7});
      tr.controls.push_back({0.0});
    }
    const auto fit = fit_polynomial_trajectory(tr, 3);
    CHECK(fit.fit_residual <= 1e-10);
  }

  SUBCASE("noisy line residual equals the max deviation from the LS line") {
    // Closed-form least squares on a two-parameter model as the oracle.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    Trajectory tr;
    tr.t0 = 0;
    const int n = 41;
    std::vector<double> ts, ys;
    for (int k = 0; k < n; ++k) {
      const double t = k / double(n - 1);
      const double y = 2.0 * t - 0.5 + noise(rng);
      tr.times.push_back(t);
      tr.states.push_back({y});
      tr.controls.push_back({0.0});
      ts.push_back(t);
      ys.push_back(y);
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int k = 0; k < n; ++k) {
      st += ts[k];
      sy += ys[k];
      stt += ts[k] * ts[k];
      sty += ts[k] * ys[k];
    }
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    const double inter = (sy - slope * st) / n;
    double expect = 0;
    for (int k = 0; k < n; ++k)
      expect = std::max(expect, std::abs(inter + slope * ts[k] - ys[k]));

    const auto fit = fit_polynomial_trajectory(tr, 1);
    CHECK(fit.fit_residual == doctest::Approx(expect).epsilon(1e-9));
  }

  SUBCASE("duplicated times are rejected") {
    Trajectory tr;
    tr.t0 = 0;
    tr.times = {0.0, 0.5, 0.5, 1.0};
    tr.states = {{0}, {1}, {1}, {2}};
    tr.controls = {{0}, {0}, {0}, {0}};
    CHECK_THROWS_AS(fit_polynomial_trajectory(tr, 2), std::invalid_argument);
  }
}
