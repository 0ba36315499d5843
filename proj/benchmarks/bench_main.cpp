#include <benchmark/benchmark.h>

#include <random>

#include "certbound/apps.hpp"
#include "certbound/brockett.hpp"
#include "certbound/hjb.hpp"

namespace {

using namespace certbound;

Polynomial random_poly(const VariableSet& vars, int degree, int terms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  Polynomial p(vars);
  const auto basis = monomial_basis(vars, degree);
  std::uniform_int_distribution<std::size_t> pick(0, basis.size() - 1);
  for (int t = 0; t < terms; ++t) p = p + Polynomial::monomial(vars, basis[pick(rng)], coeff(rng));
  return p;
}

void BM_PolynomialMultiply(benchmark::State& state) {
  std::mt19937_64 rng(1);
  VariableSet v5({"x1", "x2", "x3", "u1", "u2"});
  const Polynomial a = random_poly(v5, 4, 40, rng);
  const Polynomial b = random_poly(v5, 4, 40, rng);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_PolynomialMultiply);

void BM_MonomialBasis(benchmark::State& state) {
  VariableSet v5({"x1", "x2", "x3", "u1", "u2"});
  for (auto _ : state) benchmark::DoNotOptimize(monomial_basis(v5, state.range(0)));
}
BENCHMARK(BM_MonomialBasis)->Arg(4)->Arg(6)->Arg(8);

void BM_PutinarAssembly(benchmark::State& state) {
  const ControlProblem prob = brockett_problem(1.0);
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    SdpBuilder b;
    DecisionPolynomial v =
        b.add_decision_polynomial(value_vars(prob), value_degree_for_order(prob, order), "v");
    lower_bound_constraints(b, v, prob, order);
    benchmark::DoNotOptimize(b.build());
  }
}
BENCHMARK(BM_PutinarAssembly)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_SdpSolveToyBound(benchmark::State& state) {
  VariableSet xs({"x"});
  VariableSet us({"u"});
  VariableSet xu({"x", "u"});
  const Polynomial x = Polynomial::variable(xu, "x");
  const auto prob = make_control_problem(
      xs, us, {Polynomial::variable(xu, "u")}, x * x, Polynomial::zero(xs),
      box_set(xs, {{-1.0, 1.0}}), box_set(us, {{-1.0, 1.0}}), point_set(xs, {0.0}),
      Horizon::FixedUnit);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ocp(prob, 0.0, {0.8}, state.range(0)));
}
BENCHMARK(BM_SdpSolveToyBound)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_MinTimeOracle(benchmark::State& state) {
  OracleConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(oracle_min_time({1.0, 1.0, 1.0}, cfg));
}
BENCHMARK(BM_MinTimeOracle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
