#pragma once

#include <random>

#include "certbound/poly.hpp"

namespace certbound::testsupport {

inline Polynomial random_polynomial(const VariableSet& vars, int max_degree, int n_terms,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_int_distribution<int> deg(0, max_degree);
  Polynomial p(vars);
  for (int t = 0; t < n_terms; ++t) {
    Monomial m = Monomial::unit(vars.size());
    int budget = deg(rng);
    for (std::size_t i = 0; i < vars.size() && budget > 0; ++i) {
      std::uniform_int_distribution<int> e(0, budget);
      const int ei = e(rng);
      m.exponents[i] = ei;
      budget -= ei;
    }
    p = p + Polynomial::monomial(vars, m, coeff(rng));
  }
  return p;
}

inline std::vector<double> random_point(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> z(n);
  for (auto& v : z) v = u(rng);
  return z;
}

}  // namespace certbound::testsupport
