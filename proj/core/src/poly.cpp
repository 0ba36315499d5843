#include "certbound/poly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace certbound {

VariableSet::VariableSet(std::vector<std::string> names) {
  auto impl = std::make_shared<Impl>();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto [it, fresh] = impl->index.emplace(names[i], i);
    if (!fresh) throw std::invalid_argument("VariableSet: duplicate variable name '" + names[i] + "'");
  }
  impl->names = std::move(names);
  impl_ = std::move(impl);
}

const std::vector<std::string>& VariableSet::names() const {
  static const std::vector<std::string> empty;
  return impl_ ? impl_->names : empty;
}

std::size_t VariableSet::index_of(const std::string& name) const {
  if (impl_) {
    auto it = impl_->index.find(name);
    if (it != impl_->index.end()) return it->second;
  }
  throw std::out_of_range("VariableSet: unknown variable '" + name + "'");
}

bool VariableSet::contains(const std::string& name) const {
  return impl_ && impl_->index.count(name) > 0;
}

bool operator==(const VariableSet& a, const VariableSet& b) {
  if (a.impl_ == b.impl_) return true;
  return a.names() == b.names();
}

int Monomial::degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  // Within a grade, the lexicographically larger exponent vector sorts first.
  return std::lexicographical_compare(b.exponents.begin(), b.exponents.end(),
                                      a.exponents.begin(), a.exponents.end());
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  if (a.exponents.size() != b.exponents.size())
    throw std::invalid_argument("Monomial product: exponent length mismatch");
  Monomial r = a;
  for (std::size_t i = 0; i < r.exponents.size(); ++i) r.exponents[i] += b.exponents[i];
  return r;
}

Polynomial::Polynomial(VariableSet vars, TermMap terms)
    : vars_(std::move(vars)), terms_(std::move(terms)) {
  for (const auto& [m, c] : terms_) {
    if (m.exponents.size() != vars_.size())
      throw std::invalid_argument("Polynomial: monomial length does not match variable set");
    (void)c;
  }
  drop_small_terms();
}

Polynomial Polynomial::constant(const VariableSet& vars, double value) {
  Polynomial p(vars);
  if (std::abs(value) >= kCoeffDropTol) p.terms_.emplace(Monomial::unit(vars.size()), value);
  return p;
}

Polynomial Polynomial::variable(const VariableSet& vars, const std::string& name) {
  Monomial m = Monomial::unit(vars.size());
  m.exponents[vars.index_of(name)] = 1;
  return monomial(vars, std::move(m));
}

Polynomial Polynomial::monomial(const VariableSet& vars, Monomial m, double coeff) {
  if (m.exponents.size() != vars.size())
    throw std::invalid_argument("Polynomial::monomial: exponent length mismatch");
  Polynomial p(vars);
  if (std::abs(coeff) >= kCoeffDropTol) p.terms_.emplace(std::move(m), coeff);
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return 0;
  // Terms are graded-lex sorted, so the last term carries the max degree.
  return terms_.rbegin()->first.degree();
}

double Polynomial::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coeff() const {
  double r = 0.0;
  for (const auto& [m, c] : terms_) r = std::max(r, std::abs(c));
  return r;
}

void Polynomial::drop_small_terms() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) < kCoeffDropTol)
      it = terms_.erase(it);
    else
      ++it;
  }
}

void Polynomial::check_same_vars(const Polynomial& other) const {
  if (vars_ != other.vars_)
    throw std::invalid_argument("Polynomial: variable-set mismatch between operands");
}

Polynomial Polynomial::operator-() const { return -1.0 * (*this); }

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  if (a.vars_.size() == 0 && a.terms_.empty()) return b;
  if (b.vars_.size() == 0 && b.terms_.empty()) return a;
  a.check_same_vars(b);
  Polynomial r = a;
  for (const auto& [m, c] : b.terms_) r.terms_[m] += c;
  r.drop_small_terms();
  return r;
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-1.0 * b); }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_same_vars(b);
  Polynomial r(a.vars_);
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) r.terms_[ma * mb] += ca * cb;
  r.drop_small_terms();
  return r;
}

Polynomial operator*(double s, const Polynomial& p) {
  Polynomial r(p.vars_);
  for (const auto& [m, c] : p.terms_) {
    const double v = s * c;
    if (std::abs(v) >= Polynomial::kCoeffDropTol) r.terms_.emplace(m, v);
  }
  return r;
}

Polynomial operator+(const Polynomial& p, double c) {
  return p + Polynomial::constant(p.vars(), c);
}

Polynomial Polynomial::partial(const std::string& var) const {
  const std::size_t idx = vars_.index_of(var);
  Polynomial r(vars_);
  for (const auto& [m, c] : terms_) {
    const int e = m.exponents[idx];
    if (e == 0) continue;
    Monomial d = m;
    d.exponents[idx] = e - 1;
    r.terms_[std::move(d)] += c * e;
  }
  r.drop_small_terms();
  return r;
}

double Polynomial::evaluate(const std::vector<double>& point) const {
  if (point.size() != vars_.size())
    throw std::invalid_argument("Polynomial::evaluate: point dimension mismatch");
  double total = 0.0;
  for (const auto& [m, c] : terms_) {
    double v = c;
    for (std::size_t i = 0; i < point.size(); ++i) {
      for (int e = 0; e < m.exponents[i]; ++e) v *= point[i];
    }
    total += v;
  }
  return total;
}

Polynomial Polynomial::substitute(const std::map<std::string, Polynomial>& bindings) const {
  if (vars_.size() == 0) return *this;

  // Resolve the common target variable set and per-variable replacements.
  const VariableSet* target = nullptr;
  std::vector<const Polynomial*> repl(vars_.size(), nullptr);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    auto it = bindings.find(vars_.name(i));
    if (it == bindings.end())
      throw std::invalid_argument("Polynomial::substitute: missing binding for '" + vars_.name(i) + "'");
    repl[i] = &it->second;
    if (target == nullptr)
      target = &it->second.vars();
    else if (*target != it->second.vars())
      throw std::invalid_argument("Polynomial::substitute: replacement polynomials use different variable sets");
  }

  // Powers of each replacement, memoized per variable.
  std::vector<std::vector<Polynomial>> powers(vars_.size());
  auto power = [&](std::size_t i, int e) -> const Polynomial& {
    auto& cache = powers[i];
    if (cache.empty()) cache.push_back(Polynomial::constant(*target, 1.0));
    while (static_cast<int>(cache.size()) <= e) cache.push_back(cache.back() * (*repl[i]));
    return cache[e];
  };

  Polynomial out(*target);
  for (const auto& [m, c] : terms_) {
    Polynomial term = Polynomial::constant(*target, c);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (m.exponents[i] > 0) term = term * power(i, m.exponents[i]);
    }
    out = out + term;
  }
  return out;
}

Polynomial Polynomial::embedded_into(const VariableSet& bigger) const {
  std::vector<std::size_t> where(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) where[i] = bigger.index_of(vars_.name(i));
  Polynomial r(bigger);
  Polynomial::TermMap terms;
  for (const auto& [m, c] : terms_) {
    Monomial big = Monomial::unit(bigger.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) big.exponents[where[i]] = m.exponents[i];
    terms.emplace(std::move(big), c);
  }
  return Polynomial(bigger, std::move(terms));
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    const double a = std::abs(c);
    bool printed_coeff = false;
    if (m.is_unit() || a != 1.0) {
      os << a;
      printed_coeff = true;
    }
    for (std::size_t i = 0; i < m.exponents.size(); ++i) {
      if (m.exponents[i] == 0) continue;
      if (printed_coeff) os << "*";
      os << vars_.name(i);
      if (m.exponents[i] > 1) os << "^" << m.exponents[i];
      printed_coeff = true;
    }
  }
  return os.str();
}

std::vector<Monomial> monomial_basis(const VariableSet& vars, int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("monomial_basis: max_degree must be >= 0");
  const std::size_t n = vars.size();
  std::vector<Monomial> out;
  out.reserve(basis_size(n, max_degree));
  Monomial cur = Monomial::unit(n);
  // Enumerate recursively in variable order, then grlex-sort.
  std::vector<int> exps(n, 0);
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos == n) {
      out.emplace_back(std::vector<int>(exps));
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[pos] = e;
      self(self, pos + 1, remaining - e);
    }
    exps[pos] = 0;
  };
  if (n == 0) {
    out.push_back(Monomial());
  } else {
    rec(rec, 0, max_degree);
  }
  std::sort(out.begin(), out.end(), [](const Monomial& a, const Monomial& b) {
    return GrlexLess{}(a, b);
  });
  return out;
}

std::size_t basis_size(std::size_t n_vars, int max_degree) {
  // C(n + d, d) with overflow guard.
  std::size_t r = 1;
  for (int i = 1; i <= max_degree; ++i) {
    r = r * (n_vars + i);
    if (r > (std::size_t{1} << 40)) throw std::overflow_error("basis_size: basis too large");
    r /= i;
  }
  return r;
}

}  // namespace certbound
