#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace certbound {

/// Ordered dictionary of variable names. The order is fixed at construction
/// and defines the positions of exponent vectors. Identity is nominal: two
/// sets are equal iff they carry the same names in the same order.
class VariableSet {
 public:
  VariableSet() = default;
  explicit VariableSet(std::vector<std::string> names);

  std::size_t size() const { return impl_ ? impl_->names.size() : 0; }
  const std::vector<std::string>& names() const;
  const std::string& name(std::size_t i) const { return names().at(i); }

  /// Index of a variable by name; throws std::out_of_range if unknown.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  friend bool operator==(const VariableSet& a, const VariableSet& b);
  friend bool operator!=(const VariableSet& a, const VariableSet& b) { return !(a == b); }

 private:
  struct Impl {
    std::vector<std::string> names;
    std::map<std::string, std::size_t> index;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Exponent vector of a power product, one entry per variable of the
/// owning VariableSet.
struct Monomial {
  std::vector<int> exponents;

  Monomial() = default;
  explicit Monomial(std::vector<int> exps) : exponents(std::move(exps)) {}
  static Monomial unit(std::size_t n_vars) { return Monomial(std::vector<int>(n_vars, 0)); }

  int degree() const;
  bool is_unit() const { return degree() == 0; }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.exponents == b.exponents; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }
};

/// Graded-lexicographic comparison: lower total degree first; within a
/// degree, the exponent vector that is lexicographically larger comes first,
/// so that e.g. [1, x1, x2, x1^2, x1*x2, x2^2] is the sorted order.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

Monomial operator*(const Monomial& a, const Monomial& b);

/// Sparse multivariate polynomial with double coefficients over a fixed
/// VariableSet. Immutable in spirit: all operations return new values.
/// Coefficients with |c| < kCoeffDropTol are dropped after every operation.
class Polynomial {
 public:
  static constexpr double kCoeffDropTol = 1e-14;

  using TermMap = std::map<Monomial, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(VariableSet vars) : vars_(std::move(vars)) {}
  Polynomial(VariableSet vars, TermMap terms);

  static Polynomial zero(const VariableSet& vars) { return Polynomial(vars); }
  static Polynomial constant(const VariableSet& vars, double value);
  /// The monomial x_i as a polynomial (by variable name).
  static Polynomial variable(const VariableSet& vars, const std::string& name);
  static Polynomial monomial(const VariableSet& vars, Monomial m, double coeff = 1.0);

  const VariableSet& vars() const { return vars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t term_count() const { return terms_.size(); }

  /// Max total degree over stored terms; 0 for the zero polynomial.
  int degree() const;
  double coeff(const Monomial& m) const;
  /// Max |coefficient|; 0 for the zero polynomial.
  double max_abs_coeff() const;

  Polynomial operator-() const;
  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& p);
  friend Polynomial operator*(const Polynomial& p, double s) { return s * p; }
  friend Polynomial operator+(const Polynomial& p, double c);
  friend Polynomial operator+(double c, const Polynomial& p) { return p + c; }
  friend Polynomial operator-(const Polynomial& p, double c) { return p + (-c); }

  /// Formal partial derivative with respect to a named variable.
  Polynomial partial(const std::string& var) const;

  /// Value at a point given in VariableSet order.
  double evaluate(const std::vector<double>& point) const;

  /// Full composition: every variable must be bound; all replacement
  /// polynomials must share one target VariableSet.
  Polynomial substitute(const std::map<std::string, Polynomial>& bindings) const;

  /// Reinterpret over a superset variable dictionary, matching by name.
  Polynomial embedded_into(const VariableSet& bigger) const;

  /// Human-readable rendering, graded-lex term order.
  std::string to_string() const;

 private:
  VariableSet vars_;
  TermMap terms_;

  void drop_small_terms();
  void check_same_vars(const Polynomial& other) const;
};

/// All monomials of total degree <= max_degree in graded-lex order.
/// Count is C(n + d, d) for n variables.
std::vector<Monomial> monomial_basis(const VariableSet& vars, int max_degree);

/// Binomial coefficient as a double-checked size (throws on overflow).
std::size_t basis_size(std::size_t n_vars, int max_degree);

}  // namespace certbound
