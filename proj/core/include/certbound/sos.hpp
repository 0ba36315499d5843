#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "certbound/model.hpp"
#include "certbound/poly.hpp"
#include "certbound/sdp.hpp"

namespace certbound {

/// Polynomial-valued affine expression in SDP free variables:
///   expr = constant + sum_j coeff_j * y_j
/// where constant and every coeff_j are polynomials over one shared
/// VariableSet and y_j are builder free-variable indices. This is the
/// carrier for unknown polynomial coefficients flowing into constraints.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(Polynomial constant) : constant_(std::move(constant)) {}
  AffineExpr(Polynomial constant, std::map<int, Polynomial> linear);

  static AffineExpr term(int var, Polynomial coeff);

  const Polynomial& constant() const { return constant_; }
  const std::map<int, Polynomial>& linear() const { return linear_; }
  const VariableSet& vars() const { return constant_.vars(); }
  bool has_decision_part() const { return !linear_.empty(); }
  int degree() const;

  friend AffineExpr operator+(const AffineExpr& a, const AffineExpr& b);
  friend AffineExpr operator-(const AffineExpr& a, const AffineExpr& b);
  friend AffineExpr operator*(const AffineExpr& a, const Polynomial& p);
  friend AffineExpr operator*(const Polynomial& p, const AffineExpr& a) { return a * p; }
  friend AffineExpr operator*(double s, const AffineExpr& a);

  AffineExpr partial(const std::string& var) const;
  AffineExpr substitute(const std::map<std::string, Polynomial>& bindings) const;
  AffineExpr embedded_into(const VariableSet& bigger) const;

  /// Scalar affine form at a numeric point: (constant value, linear values).
  std::pair<double, std::map<int, double>> eval_point(const std::vector<double>& point) const;

  /// Plug in solved free-variable values.
  Polynomial instantiate(const std::vector<double>& free_values) const;

 private:
  Polynomial constant_;
  std::map<int, Polynomial> linear_;
  void check_vars(const AffineExpr& other) const;
};

/// Template polynomial whose coefficients are SDP free variables, one per
/// basis monomial.
class DecisionPolynomial {
 public:
  DecisionPolynomial() = default;
  DecisionPolynomial(VariableSet vars, std::vector<Monomial> basis, std::vector<int> coeff_vars);

  const VariableSet& vars() const { return vars_; }
  const std::vector<Monomial>& basis() const { return basis_; }
  const std::vector<int>& coeff_vars() const { return coeff_vars_; }
  std::size_t size() const { return basis_.size(); }

  AffineExpr expr() const;
  Polynomial value(const std::vector<double>& free_values) const;

 private:
  VariableSet vars_;
  std::vector<Monomial> basis_;
  std::vector<int> coeff_vars_;
};

/// One SOS multiplier of a Putinar certificate: the polynomial
/// basis^T gram basis, attached to inequality `multiplies` of the ambient
/// set (-1 for the unconstrained term p_0).
struct GramBlock {
  std::vector<Monomial> basis;
  Eigen::MatrixXd gram;
  int multiplies = -1;
};

/// Verifiable positivity certificate: target = p_0 + sum_i p_i g_i with all
/// Gram matrices PSD. The identity residual is always recomputed by
/// polynomial expansion, never read from a solver.
struct PutinarCertificate {
  SemialgebraicSet set;
  Polynomial target;
  std::vector<GramBlock> blocks;  // p_0 first
  double identity_residual = 0.0;
  double eig_min = 0.0;  // min Gram eigenvalue seen at extraction (pre-clip)
  std::string label;

  /// p_0 + sum_i p_i g_i expanded with polynomial arithmetic.
  Polynomial expansion() const;
};

struct VerifyOutcome {
  bool valid = false;
  double worst_residual = 0.0;
  double worst_eigenvalue = 0.0;  // min eigenvalue over stored blocks
  double scale = 1.0;             // max(1, ||target coeffs||_inf)
};

/// Assembles Putinar-form nonnegativity constraints and auxiliary linear
/// rows into one standard-form SdpProblem. Single-threaded; build() may be
/// called once.
class SdpBuilder {
 public:
  struct PutinarHandle {
    int id = -1;
  };
  struct GramInfo {
    int block_index = -1;
    std::vector<Monomial> basis;
    int multiplies = -1;
  };
  struct PutinarInfo {
    SemialgebraicSet set;
    AffineExpr target;
    int order = 0;
    std::vector<GramInfo> grams;
    std::vector<Monomial> row_monomials;
    std::string label;
  };

  SdpBuilder() = default;

  int add_free_var(const std::string& name = "");
  int num_free_vars() const { return static_cast<int>(free_names_.size()); }

  DecisionPolynomial add_decision_polynomial(const VariableSet& vars, int max_degree,
                                             const std::string& name);
  DecisionPolynomial add_decision_polynomial(const VariableSet& vars, std::vector<Monomial> basis,
                                             const std::string& name);

  /// target >= 0 on the set, reinforced at the given order d: one Gram block
  /// per multiplier with basis degree d - ceil(deg g_i / 2) (d for p_0) and
  /// one coefficient-matching equality per monomial of degree <= 2d.
  PutinarHandle putinar_nonneg(const AffineExpr& target, const SemialgebraicSet& set, int order,
                               const std::string& label = "");

  /// constant + sum lin_j y_j >= 0 as a 1x1 Gram slack.
  void add_scalar_inequality(const std::map<int, double>& lin, double constant);
  /// sum lin_j y_j = rhs.
  void add_linear_equality(const std::map<int, double>& lin, double rhs);

  void set_objective(bool maximize, const std::map<int, double>& lin);

  SdpProblem build();
  bool built() const { return built_; }

  const PutinarInfo& info(PutinarHandle h) const { return putinar_.at(h.id); }
  int num_putinar() const { return static_cast<int>(putinar_.size()); }
  const std::vector<std::string>& log() const { return log_; }

  std::vector<double> free_values(const SdpSolution& s) const;
  double free_value(const SdpSolution& s, int var) const;
  /// Sense-corrected objective (undoes the internal max -> min flip).
  double objective_value(const SdpSolution& s) const;

 private:
  struct StagedEntry {
    int block, i, j;
    double coeff;
  };
  struct StagedRow {
    std::vector<StagedEntry> gram;
    std::map<int, double> lin;
    double rhs = 0.0;
  };

  std::vector<std::string> free_names_;
  std::vector<int> block_dims_;
  std::vector<StagedRow> rows_;
  std::vector<PutinarInfo> putinar_;
  std::map<int, double> objective_;
  bool maximize_ = false;
  bool built_ = false;
  std::vector<std::string> log_;

  int add_block(int dim);
};

/// Pull Gram matrices out of a solution and recompute the certificate
/// residual from scratch. Small negative Gram eigenvalues are clipped to
/// zero before export (nearest-PSD projection); the projection error lands
/// in the recomputed identity residual, and eig_min records the worst
/// pre-clip eigenvalue. Requires an Optimal solve.
PutinarCertificate extract_certificate(const SdpBuilder& builder, SdpBuilder::PutinarHandle h,
                                       const SdpProblem& problem, const SdpSolution& solution);

/// Solver-independent check: residual by expansion, PSD-ness by symmetric
/// eigensolve. Thresholds are scaled by max(1, ||target||_inf).
VerifyOutcome verify_certificate(const PutinarCertificate& cert, double res_tol = 1e-6,
                                 double eig_tol = 1e-6);

/// Rejection-sample the set inside its bounding box and return the minimum
/// observed value of p. Throws if the acceptance rate falls below 1e-4
/// (set too thin to sample, e.g. a point set).
double sample_nonnegativity(const Polynomial& p, const SemialgebraicSet& set, int n_samples,
                            std::uint64_t seed = 0);

}  // namespace certbound
