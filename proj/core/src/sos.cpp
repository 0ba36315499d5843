#include "certbound/sos.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace certbound {

AffineExpr::AffineExpr(Polynomial constant, std::map<int, Polynomial> linear)
    : constant_(std::move(constant)), linear_(std::move(linear)) {
  for (auto it = linear_.begin(); it != linear_.end();) {
    if (it->second.vars() != constant_.vars())
      throw std::invalid_argument("AffineExpr: coefficient variable-set mismatch");
    if (it->second.is_zero())
      it = linear_.erase(it);
    else
      ++it;
  }
}

AffineExpr AffineExpr::term(int var, Polynomial coeff) {
  AffineExpr e(Polynomial::zero(coeff.vars()));
  if (!coeff.is_zero()) e.linear_.emplace(var, std::move(coeff));
  return e;
}

int AffineExpr::degree() const {
  int d = constant_.degree();
  for (const auto& [v, p] : linear_) d = std::max(d, p.degree());
  return d;
}

void AffineExpr::check_vars(const AffineExpr& other) const {
  if (constant_.vars() != other.constant_.vars())
    throw std::invalid_argument("AffineExpr: variable-set mismatch between operands");
}

AffineExpr operator+(const AffineExpr& a, const AffineExpr& b) {
  a.check_vars(b);
  AffineExpr r = a;
  r.constant_ = r.constant_ + b.constant_;
  for (const auto& [v, p] : b.linear_) {
    auto it = r.linear_.find(v);
    if (it == r.linear_.end()) {
      r.linear_.emplace(v, p);
    } else {
      it->second = it->second + p;
      if (it->second.is_zero()) r.linear_.erase(it);
    }
  }
  return r;
}

AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) { return a + (-1.0 * b); }

AffineExpr operator*(const AffineExpr& a, const Polynomial& p) {
  AffineExpr r(a.constant_ * p);
  for (const auto& [v, q] : a.linear_) {
    Polynomial qp = q * p;
    if (!qp.is_zero()) r.linear_.emplace(v, std::move(qp));
  }
  return r;
}

AffineExpr operator*(double s, const AffineExpr& a) {
  AffineExpr r(s * a.constant_);
  for (const auto& [v, q] : a.linear_) {
    Polynomial sq = s * q;
    if (!sq.is_zero()) r.linear_.emplace(v, std::move(sq));
  }
  return r;
}

AffineExpr AffineExpr::partial(const std::string& var) const {
  AffineExpr r(constant_.partial(var));
  for (const auto& [v, q] : linear_) {
    Polynomial d = q.partial(var);
    if (!d.is_zero()) r.linear_.emplace(v, std::move(d));
  }
  return r;
}

AffineExpr AffineExpr::substitute(const std::map<std::string, Polynomial>& bindings) const {
  AffineExpr r(constant_.substitute(bindings));
  for (const auto& [v, q] : linear_) {
    Polynomial s = q.substitute(bindings);
    if (!s.is_zero()) r.linear_.emplace(v, std::move(s));
  }
  return r;
}

AffineExpr AffineExpr::embedded_into(const VariableSet& bigger) const {
  AffineExpr r(constant_.embedded_into(bigger));
  for (const auto& [v, q] : linear_) r.linear_.emplace(v, q.embedded_into(bigger));
  return r;
}

std::pair<double, std::map<int, double>> AffineExpr::eval_point(
    const std::vector<double>& point) const {
  std::map<int, double> lin;
  for (const auto& [v, q] : linear_) {
    const double val = q.evaluate(point);
    if (val != 0.0) lin[v] = val;
  }
  return {constant_.evaluate(point), std::move(lin)};
}

Polynomial AffineExpr::instantiate(const std::vector<double>& free_values) const {
  Polynomial out = constant_;
  for (const auto& [v, q] : linear_) {
    if (v < 0 || v >= static_cast<int>(free_values.size()))
      throw std::out_of_range("AffineExpr::instantiate: free variable out of range");
    out = out + free_values[v] * q;
  }
  return out;
}

DecisionPolynomial::DecisionPolynomial(VariableSet vars, std::vector<Monomial> basis,
                                       std::vector<int> coeff_vars)
    : vars_(std::move(vars)), basis_(std::move(basis)), coeff_vars_(std::move(coeff_vars)) {
  if (basis_.size() != coeff_vars_.size())
    throw std::invalid_argument("DecisionPolynomial: basis/variable count mismatch");
}

AffineExpr DecisionPolynomial::expr() const {
  std::map<int, Polynomial> lin;
  for (std::size_t k = 0; k < basis_.size(); ++k)
    lin.emplace(coeff_vars_[k], Polynomial::monomial(vars_, basis_[k]));
  return AffineExpr(Polynomial::zero(vars_), std::move(lin));
}

Polynomial DecisionPolynomial::value(const std::vector<double>& free_values) const {
  Polynomial out(vars_);
  for (std::size_t k = 0; k < basis_.size(); ++k)
    out = out + Polynomial::monomial(vars_, basis_[k], free_values.at(coeff_vars_[k]));
  return out;
}

namespace {

/// basis^T Q basis expanded into a polynomial; basis entries are monomials
/// so this is direct term accumulation.
Polynomial expand_gram(const VariableSet& vars, const std::vector<Monomial>& basis,
                       const Eigen::MatrixXd& Q) {
  Polynomial::TermMap terms;
  const int k = static_cast<int>(basis.size());
  for (int j = 0; j < k; ++j)
    for (int i = 0; i <= j; ++i) {
      const double w = (i == j) ? Q(i, i) : Q(i, j) + Q(j, i);
      if (w == 0.0) continue;
      terms[basis[i] * basis[j]] += w;
    }
  return Polynomial(vars, std::move(terms));
}

}  // namespace

Polynomial PutinarCertificate::expansion() const {
  if (blocks.empty()) return Polynomial::zero(set.vars());
  Polynomial total = Polynomial::zero(set.vars());
  for (const auto& blk : blocks) {
    Polynomial p = expand_gram(set.vars(), blk.basis, blk.gram);
    if (blk.multiplies >= 0) p = p * set.inequalities().at(blk.multiplies);
    total = total + p;
  }
  return total;
}

int SdpBuilder::add_free_var(const std::string& name) {
  if (built_) throw std::logic_error("SdpBuilder: already built");
  free_names_.push_back(name.empty() ? "y" + std::to_string(free_names_.size()) : name);
  return num_free_vars() - 1;
}

DecisionPolynomial SdpBuilder::add_decision_polynomial(const VariableSet& vars, int max_degree,
                                                       const std::string& name) {
  return add_decision_polynomial(vars, monomial_basis(vars, max_degree), name);
}

DecisionPolynomial SdpBuilder::add_decision_polynomial(const VariableSet& vars,
                                                       std::vector<Monomial> basis,
                                                       const std::string& name) {
  std::vector<int> idx;
  idx.reserve(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k)
    idx.push_back(add_free_var(name + "[" + std::to_string(k) + "]"));
  return DecisionPolynomial(vars, std::move(basis), std::move(idx));
}

int SdpBuilder::add_block(int dim) {
  block_dims_.push_back(dim);
  return static_cast<int>(block_dims_.size()) - 1;
}

SdpBuilder::PutinarHandle SdpBuilder::putinar_nonneg(const AffineExpr& target,
                                                     const SemialgebraicSet& set, int order,
                                                     const std::string& label) {
  if (built_) throw std::logic_error("SdpBuilder: already built");
  if (target.vars() != set.vars())
    throw std::invalid_argument("putinar_nonneg: target and set use different variable sets");
  if (order < 0) throw std::invalid_argument("putinar_nonneg: negative order");
  const int deg = target.degree();
  if (deg > 2 * order) {
    std::ostringstream os;
    os << "putinar_nonneg: order " << order << " too small: target degree " << deg
       << " exceeds certificate degree cap " << 2 * order;
    throw std::invalid_argument(os.str());
  }

  PutinarInfo info;
  info.set = set;
  info.target = target;
  info.order = order;
  info.label = label;

  struct BlockSpec {
    int block_index;
    std::vector<Monomial> basis;
    int multiplies;
    const Polynomial* g;
  };
  std::vector<BlockSpec> specs;

  Polynomial one = Polynomial::constant(set.vars(), 1.0);
  {
    GramInfo gi;
    gi.basis = monomial_basis(set.vars(), order);
    gi.multiplies = -1;
    gi.block_index = add_block(static_cast<int>(gi.basis.size()));
    specs.push_back({gi.block_index, gi.basis, -1, &one});
    info.grams.push_back(std::move(gi));
  }
  for (std::size_t gidx = 0; gidx < set.inequalities().size(); ++gidx) {
    const Polynomial& g = set.inequalities()[gidx];
    const int dg = g.degree();
    const int di = order - (dg + 1) / 2;
    if (di < 0) {
      log_.push_back("putinar[" + label + "]: multiplier for g" + std::to_string(gidx) +
                     " omitted (degree too high for order)");
      continue;
    }
    GramInfo gi;
    gi.basis = monomial_basis(set.vars(), di);
    gi.multiplies = static_cast<int>(gidx);
    gi.block_index = add_block(static_cast<int>(gi.basis.size()));
    specs.push_back({gi.block_index, gi.basis, static_cast<int>(gidx), &g});
    info.grams.push_back(std::move(gi));
  }

  // One row per monomial of degree <= 2*order; p_0 pairs reach all of them.
  std::map<Monomial, StagedRow, GrlexLess> staged;
  for (const auto& spec : specs) {
    const int k = static_cast<int>(spec.basis.size());
    for (int j = 0; j < k; ++j)
      for (int i = 0; i <= j; ++i) {
        const Monomial prod = spec.basis[i] * spec.basis[j];
        for (const auto& [gm, gc] : spec.g->terms()) {
          staged[prod * gm].gram.push_back({spec.block_index, i, j, gc});
        }
      }
  }
  for (const auto& [v, poly] : target.linear()) {
    for (const auto& [mono, c] : poly.terms()) {
      auto it = staged.find(mono);
      if (it == staged.end())
        throw std::logic_error("putinar_nonneg: target monomial not reachable by Gram pairs");
      it->second.lin[v] -= c;
    }
  }
  for (const auto& [mono, c] : target.constant().terms()) {
    auto it = staged.find(mono);
    if (it == staged.end())
      throw std::logic_error("putinar_nonneg: target monomial not reachable by Gram pairs");
    it->second.rhs = c;
  }

  for (auto& [mono, row] : staged) {
    info.row_monomials.push_back(mono);
    rows_.push_back(std::move(row));
  }

  PutinarHandle h{static_cast<int>(putinar_.size())};
  putinar_.push_back(std::move(info));

  if (!set.has_bounding_box())
    log_.push_back("putinar[" + label +
                   "]: set has no bounding box; norm bound (Archimedean condition) not evident");
  return h;
}

void SdpBuilder::add_scalar_inequality(const std::map<int, double>& lin, double constant) {
  if (built_) throw std::logic_error("SdpBuilder: already built");
  // slack >= 0 with slack - lin . y = constant  <=>  constant + lin . y >= 0.
  StagedRow row;
  const int blk = add_block(1);
  row.gram.push_back({blk, 0, 0, 1.0});
  for (const auto& [v, c] : lin) row.lin[v] = -c;
  row.rhs = constant;
  rows_.push_back(std::move(row));
}

void SdpBuilder::add_linear_equality(const std::map<int, double>& lin, double rhs) {
  if (built_) throw std::logic_error("SdpBuilder: already built");
  StagedRow row;
  row.lin = lin;
  row.rhs = rhs;
  rows_.push_back(std::move(row));
}

void SdpBuilder::set_objective(bool maximize, const std::map<int, double>& lin) {
  maximize_ = maximize;
  objective_ = lin;
}

SdpProblem SdpBuilder::build() {
  if (built_) throw std::logic_error("SdpBuilder: build() may be called once");
  built_ = true;
  if (block_dims_.empty()) {
    // Keep the solver applicable: a vacuous 1x1 block.
    add_block(1);
    log_.push_back("build: added a vacuous 1x1 block (no Gram blocks were staged)");
  }
  SdpProblem prob(block_dims_, num_free_vars());

  constexpr double sqrt2 = 1.4142135623730951;
  for (const auto& row : rows_) {
    std::vector<std::pair<int, double>> entries;
    entries.reserve(row.gram.size() + row.lin.size());
    for (const auto& e : row.gram) {
      const double sv = (e.i == e.j) ? e.coeff : sqrt2 * e.coeff;
      entries.emplace_back(prob.block_entry_col(e.block, e.i, e.j), sv);
    }
    for (const auto& [v, c] : row.lin) entries.emplace_back(prob.free_col(v), c);
    prob.add_constraint(std::move(entries), row.rhs);
  }

  for (const auto& [v, c] : objective_)
    prob.set_objective_entry(prob.free_col(v), maximize_ ? -c : c);

  log_.push_back("build: " + std::to_string(prob.num_blocks()) + " blocks, " +
                 std::to_string(prob.num_constraints()) + " rows, " +
                 std::to_string(num_free_vars()) +
                 " free vars (kept free; eliminated per Newton solve against the "
                 "equality system, no split-difference encoding)");
  return prob;
}

std::vector<double> SdpBuilder::free_values(const SdpSolution& s) const {
  const int nf = num_free_vars();
  std::vector<double> out(nf, 0.0);
  const int off = static_cast<int>(s.primal.size()) - nf;
  for (int k = 0; k < nf; ++k) out[k] = s.primal[off + k];
  return out;
}

double SdpBuilder::free_value(const SdpSolution& s, int var) const {
  return free_values(s).at(var);
}

double SdpBuilder::objective_value(const SdpSolution& s) const {
  return maximize_ ? -s.objective_value : s.objective_value;
}

PutinarCertificate extract_certificate(const SdpBuilder& builder, SdpBuilder::PutinarHandle h,
                                       const SdpProblem& problem, const SdpSolution& solution) {
  // A near-feasible iterate is enough to attempt extraction: the verifier is
  // the authority on validity, not the solver status.
  if (solution.status != SdpStatus::Optimal && solution.residuals.primal_feas > 1e-6)
    throw std::invalid_argument("extract_certificate: solution status is " +
                                to_string(solution.status) +
                                " and the iterate is not near-feasible");
  const auto& info = builder.info(h);

  PutinarCertificate cert;
  cert.set = info.set;
  cert.label = info.label;
  cert.target = info.target.instantiate(builder.free_values(solution));

  double eig_min = std::numeric_limits<double>::infinity();
  for (const auto& gi : info.grams) {
    GramBlock blk;
    blk.basis = gi.basis;
    blk.multiplies = gi.multiplies;
    Eigen::MatrixXd Q = solution.primal_block(problem, gi.block_index);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    eig_min = std::min(eig_min, es.eigenvalues().minCoeff());
    // Nearest-PSD projection by eigenvalue clipping; the projection error
    // shows up in the recomputed identity residual below.
    Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    blk.gram = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    blk.gram = 0.5 * (blk.gram + blk.gram.transpose()).eval();
    cert.blocks.push_back(std::move(blk));
  }
  cert.eig_min = std::isfinite(eig_min) ? eig_min : 0.0;
  cert.identity_residual = (cert.target - cert.expansion()).max_abs_coeff();
  return cert;
}

VerifyOutcome verify_certificate(const PutinarCertificate& cert, double res_tol, double eig_tol) {
  VerifyOutcome out;
  out.scale = std::max(1.0, cert.target.max_abs_coeff());
  out.worst_residual = (cert.target - cert.expansion()).max_abs_coeff();
  double eig = 0.0;
  bool first = true;
  for (const auto& blk : cert.blocks) {
    if (blk.gram.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.gram, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    eig = first ? lmin : std::min(eig, lmin);
    first = false;
  }
  out.worst_eigenvalue = eig;
  out.valid = out.worst_residual <= res_tol * out.scale && eig >= -eig_tol * out.scale;
  return out;
}

double sample_nonnegativity(const Polynomial& p, const SemialgebraicSet& set, int n_samples,
                            std::uint64_t seed) {
  if (!set.has_bounding_box())
    throw std::invalid_argument("sample_nonnegativity: set has no bounding box");
  if (n_samples <= 0) throw std::invalid_argument("sample_nonnegativity: n_samples must be > 0");
  const auto& box = set.bounding_box();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double best = std::numeric_limits<double>::infinity();
  long accepted = 0, trials = 0;
  const long trial_cap = std::max<long>(100000, static_cast<long>(n_samples) * 10000);
  std::vector<double> z(box.size());
  while (accepted < n_samples) {
    if (++trials > trial_cap)
      throw std::runtime_error(
          "sample_nonnegativity: acceptance rate below 1e-4 (set too thin to sample)");
    for (std::size_t i = 0; i < box.size(); ++i)
      z[i] = box[i].first + (box[i].second - box[i].first) * unit(rng);
    if (!set.membership(z)) continue;
    ++accepted;
    best = std::min(best, p.evaluate(z));
  }
  return best;
}

}  // namespace certbound
