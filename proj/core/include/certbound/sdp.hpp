#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "certbound/poly.hpp"

namespace certbound {

/// Standard-form semidefinite program
///
///   minimize    c . z
///   subject to  A z = b,   PSD blocks of z >= 0,   free part of z free
///
/// where z stacks the scaled upper-triangle vectorizations of the PSD
/// blocks followed by the free scalar variables. Off-diagonal entries are
/// stored scaled by sqrt(2) so Euclidean inner products of vectorized data
/// match Frobenius inner products of the matrices.
class SdpProblem {
 public:
  struct Constraint {
    std::vector<std::pair<int, double>> entries;  // (column, value), column-sorted
    double rhs = 0.0;
  };

  SdpProblem() = default;
  SdpProblem(std::vector<int> block_dims, int free_dim);

  static int svec_size(int dim) { return dim * (dim + 1) / 2; }
  /// Index of entry (i, j), i <= j, inside one block's svec (column-major upper).
  static int svec_index(int i, int j) { return j * (j + 1) / 2 + i; }

  int num_blocks() const { return static_cast<int>(block_dims_.size()); }
  int block_dim(int b) const { return block_dims_[b]; }
  const std::vector<int>& block_dims() const { return block_dims_; }
  int block_offset(int b) const { return block_offsets_[b]; }
  int free_dim() const { return free_dim_; }
  int free_offset() const { return free_offset_; }
  int total_dim() const { return free_offset_ + free_dim_; }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<double>& objective() const { return objective_; }

  /// Column index of block entry (i, j), i <= j.
  int block_entry_col(int b, int i, int j) const { return block_offsets_[b] + svec_index(i, j); }
  int free_col(int k) const { return free_offset_ + k; }

  void set_objective(std::vector<double> c);
  void set_objective_entry(int col, double value);
  /// Add a constraint row; entries need not be sorted, duplicates are summed.
  int add_constraint(std::vector<std::pair<int, double>> entries, double rhs);

  /// Set a symmetric matrix coefficient for constraint row `row`, block `b`:
  /// contributes <M, X_b> with M_ij = M_ji = value for (i, j).
  void add_matrix_coeff(int row, int b, int i, int j, double value);

  /// Symmetric matrix view of a svec slice (for objective or solutions).
  Eigen::MatrixXd block_matrix_of(const std::vector<double>& z, int b) const;
  /// Write a symmetric matrix into a svec slice.
  void set_block_matrix_in(std::vector<double>& z, int b, const Eigen::MatrixXd& M) const;

 private:
  std::vector<int> block_dims_;
  std::vector<int> block_offsets_;
  int free_dim_ = 0;
  int free_offset_ = 0;
  std::vector<double> objective_;
  std::vector<Constraint> constraints_;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIter, NumericalTrouble };

std::string to_string(SdpStatus s);

struct SdpResiduals {
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double gap = 0.0;
  double worst() const { return std::max(primal_feas, std::max(dual_feas, gap)); }
};

/// One line of the solve trace (kept for diagnostics and determinism tests).
struct SdpIterate {
  int iter = 0;
  double mu = 0.0;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double step_primal = 0.0;
  double step_dual = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalTrouble;
  std::vector<double> primal;  // full variable vector (svec blocks, then free)
  std::vector<double> dual;    // one multiplier per constraint row
  std::vector<double> dual_slack;  // svec of the dual slack blocks
  double objective_value = 0.0;
  double dual_objective_value = 0.0;
  SdpResiduals residuals;
  int iterations = 0;
  std::string stop_reason;
  std::vector<SdpIterate> trace;

  Eigen::MatrixXd primal_block(const SdpProblem& p, int b) const {
    return p.block_matrix_of(primal, b);
  }
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double eig_tol = 1e-7;
  bool verbose = false;
};

/// Primal-dual path-following interior-point solve (Nesterov-Todd scaling,
/// Mehrotra predictor-corrector, dense block factorizations). Deterministic:
/// fixed initialization, no randomized pivoting. Infeasible/Unbounded are
/// flagged by approximate Farkas-ray detection, a divergence heuristic
/// rather than an exact certificate.
SdpSolution solve(const SdpProblem& p, const SdpOptions& opts = {});

/// Recompute KKT residuals from scratch, independent of solver internals.
/// Dual feasibility is measured through the eigenvalues of C - A^T y, so it
/// needs only the multipliers, not the solver's slack iterate.
SdpResiduals check_kkt(const SdpProblem& p, const SdpSolution& s);

/// Sparse text dump (block sizes, objective triplets, constraint triplets)
/// using hexfloat values; read/write round-trips bit-exactly.
std::string dump_sdp_text(const SdpProblem& p);
SdpProblem parse_sdp_text(const std::string& text);

}  // namespace certbound
