#include "certbound/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace certbound {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

SdpProblem::SdpProblem(std::vector<int> block_dims, int free_dim)
    : block_dims_(std::move(block_dims)), free_dim_(free_dim) {
  for (int d : block_dims_)
    if (d <= 0) throw std::invalid_argument("SdpProblem: block dimensions must be positive");
  if (free_dim_ < 0) throw std::invalid_argument("SdpProblem: negative free dimension");
  block_offsets_.resize(block_dims_.size());
  int off = 0;
  for (std::size_t b = 0; b < block_dims_.size(); ++b) {
    block_offsets_[b] = off;
    off += svec_size(block_dims_[b]);
  }
  free_offset_ = off;
  objective_.assign(total_dim(), 0.0);
}

void SdpProblem::set_objective(std::vector<double> c) {
  if (static_cast<int>(c.size()) != total_dim())
    throw std::invalid_argument("SdpProblem: objective dimension mismatch");
  objective_ = std::move(c);
}

void SdpProblem::set_objective_entry(int col, double value) {
  objective_.at(col) = value;
}

int SdpProblem::add_constraint(std::vector<std::pair<int, double>> entries, double rhs) {
  std::map<int, double> merged;
  for (const auto& [col, v] : entries) {
    if (col < 0 || col >= total_dim())
      throw std::invalid_argument("SdpProblem: constraint column out of range");
    merged[col] += v;
  }
  Constraint c;
  c.rhs = rhs;
  for (const auto& [col, v] : merged)
    if (v != 0.0) c.entries.emplace_back(col, v);
  constraints_.push_back(std::move(c));
  return num_constraints() - 1;
}

void SdpProblem::add_matrix_coeff(int row, int b, int i, int j, double value) {
  if (row < 0 || row >= num_constraints())
    throw std::invalid_argument("SdpProblem: bad constraint row");
  if (i > j) std::swap(i, j);
  const double svec_value = (i == j) ? value : kSqrt2 * value;
  auto& entries = constraints_[row].entries;
  const int col = block_entry_col(b, i, j);
  auto it = std::lower_bound(entries.begin(), entries.end(), col,
                             [](const auto& e, int c) { return e.first < c; });
  if (it != entries.end() && it->first == col)
    it->second += svec_value;
  else
    entries.insert(it, {col, svec_value});
}

Eigen::MatrixXd SdpProblem::block_matrix_of(const std::vector<double>& z, int b) const {
  const int k = block_dims_[b];
  const int off = block_offsets_[b];
  Eigen::MatrixXd M(k, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i <= j; ++i) {
      const double v = z[off + svec_index(i, j)];
      M(i, j) = M(j, i) = (i == j) ? v : v / kSqrt2;
    }
  return M;
}

void SdpProblem::set_block_matrix_in(std::vector<double>& z, int b, const Eigen::MatrixXd& M) const {
  const int k = block_dims_[b];
  const int off = block_offsets_[b];
  for (int j = 0; j < k; ++j)
    for (int i = 0; i <= j; ++i)
      z[off + svec_index(i, j)] = (i == j) ? M(i, j) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::MaxIter: return "max_iter";
    case SdpStatus::NumericalTrouble: return "numerical_trouble";
  }
  return "unknown";
}

namespace {

// Per-block sparse constraint data in matrix-entry form: row-major packed
// lists of (p, q, A_pq) with p <= q, one segment per constraint row.
struct BlockCoeffs {
  std::vector<int> row_start;  // size m + 1
  std::vector<int> ps, qs;
  std::vector<double> vals;  // matrix entries (off-diagonal NOT doubled)
};

struct Workspace {
  int m = 0;
  int n_free = 0;
  int L = 0;
  std::vector<int> dims;
  std::vector<BlockCoeffs> coeffs;      // per block
  Eigen::MatrixXd F;                    // m x n_free
  std::vector<Eigen::MatrixXd> C;       // objective blocks
  Eigen::VectorXd c_free;
  Eigen::VectorXd b;
  std::vector<double> row_scale;        // original row i was divided by row_scale[i]
  double b_norm = 1.0;
  double c_norm = 1.0;
};

double frob_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A.array() * B.array()).sum();
}

// <A_i, M> for the sparse block coefficients of constraint i (M symmetric).
double sparse_inner(const BlockCoeffs& bc, int i, const Eigen::MatrixXd& M) {
  double s = 0.0;
  for (int t = bc.row_start[i]; t < bc.row_start[i + 1]; ++t) {
    const int p = bc.ps[t], q = bc.qs[t];
    s += bc.vals[t] * (p == q ? M(p, p) : 2.0 * M(p, q));
  }
  return s;
}

// M += sum of v * (e_p w_q^T + ...) assembled as W A_i W via outer products of
// columns of W. W symmetric.
void accumulate_waw(const BlockCoeffs& bc, int i, const Eigen::MatrixXd& W, Eigen::MatrixXd& M) {
  for (int t = bc.row_start[i]; t < bc.row_start[i + 1]; ++t) {
    const int p = bc.ps[t], q = bc.qs[t];
    const double v = bc.vals[t];
    if (p == q) {
      M.noalias() += v * (W.col(p) * W.col(p).transpose());
    } else {
      M.noalias() += v * (W.col(p) * W.col(q).transpose());
      M.noalias() += v * (W.col(q) * W.col(p).transpose());
    }
  }
}

// mat(sum_i y_i A_i) for one block.
void accumulate_aty(const BlockCoeffs& bc, const Eigen::VectorXd& y, Eigen::MatrixXd& M) {
  M.setZero();
  const int m = static_cast<int>(bc.row_start.size()) - 1;
  for (int i = 0; i < m; ++i) {
    const double yi = y(i);
    if (yi == 0.0) continue;
    for (int t = bc.row_start[i]; t < bc.row_start[i + 1]; ++t) {
      const int p = bc.ps[t], q = bc.qs[t];
      M(p, q) += yi * bc.vals[t];
      if (p != q) M(q, p) += yi * bc.vals[t];
    }
  }
}

Workspace build_workspace(const SdpProblem& p) {
  Workspace w;
  w.m = p.num_constraints();
  w.n_free = p.free_dim();
  w.L = p.num_blocks();
  w.dims = p.block_dims();
  if (w.L == 0) throw std::invalid_argument("sdp::solve: at least one PSD block is required");

  // Row equilibration to unit infinity norm; dual multipliers are mapped back
  // at the end (y_orig = y_scaled / scale).
  w.row_scale.assign(w.m, 1.0);
  for (int i = 0; i < w.m; ++i) {
    double s = 0.0;
    for (const auto& [col, v] : p.constraints()[i].entries) s = std::max(s, std::abs(v));
    w.row_scale[i] = (s > 0) ? s : 1.0;
  }

  w.coeffs.resize(w.L);
  for (int b = 0; b < w.L; ++b) {
    w.coeffs[b].row_start.assign(w.m + 1, 0);
  }
  w.F = Eigen::MatrixXd::Zero(w.m, w.n_free);
  w.b = Eigen::VectorXd::Zero(w.m);

  const int free_off = p.free_offset();
  // Two passes: count then fill, to keep packed layout.
  std::vector<std::vector<int>> counts(w.L, std::vector<int>(w.m, 0));
  for (int i = 0; i < w.m; ++i) {
    for (const auto& [col, v] : p.constraints()[i].entries) {
      if (col >= free_off) continue;
      int b = 0;
      while (b + 1 < w.L && p.block_offset(b + 1) <= col) ++b;
      counts[b][i]++;
    }
  }
  for (int b = 0; b < w.L; ++b) {
    auto& bc = w.coeffs[b];
    int total = 0;
    for (int i = 0; i < w.m; ++i) {
      bc.row_start[i] = total;
      total += counts[b][i];
    }
    bc.row_start[w.m] = total;
    bc.ps.resize(total);
    bc.qs.resize(total);
    bc.vals.resize(total);
  }
  std::vector<std::vector<int>> fill(w.L, std::vector<int>(w.m, 0));
  for (int i = 0; i < w.m; ++i) {
    const double inv_s = 1.0 / w.row_scale[i];
    w.b(i) = p.constraints()[i].rhs * inv_s;
    for (const auto& [col, v] : p.constraints()[i].entries) {
      const double sv = v * inv_s;
      if (col >= free_off) {
        w.F(i, col - free_off) = sv;
        continue;
      }
      int b = 0;
      while (b + 1 < w.L && p.block_offset(b + 1) <= col) ++b;
      const int local = col - p.block_offset(b);
      // invert svec index: local = j(j+1)/2 + i0
      int j = static_cast<int>((std::sqrt(8.0 * local + 1.0) - 1.0) / 2.0);
      while (SdpProblem::svec_index(0, j + 1) <= local) ++j;
      while (j > 0 && SdpProblem::svec_index(0, j) > local) --j;
      const int i0 = local - SdpProblem::svec_index(0, j);
      auto& bc = w.coeffs[b];
      const int slot = bc.row_start[i] + fill[b][i]++;
      bc.ps[slot] = i0;
      bc.qs[slot] = j;
      bc.vals[slot] = (i0 == j) ? sv : sv / kSqrt2;
    }
  }

  w.C.resize(w.L);
  std::vector<double> cvec = p.objective();
  for (int b = 0; b < w.L; ++b) w.C[b] = p.block_matrix_of(cvec, b);
  w.c_free = Eigen::VectorXd::Zero(w.n_free);
  for (int k = 0; k < w.n_free; ++k) w.c_free(k) = cvec[free_off + k];

  w.b_norm = 1.0 + w.b.lpNorm<Eigen::Infinity>();
  double cn = w.n_free > 0 ? w.c_free.lpNorm<Eigen::Infinity>() : 0.0;
  for (int b = 0; b < w.L; ++b) cn = std::max(cn, w.C[b].lpNorm<Eigen::Infinity>());
  w.c_norm = 1.0 + cn;
  return w;
}

struct Point {
  std::vector<Eigen::MatrixXd> X, Z;
  Eigen::VectorXd y, x_free;
};

double trace_inner(const std::vector<Eigen::MatrixXd>& A, const std::vector<Eigen::MatrixXd>& B) {
  double s = 0.0;
  for (std::size_t b = 0; b < A.size(); ++b) s += frob_inner(A[b], B[b]);
  return s;
}

// Largest alpha in (0, 1] with X + alpha * dX psd, given the Cholesky factor
// of X; returns the unclamped boundary step.
double max_step(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& dX) {
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd S = L.triangularView<Eigen::Lower>().solve(dX);
  S = L.triangularView<Eigen::Lower>().solve(S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0) return 1e30;
  return -1.0 / lmin;
}

struct Residuals {
  Eigen::VectorXd r_p;                 // b - A x (scaled rows)
  std::vector<Eigen::MatrixXd> R_d;    // C - mat(A^T y) - Z
  Eigen::VectorXd r_d_free;            // c_free - F^T y
  double primal_feas = 0.0;            // original-row-scale relative measure
  double dual_feas = 0.0;
  double pobj = 0.0, dobj = 0.0, gap = 0.0;
};

Residuals compute_residuals(const Workspace& w, const Point& pt) {
  Residuals r;
  r.r_p = w.b;
  for (int i = 0; i < w.m; ++i) {
    double ax = 0.0;
    for (int b = 0; b < w.L; ++b) ax += sparse_inner(w.coeffs[b], i, pt.X[b]);
    r.r_p(i) -= ax;
  }
  if (w.n_free > 0) r.r_p -= w.F * pt.x_free;

  r.R_d.resize(w.L);
  double dmax = 0.0;
  for (int b = 0; b < w.L; ++b) {
    Eigen::MatrixXd Aty(w.dims[b], w.dims[b]);
    accumulate_aty(w.coeffs[b], pt.y, Aty);
    r.R_d[b] = w.C[b] - Aty - pt.Z[b];
    dmax = std::max(dmax, r.R_d[b].lpNorm<Eigen::Infinity>());
  }
  r.r_d_free = w.c_free;
  if (w.n_free > 0) {
    r.r_d_free -= w.F.transpose() * pt.y;
    dmax = std::max(dmax, r.r_d_free.lpNorm<Eigen::Infinity>());
  }

  double pmax = 0.0;
  for (int i = 0; i < w.m; ++i) pmax = std::max(pmax, std::abs(r.r_p(i)) * w.row_scale[i]);
  double borig = 1.0;
  for (int i = 0; i < w.m; ++i) borig = std::max(borig, std::abs(w.b(i)) * w.row_scale[i]);
  r.primal_feas = pmax / borig;
  r.dual_feas = dmax / w.c_norm;

  r.pobj = 0.0;
  for (int b = 0; b < w.L; ++b) r.pobj += frob_inner(w.C[b], pt.X[b]);
  if (w.n_free > 0) r.pobj += w.c_free.dot(pt.x_free);
  r.dobj = w.b.dot(pt.y);
  r.gap = std::abs(r.pobj - r.dobj) / (1.0 + std::abs(r.pobj) + std::abs(r.dobj));
  return r;
}

}  // namespace

SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts) {
  Workspace w = build_workspace(prob);
  const int m = w.m;
  const int nf = w.n_free;

  SdpSolution sol;

  // Deterministic identity initialization scaled to the data.
  double a_scale = 1.0;
  for (int b = 0; b < w.L; ++b)
    for (double v : w.coeffs[b].vals) a_scale = std::max(a_scale, std::abs(v));
  double xi_p = std::max(1.0, w.b_norm / a_scale);
  double xi_d = std::max(1.0, w.c_norm);

  Point pt;
  pt.X.resize(w.L);
  pt.Z.resize(w.L);
  for (int b = 0; b < w.L; ++b) {
    pt.X[b] = xi_p * Eigen::MatrixXd::Identity(w.dims[b], w.dims[b]);
    pt.Z[b] = xi_d * Eigen::MatrixXd::Identity(w.dims[b], w.dims[b]);
  }
  pt.y = Eigen::VectorXd::Zero(m);
  pt.x_free = Eigen::VectorXd::Zero(nf);

  int k_total = 0;
  for (int d : w.dims) k_total += d;

  Eigen::MatrixXd S(m, m);
  std::vector<Eigen::MatrixXd> R(w.L), Rinv(w.L), W(w.L), Corr(w.L), dZ(w.L), dX(w.L),
      dZaff(w.L), dXaff(w.L), RC(w.L);
  std::vector<Eigen::VectorXd> lambda(w.L);

  auto record = [&](int it, const Residuals& r, double mu, double ap, double ad) {
    SdpIterate li;
    li.iter = it;
    li.mu = mu;
    li.primal_obj = r.pobj;
    li.dual_obj = r.dobj;
    li.primal_feas = r.primal_feas;
    li.dual_feas = r.dual_feas;
    li.step_primal = ap;
    li.step_dual = ad;
    sol.trace.push_back(li);
  };

  auto finish = [&](SdpStatus status, const Residuals& r, const char* reason = "") {
    sol.status = status;
    if (sol.stop_reason.empty()) sol.stop_reason = reason;
    sol.primal.assign(prob.total_dim(), 0.0);
    for (int b = 0; b < w.L; ++b) prob.set_block_matrix_in(sol.primal, b, pt.X[b]);
    for (int k = 0; k < nf; ++k) sol.primal[prob.free_offset() + k] = pt.x_free(k);
    sol.dual.assign(m, 0.0);
    for (int i = 0; i < m; ++i) sol.dual[i] = pt.y(i) / w.row_scale[i];
    sol.dual_slack.assign(prob.free_offset(), 0.0);
    for (int b = 0; b < w.L; ++b) prob.set_block_matrix_in(sol.dual_slack, b, pt.Z[b]);
    sol.objective_value = r.pobj;
    sol.dual_objective_value = r.dobj;
    sol.residuals.primal_feas = r.primal_feas;
    sol.residuals.dual_feas = r.dual_feas;
    sol.residuals.gap = r.gap;
    sol.iterations = static_cast<int>(sol.trace.size());
    return sol;
  };

  Residuals res = compute_residuals(w, pt);
  double mu = trace_inner(pt.X, pt.Z) / k_total;
  record(0, res, mu, 0.0, 0.0);

  // Track the best iterate so late-stage instability on degenerate problems
  // cannot overwrite an already-good point. Feasibility dominates the score
  // (certificates are extracted from the primal point); once both residuals
  // sit at the floor, later iterates with a better objective win.
  auto score_of = [](const Residuals& r) {
    return std::max({r.primal_feas, r.dual_feas, 0.05 * r.gap});
  };
  const double feas_floor = std::max(3.0 * opts.tol, 1e-9);
  Point best_pt = pt;
  Residuals best_res = res;
  double best_worst = score_of(res);
  auto consider_best = [&] {
    const double worst = score_of(res);
    const double feas = std::max(res.primal_feas, res.dual_feas);
    const double best_feas = std::max(best_res.primal_feas, best_res.dual_feas);
    const bool both_floored = feas <= feas_floor && best_feas <= feas_floor;
    if ((both_floored && res.pobj < best_res.pobj) || (!both_floored && worst < best_worst)) {
      best_worst = std::min(best_worst, worst);
      best_pt = pt;
      best_res = res;
    }
    return worst;
  };

  auto finish_best = [&](SdpStatus status, const char* reason = "") {
    pt = best_pt;
    return finish(status, best_res, reason);
  };

  const double huge_ray = 1e9;
  int consecutive_tiny_steps = 0;

  for (int it = 1; it <= opts.max_iter; ++it) {
    if (res.primal_feas <= opts.tol && res.dual_feas <= opts.tol && res.gap <= opts.tol)
      return finish(SdpStatus::Optimal, res, "converged");

    // Divergence heuristics (documented caveat: these are approximate
    // Farkas-ray detectors, not exact infeasibility certificates). Only
    // meaningful when no near-feasible, near-optimal iterate was ever seen.
    if (best_worst > 1e-3) {
      double ynorm = pt.y.size() ? pt.y.lpNorm<Eigen::Infinity>() : 0.0;
      double znorm = 0.0, xnorm = pt.x_free.size() ? pt.x_free.lpNorm<Eigen::Infinity>() : 0.0;
      for (int b = 0; b < w.L; ++b) {
        znorm = std::max(znorm, pt.Z[b].lpNorm<Eigen::Infinity>());
        xnorm = std::max(xnorm, pt.X[b].lpNorm<Eigen::Infinity>());
      }
      const double dual_size = std::max(ynorm, znorm);
      if (dual_size > huge_ray * w.c_norm && res.dobj > 1e-8 * dual_size)
        return finish(SdpStatus::Infeasible, res, "dual ray divergence");
      if (xnorm > huge_ray * w.b_norm && res.pobj < -1e-8 * xnorm)
        return finish(SdpStatus::Unbounded, res, "primal ray divergence");
    } else {
      // Near-converged once: a large later excursion is numerical noise, not
      // a certificate of anything. Hand back the best point.
      const double worst_now = std::max({res.primal_feas, res.dual_feas, res.gap});
      if (worst_now > std::max(1e4 * best_worst, 1e-2))
        return finish_best(SdpStatus::NumericalTrouble, "post-convergence excursion");
    }

    // NT scaling per block: W Z W = X, with R R^T = W and
    // R^{-1} X R^{-T} = R^T Z R = diag(lambda).
    bool chol_ok = true;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> lltX(w.L), lltZ(w.L);
    for (int b = 0; b < w.L && chol_ok; ++b) {
      lltX[b].compute(pt.X[b]);
      lltZ[b].compute(pt.Z[b]);
      if (lltX[b].info() != Eigen::Success || lltZ[b].info() != Eigen::Success) chol_ok = false;
    }
    if (!chol_ok) return finish_best(SdpStatus::NumericalTrouble, "iterate left the cone");

    for (int b = 0; b < w.L; ++b) {
      const Eigen::MatrixXd Lx = lltX[b].matrixL();
      const Eigen::MatrixXd Lz = lltZ[b].matrixL();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Lx,
                                            Eigen::ComputeThinU | Eigen::ComputeThinV);
      lambda[b] = svd.singularValues();
      Eigen::VectorXd is = lambda[b].array().sqrt().inverse().matrix();
      R[b] = Lx * svd.matrixV() * is.asDiagonal();
      Rinv[b] = is.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
      W[b] = R[b] * R[b].transpose();
    }

    // Schur complement S_ij = sum_b <A_i, W A_j W>.
    S.setZero();
    for (int j = 0; j < m; ++j) {
      for (int b = 0; b < w.L; ++b) {
        const auto& bc = w.coeffs[b];
        if (bc.row_start[j] == bc.row_start[j + 1]) continue;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(w.dims[b], w.dims[b]);
        accumulate_waw(bc, j, W[b], M);
        for (int i = 0; i <= j; ++i) {
          if (bc.row_start[i] == bc.row_start[i + 1]) continue;
          S(i, j) += sparse_inner(bc, i, M);
        }
      }
    }
    S = S.selfadjointView<Eigen::Upper>();

    Eigen::LLT<Eigen::MatrixXd> lltS;
    {
      double reg = 0.0;
      const double base = std::max(1e-300, S.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd Sreg = S;
        if (reg > 0) Sreg.diagonal().array() += reg;
        lltS.compute(Sreg);
        if (lltS.info() == Eigen::Success) break;
        reg = (reg == 0.0) ? base * 1e-14 : reg * 1e4;
      }
      if (lltS.info() != Eigen::Success)
        return finish_best(SdpStatus::NumericalTrouble, "schur factorization failed");
    }

    Eigen::MatrixXd SiF;
    Eigen::LLT<Eigen::MatrixXd> lltM;
    if (nf > 0) {
      SiF = lltS.solve(w.F);
      Eigen::MatrixXd M = w.F.transpose() * SiF;
      double reg = 0.0;
      const double base = std::max(1e-300, M.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd Mreg = M;
        if (reg > 0) Mreg.diagonal().array() += reg;
        lltM.compute(Mreg);
        if (lltM.info() == Eigen::Success) break;
        reg = (reg == 0.0) ? base * 1e-14 : reg * 1e4;
      }
      if (lltM.info() != Eigen::Success)
        return finish_best(SdpStatus::NumericalTrouble, "free-block factorization failed");
    }

    // Solve the reduced KKT system [S F; F^T 0] [dy; dxf] = [r1; r2] with
    // iterative refinement against the factored S and M = F^T S^{-1} F.
    auto solve_kkt = [&](const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                         Eigen::VectorXd& dy, Eigen::VectorXd& dxf) {
      if (nf > 0) {
        const Eigen::VectorXd t = lltS.solve(r1);
        dxf = lltM.solve(w.F.transpose() * t - r2);
        dy = lltS.solve(r1 - w.F * dxf);
        for (int pass = 0; pass < 2; ++pass) {
          const Eigen::VectorXd e1 = r1 - S.selfadjointView<Eigen::Upper>() * dy - w.F * dxf;
          const Eigen::VectorXd e2 = r2 - w.F.transpose() * dy;
          const Eigen::VectorXd t2 = lltS.solve(e1);
          const Eigen::VectorXd cxf = lltM.solve(w.F.transpose() * t2 - e2);
          dxf += cxf;
          dy += lltS.solve(e1 - w.F * cxf);
        }
      } else {
        dxf.resize(0);
        dy = lltS.solve(r1);
        for (int pass = 0; pass < 2; ++pass)
          dy += lltS.solve(r1 - S.selfadjointView<Eigen::Upper>() * dy);
      }
    };

    // One Newton solve for a given scaled complementarity target RC.
    auto newton = [&](const std::vector<Eigen::MatrixXd>& rc, Eigen::VectorXd& dy,
                      Eigen::VectorXd& dxf, std::vector<Eigen::MatrixXd>& dZo,
                      std::vector<Eigen::MatrixXd>& dXo) {
      Eigen::VectorXd rhs1 = res.r_p;
      for (int b = 0; b < w.L; ++b) {
        // Corr_b = R (G o RC) R^T with G_ij = 2 / (lambda_i + lambda_j).
        Eigen::MatrixXd G = rc[b];
        for (int i2 = 0; i2 < w.dims[b]; ++i2)
          for (int j2 = 0; j2 < w.dims[b]; ++j2)
            G(i2, j2) *= 2.0 / (lambda[b](i2) + lambda[b](j2));
        Corr[b] = R[b] * G * R[b].transpose();
        const Eigen::MatrixXd WRW = W[b] * res.R_d[b] * W[b];
        const Eigen::MatrixXd adj = WRW - Corr[b];
        for (int i2 = 0; i2 < m; ++i2) {
          if (w.coeffs[b].row_start[i2] == w.coeffs[b].row_start[i2 + 1]) continue;
          rhs1(i2) += sparse_inner(w.coeffs[b], i2, adj);
        }
      }
      solve_kkt(rhs1, res.r_d_free, dy, dxf);
      for (int b = 0; b < w.L; ++b) {
        Eigen::MatrixXd Atdy(w.dims[b], w.dims[b]);
        accumulate_aty(w.coeffs[b], dy, Atdy);
        dZo[b] = res.R_d[b] - Atdy;
        dXo[b] = Corr[b] - W[b] * dZo[b] * W[b];
        dXo[b] = 0.5 * (dXo[b] + dXo[b].transpose()).eval();
      }
    };

    // Predictor: target 0, i.e. RC = -Lambda^2.
    for (int b = 0; b < w.L; ++b) {
      RC[b] = Eigen::MatrixXd::Zero(w.dims[b], w.dims[b]);
      RC[b].diagonal() = -lambda[b].array().square();
    }
    Eigen::VectorXd dy_aff, dxf_aff;
    newton(RC, dy_aff, dxf_aff, dZaff, dXaff);

    double ap_aff = 1e30, ad_aff = 1e30;
    for (int b = 0; b < w.L; ++b) {
      ap_aff = std::min(ap_aff, max_step(lltX[b], dXaff[b]));
      ad_aff = std::min(ad_aff, max_step(lltZ[b], dZaff[b]));
    }
    ap_aff = std::min(1.0, 0.99 * ap_aff);
    ad_aff = std::min(1.0, 0.99 * ad_aff);

    double mu_aff = 0.0;
    for (int b = 0; b < w.L; ++b)
      mu_aff += frob_inner(pt.X[b] + ap_aff * dXaff[b], pt.Z[b] + ad_aff * dZaff[b]);
    mu_aff /= k_total;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(1.0, std::max(1e-8, sigma));

    // Corrector: RC = sigma mu I - Lambda^2 - H(dXaff~ dZaff~).
    for (int b = 0; b < w.L; ++b) {
      const Eigen::MatrixXd dXs = Rinv[b] * dXaff[b] * Rinv[b].transpose();
      const Eigen::MatrixXd dZs = R[b].transpose() * dZaff[b] * R[b];
      const Eigen::MatrixXd P = dXs * dZs;
      RC[b] = -0.5 * (P + P.transpose());
      RC[b].diagonal() -= lambda[b].array().square().matrix();
      RC[b].diagonal().array() += sigma * mu;
    }
    Eigen::VectorXd dy, dxf;
    newton(RC, dy, dxf, dZ, dX);

    double ap = 1e30, ad = 1e30;
    for (int b = 0; b < w.L; ++b) {
      ap = std::min(ap, max_step(lltX[b], dX[b]));
      ad = std::min(ad, max_step(lltZ[b], dZ[b]));
    }
    // Fraction to the boundary, pushed toward 1 when nearly full steps fit.
    const double gamma = std::min(0.999, 0.90 + 0.099 * std::min(1.0, std::min(ap, ad)));
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);

    // Step-quality safeguard: directions from an ill-conditioned late-stage
    // Schur system can wreck feasibility; halve the step until it does not,
    // and fall back to a pure centering direction before giving up.
    const double feas_old = std::max(res.primal_feas, res.dual_feas);
    const Point saved = pt;
    auto try_step = [&](const Eigen::VectorXd& dyv, const Eigen::VectorXd& dxfv,
                        const std::vector<Eigen::MatrixXd>& dXv,
                        const std::vector<Eigen::MatrixXd>& dZv, double a_p, double a_d) {
      for (int attempt = 0; attempt < 7; ++attempt) {
        pt = saved;
        for (int b = 0; b < w.L; ++b) {
          pt.X[b] += a_p * dXv[b];
          pt.Z[b] += a_d * dZv[b];
        }
        pt.y += a_d * dyv;
        if (nf > 0) pt.x_free += a_p * dxfv;
        res = compute_residuals(w, pt);
        // Harmless drift near the floor is tolerated; catastrophic steps are
        // not. The best-iterate filter keeps only floor-level points anyway.
        if (std::max(res.primal_feas, res.dual_feas) <=
            std::max(10.0 * feas_old, 30.0 * opts.tol)) {
          ap = a_p;
          ad = a_d;
          return true;
        }
        a_p *= 0.5;
        a_d *= 0.5;
      }
      return false;
    };
    bool accepted = try_step(dy, dxf, dX, dZ, ap, ad);
    if (!accepted) {
      // Centering target sigma = 1 is much better conditioned.
      for (int b = 0; b < w.L; ++b) {
        RC[b].setZero();
        RC[b].diagonal() = (mu - lambda[b].array().square()).matrix();
      }
      newton(RC, dy, dxf, dZ, dX);
      double cp = 1e30, cd = 1e30;
      for (int b = 0; b < w.L; ++b) {
        cp = std::min(cp, max_step(lltX[b], dX[b]));
        cd = std::min(cd, max_step(lltZ[b], dZ[b]));
      }
      accepted = try_step(dy, dxf, dX, dZ, std::min(1.0, 0.9 * cp), std::min(1.0, 0.9 * cd));
    }
    if (!accepted) {
      pt = saved;
      res = compute_residuals(w, pt);
      return finish_best(SdpStatus::NumericalTrouble, "step rejected");
    }

    mu = trace_inner(pt.X, pt.Z) / k_total;
    record(it, res, mu, ap, ad);
    consider_best();
    if (opts.verbose)
      std::printf("it %3d  mu %9.2e  pobj % .9e  dobj % .9e  pfeas %8.2e  dfeas %8.2e\n", it, mu,
                  res.pobj, res.dobj, res.primal_feas, res.dual_feas);

    if (ap < 1e-7 && ad < 1e-7) {
      if (++consecutive_tiny_steps >= 3) return finish_best(SdpStatus::NumericalTrouble, "steps collapsed");
    } else {
      consecutive_tiny_steps = 0;
    }
  }

  Residuals final_res = compute_residuals(w, pt);
  if (final_res.primal_feas <= opts.tol && final_res.dual_feas <= opts.tol &&
      final_res.gap <= opts.tol)
    return finish(SdpStatus::Optimal, final_res, "converged");
  if (best_res.primal_feas <= opts.tol && best_res.dual_feas <= opts.tol &&
      best_res.gap <= opts.tol)
    return finish_best(SdpStatus::Optimal);

  // Classify divergence at the iteration cap.
  if (best_worst > 1e-3) {
    double ynorm = pt.y.size() ? pt.y.lpNorm<Eigen::Infinity>() : 0.0;
    double xnorm = 0.0;
    for (int b = 0; b < w.L; ++b) xnorm = std::max(xnorm, pt.X[b].lpNorm<Eigen::Infinity>());
    if (ynorm > 1e6 * w.c_norm && final_res.dobj > 1e-6 * ynorm)
      return finish(SdpStatus::Infeasible, final_res);
    if (xnorm > 1e6 * w.b_norm && final_res.pobj < -1e-6 * xnorm)
      return finish(SdpStatus::Unbounded, final_res);
  }
  return finish_best(SdpStatus::MaxIter);
}

SdpResiduals check_kkt(const SdpProblem& p, const SdpSolution& s) {
  SdpResiduals r;
  const auto& c = p.objective();
  const int m = p.num_constraints();

  double bmax = 1.0, pmax = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto& con = p.constraints()[i];
    double ax = 0.0;
    for (const auto& [col, v] : con.entries) ax += v * s.primal[col];
    pmax = std::max(pmax, std::abs(ax - con.rhs));
    bmax = std::max(bmax, std::abs(con.rhs));
  }
  r.primal_feas = pmax / bmax;

  // Dual slack from scratch: C - mat(A^T y), eigenvalue check per block,
  // exact equality on the free part.
  double cmax = 1.0;
  for (double v : c) cmax = std::max(cmax, std::abs(v));
  std::vector<double> slack(c.begin(), c.end());
  for (int i = 0; i < m; ++i) {
    const double yi = s.dual[i];
    if (yi == 0.0) continue;
    for (const auto& [col, v] : p.constraints()[i].entries) slack[col] -= yi * v;
  }
  double dmax = 0.0;
  for (int b = 0; b < p.num_blocks(); ++b) {
    Eigen::MatrixXd Sb = p.block_matrix_of(slack, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sb, Eigen::EigenvaluesOnly);
    dmax = std::max(dmax, std::max(0.0, -es.eigenvalues().minCoeff()));
  }
  for (int k = 0; k < p.free_dim(); ++k)
    dmax = std::max(dmax, std::abs(slack[p.free_offset() + k]));
  r.dual_feas = dmax / cmax;

  double pobj = 0.0, dobj = 0.0;
  for (int col = 0; col < p.total_dim(); ++col) pobj += c[col] * s.primal[col];
  for (int i = 0; i < m; ++i) dobj += p.constraints()[i].rhs * s.dual[i];
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

std::string dump_sdp_text(const SdpProblem& p) {
  std::ostringstream os;
  os << "SDPTXT v1\n";
  os << "blocks " << p.num_blocks();
  for (int b = 0; b < p.num_blocks(); ++b) os << " " << p.block_dim(b);
  os << "\nfree " << p.free_dim() << "\n";
  char buf[64];
  int obj_nnz = 0;
  for (int col = 0; col < p.total_dim(); ++col)
    if (p.objective()[col] != 0.0) ++obj_nnz;
  os << "objective " << obj_nnz << "\n";
  for (int col = 0; col < p.total_dim(); ++col) {
    if (p.objective()[col] == 0.0) continue;
    std::snprintf(buf, sizeof(buf), "%a", p.objective()[col]);
    os << col << " " << buf << "\n";
  }
  os << "constraints " << p.num_constraints() << "\n";
  for (const auto& con : p.constraints()) {
    std::snprintf(buf, sizeof(buf), "%a", con.rhs);
    os << con.entries.size() << " " << buf << "\n";
    for (const auto& [col, v] : con.entries) {
      std::snprintf(buf, sizeof(buf), "%a", v);
      os << col << " " << buf << "\n";
    }
  }
  return os.str();
}

SdpProblem parse_sdp_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag, ver;
  is >> tag >> ver;
  if (tag != "SDPTXT" || ver != "v1") throw std::invalid_argument("parse_sdp_text: bad header");
  std::string word;
  int L = 0;
  is >> word >> L;
  if (word != "blocks") throw std::invalid_argument("parse_sdp_text: expected 'blocks'");
  std::vector<int> dims(L);
  for (int b = 0; b < L; ++b) is >> dims[b];
  int nf = 0;
  is >> word >> nf;
  if (word != "free") throw std::invalid_argument("parse_sdp_text: expected 'free'");
  SdpProblem p(dims, nf);

  int obj_nnz = 0;
  is >> word >> obj_nnz;
  if (word != "objective") throw std::invalid_argument("parse_sdp_text: expected 'objective'");
  std::vector<double> c(p.total_dim(), 0.0);
  for (int t = 0; t < obj_nnz; ++t) {
    int col;
    std::string val;
    is >> col >> val;
    c.at(col) = std::strtod(val.c_str(), nullptr);
  }
  p.set_objective(std::move(c));

  int m = 0;
  is >> word >> m;
  if (word != "constraints") throw std::invalid_argument("parse_sdp_text: expected 'constraints'");
  for (int i = 0; i < m; ++i) {
    int nnz;
    std::string rhs_s;
    is >> nnz >> rhs_s;
    std::vector<std::pair<int, double>> entries;
    for (int t = 0; t < nnz; ++t) {
      int col;
      std::string val;
      is >> col >> val;
      entries.emplace_back(col, std::strtod(val.c_str(), nullptr));
    }
    p.add_constraint(std::move(entries), std::strtod(rhs_s.c_str(), nullptr));
  }
  if (!is) throw std::invalid_argument("parse_sdp_text: truncated input");
  return p;
}

}  // namespace certbound
