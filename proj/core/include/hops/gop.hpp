#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hops/dataset.hpp"
#include "hops/matrix.hpp"

namespace hops::gop {

/// Uniform source over the B batch instances and the candidate-aware
/// target over classes, c_l = (1/B) * sum_i s_il / |S_i|.
struct Marginals {
  std::vector<double> r;
  std::vector<double> c;

  bool in_support(std::size_t l) const noexcept { return c[l] > 0.0; }
};

/// Finite costs on candidate entries; everything else is masked. Masked
/// entries never enter arithmetic and their stored cost is meaningless.
struct CostMatrix {
  Matrix cost;
  std::vector<std::uint8_t> allowed;  // row-major B x C, 1 = candidate

  std::size_t rows() const noexcept { return cost.rows(); }
  std::size_t cols() const noexcept { return cost.cols(); }
  bool is_allowed(std::size_t i, std::size_t j) const noexcept { return allowed[i * cost.cols() + j] != 0; }
};

struct SinkhornConfig {
  double epsilon = 0.05;
  std::size_t iterations = 50;
  bool log_domain = true;
  /// Stop once both marginal residuals drop below this; 0 disables.
  double tol = 1e-9;

  void validate() const;
};

struct TransportPlan {
  Matrix plan;
  /// Scaling vectors with plan = diag(alpha) K diag(beta). In log-domain
  /// solves these are exp(log_alpha) / exp(log_beta) and may under/overflow;
  /// the log vectors are authoritative.
  std::vector<double> alpha, beta;
  std::vector<double> log_alpha, log_beta;
  std::size_t iterations = 0;
  /// ||P 1 - r||_1 and ||P^T 1 - c||_1 (the latter over the support of c).
  double residual_r = 0.0;
  double residual_c = 0.0;
};

Marginals batch_marginals(const CandidateMatrix& batch);

/// cost = 1 - probs on candidates. Rows of `probs` must sum to 1 (1e-8).
CostMatrix cost_matrix(const Matrix& probs, const CandidateMatrix& batch);

/// Builds a cost matrix from explicit values and a 0/1 allowed mask.
CostMatrix make_cost_matrix(Matrix cost, std::vector<std::uint8_t> allowed);

/// exp(-cost / epsilon) on allowed entries, exactly 0 elsewhere.
Matrix gibbs_kernel(const CostMatrix& cost, double epsilon);

/// Alternating scaling alpha <- r / (K beta), beta <- c / (K^T alpha),
/// starting from beta = 1. Columns with c_l = 0 keep beta_l = 0.
TransportPlan sinkhorn(const Matrix& kernel, const Marginals& m, const SinkhornConfig& cfg);

/// Same iteration, but the log-domain path reads -cost/epsilon directly
/// instead of taking the log of a possibly underflowed kernel.
TransportPlan sinkhorn(const CostMatrix& cost, const Marginals& m, const SinkhornConfig& cfg);

/// <P, cost> - epsilon * H(P) with 0 log 0 = 0.
double entropic_objective(const Matrix& plan, const CostMatrix& cost, double epsilon);

/// P_ij = s_ij / (B |S_i|): feasible for the batch marginals by construction.
TransportPlan naive_plan(const CandidateMatrix& batch);

struct Residuals {
  double row = 0.0;
  double col = 0.0;
};
Residuals marginal_residuals(const Matrix& plan, const Marginals& m);

/// Row-wise argmax of the plan, ties to the lower class index.
std::vector<ClassId> select_global(const Matrix& plan);

}  // namespace hops::gop
