#include "hops/gop.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hops/error.hpp"

namespace hops::gop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

void check_shapes(std::size_t rows, std::size_t cols, const Marginals& m) {
  if (m.r.size() != rows || m.c.size() != cols) {
    raise(Errc::DimensionMismatch, "marginals do not match a " + std::to_string(rows) + "x" + std::to_string(cols) +
                                       " problem");
  }
}

/// Feasibility of the support pattern: every massive row and column needs
/// at least one allowed entry.
void check_support(const Matrix& log_kernel, const Marginals& m) {
  const std::size_t rows = log_kernel.rows(), cols = log_kernel.cols();
  for (std::size_t l = 0; l < cols; ++l) {
    if (!m.in_support(l)) continue;
    bool any = false;
    for (std::size_t i = 0; i < rows && !any; ++i) any = log_kernel(i, l) > kNegInf;
    if (!any) raise(Errc::InfeasibleColumn, "column " + std::to_string(l) + " has mass but no admissible entry");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (!(m.r[i] > 0.0)) continue;
    bool any = false;
    for (std::size_t l = 0; l < cols && !any; ++l) any = m.in_support(l) && log_kernel(i, l) > kNegInf;
    if (!any) raise(Errc::InfeasibleRow, "row " + std::to_string(i) + " has mass but no admissible entry");
  }
}

TransportPlan solve_log_domain(const Matrix& log_kernel, const Marginals& m, const SinkhornConfig& cfg) {
  const std::size_t rows = log_kernel.rows(), cols = log_kernel.cols();
  check_support(log_kernel, m);

  std::vector<double> f(rows, 0.0), g(cols, 0.0);
  std::vector<double> log_r(rows), log_c(cols);
  for (std::size_t i = 0; i < rows; ++i) log_r[i] = m.r[i] > 0.0 ? std::log(m.r[i]) : kNegInf;
  for (std::size_t l = 0; l < cols; ++l) {
    log_c[l] = m.in_support(l) ? std::log(m.c[l]) : kNegInf;
    if (!m.in_support(l)) g[l] = kNegInf;
  }

  std::vector<double> scratch(std::max(rows, cols));
  TransportPlan out;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t l = 0; l < cols; ++l) scratch[l] = log_kernel(i, l) + g[l];
      const double lse = log_sum_exp(std::span(scratch).first(cols));
      f[i] = lse == kNegInf ? kNegInf : log_r[i] - lse;
    }
    for (std::size_t l = 0; l < cols; ++l) {
      if (!m.in_support(l)) continue;
      for (std::size_t i = 0; i < rows; ++i) scratch[i] = log_kernel(i, l) + f[i];
      g[l] = log_c[l] - log_sum_exp(std::span(scratch).first(rows));
    }
    out.iterations = it + 1;
    if (cfg.tol > 0.0) {
      // Columns are exact right after the beta update; only rows can lag.
      double res = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < cols; ++l) s += std::exp(f[i] + log_kernel(i, l) + g[l]);
        res += std::abs(s - m.r[i]);
      }
      if (res < cfg.tol) break;
    }
  }

  out.plan = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t l = 0; l < cols; ++l) {
      const double e = f[i] + log_kernel(i, l) + g[l];
      out.plan(i, l) = e == kNegInf || std::isnan(e) ? 0.0 : std::exp(e);
    }
  }
  out.log_alpha = f;
  out.log_beta = g;
  out.alpha.resize(rows);
  out.beta.resize(cols);
  for (std::size_t i = 0; i < rows; ++i) out.alpha[i] = std::exp(f[i]);
  for (std::size_t l = 0; l < cols; ++l) out.beta[l] = std::exp(g[l]);
  const Residuals res = marginal_residuals(out.plan, m);
  out.residual_r = res.row;
  out.residual_c = res.col;
  return out;
}

/// Support is 0 on admissible entries and -inf elsewhere. It is passed
/// separately so kernel underflow is not mistaken for a masked entry.
TransportPlan solve_scaling(const Matrix& kernel, const Matrix& support, const Marginals& m,
                            const SinkhornConfig& cfg) {
  const std::size_t rows = kernel.rows(), cols = kernel.cols();
  check_support(support, m);

  std::vector<double> alpha(rows, 0.0), beta(cols, 0.0);
  for (std::size_t l = 0; l < cols; ++l) beta[l] = m.in_support(l) ? 1.0 : 0.0;

  TransportPlan out;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < rows; ++i) {
      double kb = 0.0;
      for (std::size_t l = 0; l < cols; ++l) kb += kernel(i, l) * beta[l];
      alpha[i] = m.r[i] == 0.0 ? 0.0 : m.r[i] / kb;
      if (!std::isfinite(alpha[i])) raise(Errc::NonFiniteScaling, "alpha[" + std::to_string(i) + "] is not finite");
    }
    for (std::size_t l = 0; l < cols; ++l) {
      if (!m.in_support(l)) continue;
      double ka = 0.0;
      for (std::size_t i = 0; i < rows; ++i) ka += kernel(i, l) * alpha[i];
      beta[l] = m.c[l] / ka;
      if (!std::isfinite(beta[l])) raise(Errc::NonFiniteScaling, "beta[" + std::to_string(l) + "] is not finite");
    }
    out.iterations = it + 1;
    if (cfg.tol > 0.0) {
      double res = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < cols; ++l) s += alpha[i] * kernel(i, l) * beta[l];
        res += std::abs(s - m.r[i]);
      }
      if (res < cfg.tol) break;
    }
  }

  out.plan = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t l = 0; l < cols; ++l) out.plan(i, l) = alpha[i] * kernel(i, l) * beta[l];
  }
  out.alpha = alpha;
  out.beta = beta;
  out.log_alpha.resize(rows);
  out.log_beta.resize(cols);
  for (std::size_t i = 0; i < rows; ++i) out.log_alpha[i] = alpha[i] > 0.0 ? std::log(alpha[i]) : kNegInf;
  for (std::size_t l = 0; l < cols; ++l) out.log_beta[l] = beta[l] > 0.0 ? std::log(beta[l]) : kNegInf;
  const Residuals res = marginal_residuals(out.plan, m);
  out.residual_r = res.row;
  out.residual_c = res.col;
  return out;
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) raise(Errc::ConfigInvalid, "sinkhorn epsilon must be positive");
  if (iterations < 1) raise(Errc::ConfigInvalid, "sinkhorn needs at least one iteration");
  if (!(tol >= 0.0)) raise(Errc::ConfigInvalid, "sinkhorn tol must be non-negative");
}

Marginals batch_marginals(const CandidateMatrix& batch) {
  const std::size_t rows = batch.rows(), cols = batch.num_classes();
  if (rows < 1) raise(Errc::EmptyRow, "batch has no rows");
  Marginals m{std::vector<double>(rows, 1.0 / static_cast<double>(rows)), std::vector<double>(cols, 0.0)};
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t size = batch.row_size(i);
    if (size == 0) raise(Errc::EmptyRow, "candidate row " + std::to_string(i) + " is empty");
    for (std::size_t l = 0; l < cols; ++l) {
      if (batch.contains(i, static_cast<ClassId>(l))) m.c[l] += 1.0 / static_cast<double>(size);
    }
  }
  for (double& v : m.c) v /= static_cast<double>(rows);
  return m;
}

CostMatrix make_cost_matrix(Matrix cost, std::vector<std::uint8_t> allowed) {
  if (allowed.size() != cost.rows() * cost.cols()) raise(Errc::DimensionMismatch, "mask size differs from cost size");
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      if (allowed[i * cost.cols() + j] && !std::isfinite(cost(i, j))) {
        raise(Errc::InvalidParam, "allowed cost entry (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") is not finite");
      }
    }
  }
  return CostMatrix{std::move(cost), std::move(allowed)};
}

CostMatrix cost_matrix(const Matrix& probs, const CandidateMatrix& batch) {
  if (probs.rows() != batch.rows() || probs.cols() != batch.num_classes()) {
    raise(Errc::DimensionMismatch, "probability and candidate shapes differ");
  }
  const std::size_t rows = probs.rows(), cols = probs.cols();
  CostMatrix out{Matrix(rows, cols, 0.0), std::vector<std::uint8_t>(rows * cols, 0)};
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (double p : probs.row(i)) s += p;
    if (std::abs(s - 1.0) > 1e-8) raise(Errc::ProbNotNormalized, "row " + std::to_string(i) + " sums to " + std::to_string(s));
    for (std::size_t j = 0; j < cols; ++j) {
      if (!batch.contains(i, static_cast<ClassId>(j))) continue;
      out.cost(i, j) = 1.0 - probs(i, j);
      out.allowed[i * cols + j] = 1;
    }
  }
  return out;
}

Matrix gibbs_kernel(const CostMatrix& cost, double epsilon) {
  if (!(epsilon > 0.0)) raise(Errc::InvalidParam, "epsilon must be positive");
  Matrix k(cost.rows(), cost.cols(), 0.0);
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t j = 0; j < cost.cols(); ++j) {
      if (cost.is_allowed(i, j)) k(i, j) = std::exp(-cost.cost(i, j) / epsilon);
    }
  }
  return k;
}

TransportPlan sinkhorn(const Matrix& kernel, const Marginals& m, const SinkhornConfig& cfg) {
  cfg.validate();
  check_shapes(kernel.rows(), kernel.cols(), m);
  Matrix log_k(kernel.rows(), kernel.cols());
  for (std::size_t i = 0; i < kernel.rows(); ++i) {
    for (std::size_t l = 0; l < kernel.cols(); ++l) log_k(i, l) = kernel(i, l) > 0.0 ? std::log(kernel(i, l)) : kNegInf;
  }
  if (!cfg.log_domain) return solve_scaling(kernel, log_k, m, cfg);
  return solve_log_domain(log_k, m, cfg);
}

TransportPlan sinkhorn(const CostMatrix& cost, const Marginals& m, const SinkhornConfig& cfg) {
  cfg.validate();
  check_shapes(cost.rows(), cost.cols(), m);
  Matrix log_k(cost.rows(), cost.cols());
  for (std::size_t i = 0; i < cost.rows(); ++i) {
    for (std::size_t l = 0; l < cost.cols(); ++l) {
      log_k(i, l) = cost.is_allowed(i, l) ? -cost.cost(i, l) / cfg.epsilon : kNegInf;
    }
  }
  if (!cfg.log_domain) {
    Matrix support(cost.rows(), cost.cols());
    for (std::size_t i = 0; i < cost.rows(); ++i) {
      for (std::size_t l = 0; l < cost.cols(); ++l) support(i, l) = cost.is_allowed(i, l) ? 0.0 : kNegInf;
    }
    return solve_scaling(gibbs_kernel(cost, cfg.epsilon), support, m, cfg);
  }
  return solve_log_domain(log_k, m, cfg);
}

double entropic_objective(const Matrix& plan, const CostMatrix& cost, double epsilon) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) raise(Errc::DimensionMismatch, "plan and cost shapes differ");
  double transport = 0.0, neg_entropy = 0.0;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      const double p = plan(i, j);
      if (p == 0.0) continue;
      if (!cost.is_allowed(i, j)) {
        raise(Errc::SupportViolation, "plan has mass on masked entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      transport += p * cost.cost(i, j);
      neg_entropy += p * std::log(p);
    }
  }
  return transport + epsilon * neg_entropy;
}

TransportPlan naive_plan(const CandidateMatrix& batch) {
  const Marginals m = batch_marginals(batch);
  const std::size_t rows = batch.rows(), cols = batch.num_classes();
  TransportPlan out;
  out.plan = Matrix(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double mass = 1.0 / (static_cast<double>(rows) * static_cast<double>(batch.row_size(i)));
    for (std::size_t j = 0; j < cols; ++j) {
      if (batch.contains(i, static_cast<ClassId>(j))) out.plan(i, j) = mass;
    }
  }
  const Residuals res = marginal_residuals(out.plan, m);
  out.residual_r = res.row;
  out.residual_c = res.col;
  return out;
}

Residuals marginal_residuals(const Matrix& plan, const Marginals& m) {
  check_shapes(plan.rows(), plan.cols(), m);
  Residuals res;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    double s = 0.0;
    for (double p : plan.row(i)) s += p;
    res.row += std::abs(s - m.r[i]);
  }
  for (std::size_t l = 0; l < plan.cols(); ++l) {
    if (!m.in_support(l)) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i) s += plan(i, l);
    res.col += std::abs(s - m.c[l]);
  }
  return res;
}

std::vector<ClassId> select_global(const Matrix& plan) {
  std::vector<ClassId> out(plan.rows());
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    auto row = plan.row(i);
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      total += row[j];
      if (row[j] > row[best]) best = j;
    }
    if (!(total > 0.0)) raise(Errc::ZeroRowMass, "plan row " + std::to_string(i) + " carries no mass");
    out[i] = static_cast<ClassId>(best);
  }
  return out;
}

}  // namespace hops::gop
