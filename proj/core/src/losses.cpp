#include "hops/losses.hpp"

#include <cmath>
#include <string>

#include "hops/error.hpp"

namespace hops::prompt {

BaselineLoss parse_loss(std::string_view name) {
  for (BaselineLoss l : kAllBaselines) {
    if (to_string(l) == name) return l;
  }
  raise(Errc::UnknownLoss, "unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(BaselineLoss loss) noexcept {
  switch (loss) {
    case BaselineLoss::Rc: return "rc";
    case BaselineLoss::Cc: return "cc";
    case BaselineLoss::Exp: return "exp";
    case BaselineLoss::Gce: return "gce";
    case BaselineLoss::Lwc: return "lwc";
    case BaselineLoss::Mae: return "mae";
    case BaselineLoss::Mse: return "mse";
    case BaselineLoss::Sce: return "sce";
  }
  return "?";
}

ProbLoss candidate_ce(std::span<const double> probs, std::span<const double> weights,
                      std::optional<std::span<const std::uint8_t>> candidate_row) {
  const std::size_t classes = probs.size();
  if (weights.size() != classes) raise(Errc::DimensionMismatch, "weights and probs differ in length");
  double total = 0.0;
  for (std::size_t j = 0; j < classes; ++j) {
    if (weights[j] < 0.0) raise(Errc::WeightViolation, "negative weight");
    if (candidate_row && weights[j] != 0.0 && !(*candidate_row)[j]) {
      raise(Errc::WeightViolation, "weight on non-candidate class " + std::to_string(j));
    }
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-9) raise(Errc::WeightViolation, "weights sum to " + std::to_string(total));

  ProbLoss out{0.0, Matrix(1, classes, 0.0)};
  for (std::size_t j = 0; j < classes; ++j) {
    if (weights[j] == 0.0) continue;
    out.value -= weights[j] * std::log(probs[j]);
    out.dprobs(0, j) = -weights[j] / probs[j];
  }
  return out;
}

ProbLoss hops_loss(std::span<const double> probs, ClassId y_local, ClassId y_global, double lambda) {
  if (y_local >= probs.size() || y_global >= probs.size()) raise(Errc::InvalidParam, "selected label out of range");
  ProbLoss out{0.0, Matrix(1, probs.size(), 0.0)};
  out.value = -std::log(probs[y_local]) - lambda * std::log(probs[y_global]);
  out.dprobs(0, y_local) -= 1.0 / probs[y_local];
  out.dprobs(0, y_global) -= lambda / probs[y_global];
  return out;
}

ProbLoss hops_batch_loss(const Matrix& probs, std::span<const ClassId> y_local, std::span<const ClassId> y_global,
                         double lambda) {
  const std::size_t rows = probs.rows();
  if (y_local.size() != rows || y_global.size() != rows) raise(Errc::LengthMismatch, "selection lengths differ from batch");
  ProbLoss out{0.0, Matrix(rows, probs.cols(), 0.0)};
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const ProbLoss one = hops_loss(probs.row(i), y_local[i], y_global[i], lambda);
    out.value += inv * one.value;
    for (std::size_t j = 0; j < probs.cols(); ++j) out.dprobs(i, j) = inv * one.dprobs(0, j);
  }
  return out;
}

ProbLoss pseudo_label_ce(const Matrix& probs, std::span<const ClassId> targets) {
  const std::size_t rows = probs.rows();
  if (targets.size() != rows) raise(Errc::LengthMismatch, "target length differs from batch");
  ProbLoss out{0.0, Matrix(rows, probs.cols(), 0.0)};
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (targets[i] >= probs.cols()) raise(Errc::InvalidParam, "target out of range");
    out.value -= inv * std::log(probs(i, targets[i]));
    out.dprobs(i, targets[i]) = -inv / probs(i, targets[i]);
  }
  return out;
}

ProbLoss baseline_loss(BaselineLoss loss, const Matrix& probs, const CandidateMatrix& cands) {
  const std::size_t rows = probs.rows(), classes = probs.cols();
  if (cands.rows() != rows || cands.num_classes() != classes) {
    raise(Errc::DimensionMismatch, "candidate and probability shapes differ");
  }
  ProbLoss out{0.0, Matrix(rows, classes, 0.0)};
  const double inv_b = 1.0 / static_cast<double>(rows);
  const double inv_c = 1.0 / static_cast<double>(classes);
  const double log_floor = std::log(kSceLogFloor);

  for (std::size_t i = 0; i < rows; ++i) {
    auto p = probs.row(i);
    auto g = out.dprobs.row(i);
    auto y = [&](std::size_t j) { return cands.contains(i, static_cast<ClassId>(j)) ? 1.0 : 0.0; };
    const double set_size = static_cast<double>(cands.row_size(i));
    if (set_size == 0.0) raise(Errc::EmptyRow, "candidate row " + std::to_string(i) + " is empty");
    double mass = 0.0;  // sum_j p_ij y_ij
    for (std::size_t j = 0; j < classes; ++j) mass += p[j] * y(j);

    double value = 0.0;
    switch (loss) {
      case BaselineLoss::Rc:
        for (std::size_t j = 0; j < classes; ++j) {
          const double w = y(j) / set_size;
          if (w == 0.0) continue;
          value -= w * std::log(p[j]);
          g[j] = -w / p[j];
        }
        break;
      case BaselineLoss::Cc:
        value = -std::log(mass);
        for (std::size_t j = 0; j < classes; ++j) g[j] = -y(j) / mass;
        break;
      case BaselineLoss::Exp: {
        const double e = std::exp(-mass);
        value = e;
        for (std::size_t j = 0; j < classes; ++j) g[j] = -y(j) * e;
        break;
      }
      case BaselineLoss::Gce:
        for (std::size_t j = 0; j < classes; ++j) {
          value += (1.0 - p[j]) * y(j);
          g[j] = -y(j);
        }
        break;
      case BaselineLoss::Lwc:
        for (std::size_t j = 0; j < classes; ++j) {
          if (y(j) != 0.0) {
            value -= std::log(p[j]);
            g[j] = -1.0 / p[j];
          } else {
            value -= inv_c * std::log1p(-p[j]);
            g[j] = inv_c / (1.0 - p[j]);
          }
        }
        break;
      case BaselineLoss::Mae:
        for (std::size_t j = 0; j < classes; ++j) {
          const double diff = p[j] - y(j);
          value += std::abs(diff);
          g[j] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        }
        break;
      case BaselineLoss::Mse:
        for (std::size_t j = 0; j < classes; ++j) {
          const double diff = p[j] - y(j);
          value += diff * diff;
          g[j] = 2.0 * diff;
        }
        break;
      case BaselineLoss::Sce:
        for (std::size_t j = 0; j < classes; ++j) {
          const double log_y = y(j) > 0.0 ? 0.0 : log_floor;
          if (y(j) != 0.0) {
            value -= kSceAlpha * std::log(p[j]);
            g[j] -= kSceAlpha / p[j];
          }
          value -= kSceBeta * p[j] * log_y;
          g[j] -= kSceBeta * log_y;
        }
        break;
    }
    out.value += inv_b * value;
    for (double& v : g) v *= inv_b;
  }
  return out;
}

}  // namespace hops::prompt
