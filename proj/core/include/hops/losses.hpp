#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hops/dataset.hpp"
#include "hops/prompt_head.hpp"

namespace hops::prompt {

enum class BaselineLoss { Rc, Cc, Exp, Gce, Lwc, Mae, Mse, Sce };

inline constexpr BaselineLoss kAllBaselines[] = {BaselineLoss::Rc,  BaselineLoss::Cc,  BaselineLoss::Exp,
                                                 BaselineLoss::Gce, BaselineLoss::Lwc, BaselineLoss::Mae,
                                                 BaselineLoss::Mse, BaselineLoss::Sce};

/// Throws UnknownLoss.
BaselineLoss parse_loss(std::string_view name);
std::string_view to_string(BaselineLoss loss) noexcept;

inline constexpr double kSceAlpha = 0.1;
inline constexpr double kSceBeta = 1.0;
/// log(y) in the reverse cross-entropy is evaluated at max(y, kSceLogFloor).
inline constexpr double kSceLogFloor = 1e-4;

/// Single-instance loss on one probability row (as a 1 x C ProbLoss).
/// -sum_j w_j log p_j where w sums to one over the candidate set. When
/// `candidate_row` is given, weight on a non-candidate is a WeightViolation.
ProbLoss candidate_ce(std::span<const double> probs, std::span<const double> weights,
                      std::optional<std::span<const std::uint8_t>> candidate_row = std::nullopt);

/// -log p[y_local] - lambda * log p[y_global].
ProbLoss hops_loss(std::span<const double> probs, ClassId y_local, ClassId y_global, double lambda);

/// Batch mean of hops_loss.
ProbLoss hops_batch_loss(const Matrix& probs, std::span<const ClassId> y_local, std::span<const ClassId> y_global,
                         double lambda);

/// Batch mean of -log p[y_i].
ProbLoss pseudo_label_ce(const Matrix& probs, std::span<const ClassId> targets);

/// Partial-label and robust baselines with y_ij = s_ij, averaged over the
/// batch. RC weights candidates uniformly (s_ij / |S_i|).
ProbLoss baseline_loss(BaselineLoss loss, const Matrix& probs, const CandidateMatrix& cands);

}  // namespace hops::prompt
