#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hops/dataset.hpp"
#include "hops/matrix.hpp"

namespace hops::prompt {

enum class PromptMode { Uni, Cls };

PromptMode parse_mode(std::string_view s);
std::string_view to_string(PromptMode m) noexcept;

/// Learnable context on top of frozen class anchors. The class-side
/// embedding is normalize(anchor_j + context), with one shared context row
/// in uni mode and one row per class in cls mode.
struct PromptParams {
  PromptMode mode = PromptMode::Uni;
  Matrix context;  // 1 x d (uni) or C x d (cls)
  Matrix anchors;  // C x d, frozen
  double logit_scale = 1.0;

  std::size_t num_classes() const noexcept { return anchors.rows(); }
  std::size_t dim() const noexcept { return anchors.cols(); }
  std::span<const double> context_for(std::size_t j) const noexcept {
    return context.row(mode == PromptMode::Uni ? 0 : j);
  }

  void validate() const;

  static PromptParams zeros(PromptMode mode, Matrix anchors, double logit_scale = 1.0);
  /// Context entries drawn from N(0, stddev^2).
  static PromptParams random(PromptMode mode, Matrix anchors, double logit_scale, double stddev, std::uint64_t seed);
};

/// {"mode":"uni|cls","logit_scale":s,"context":[[...]]}. Anchors are not
/// serialized; they come from the dataset.
nlohmann::json to_json(const PromptParams& params);
PromptParams params_from_json(const nlohmann::json& j, Matrix anchors);

/// normalize(anchor_j + context_j). Throws ZeroRow if the sum vanishes.
std::vector<double> class_embedding(const PromptParams& params, ClassId j);

/// Softmax over logit_scale * cos(x, class_embedding(j)). x must be unit norm.
std::vector<double> predict_probs(std::span<const double> x, const PromptParams& params);

/// Forward pass over a batch, keeping what the backward pass needs.
struct BatchForward {
  Matrix unit_embeddings;   // C x d
  std::vector<double> pre_norms;  // |anchor_j + context_j|
  Matrix cosines;           // B x C
  Matrix probs;             // B x C
};

BatchForward forward(const PromptParams& params, const Matrix& features);

/// Gradient of a loss with respect to the context, given dL/dprobs for every
/// batch row. Chains through the softmax, the cosine, and the normalization.
Matrix backward(const PromptParams& params, const Matrix& features, const BatchForward& fwd, const Matrix& dprobs);

/// Scalar loss of a batch of probabilities together with dL/dprobs.
struct ProbLoss {
  double value = 0.0;
  Matrix dprobs;
};

/// Loss value and its gradient with respect to every context parameter.
struct LossValue {
  double value = 0.0;
  Matrix gradient;  // same shape as PromptParams::context
};

using BatchLossFn = std::function<ProbLoss(const Matrix& probs)>;

LossValue loss_and_gradient(const PromptParams& params, const Matrix& features, const BatchLossFn& loss);

}  // namespace hops::prompt
