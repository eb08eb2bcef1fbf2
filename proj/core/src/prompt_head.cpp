#include "hops/prompt_head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "hops/error.hpp"
#include "hops/random.hpp"

namespace hops::prompt {

PromptMode parse_mode(std::string_view s) {
  if (s == "uni") return PromptMode::Uni;
  if (s == "cls") return PromptMode::Cls;
  raise(Errc::InvalidParam, "unknown prompt mode '" + std::string(s) + "'");
}

std::string_view to_string(PromptMode m) noexcept { return m == PromptMode::Uni ? "uni" : "cls"; }

void PromptParams::validate() const {
  if (anchors.rows() < 1 || anchors.cols() < 2) raise(Errc::DimensionMismatch, "anchors must be C x d with d >= 2");
  const std::size_t want_rows = mode == PromptMode::Uni ? 1 : anchors.rows();
  if (context.rows() != want_rows || context.cols() != anchors.cols()) {
    raise(Errc::DimensionMismatch, "context shape does not match prompt mode and anchors");
  }
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) raise(Errc::InvalidParam, "logit_scale must be positive");
  for (double v : context.flat()) {
    if (!std::isfinite(v)) raise(Errc::InvalidParam, "context holds a non-finite value");
  }
}

PromptParams PromptParams::zeros(PromptMode mode, Matrix anchors, double logit_scale) {
  PromptParams p;
  p.mode = mode;
  p.context = Matrix(mode == PromptMode::Uni ? 1 : anchors.rows(), anchors.cols(), 0.0);
  p.anchors = std::move(anchors);
  p.logit_scale = logit_scale;
  p.validate();
  return p;
}

PromptParams PromptParams::random(PromptMode mode, Matrix anchors, double logit_scale, double stddev,
                                  std::uint64_t seed) {
  PromptParams p = zeros(mode, std::move(anchors), logit_scale);
  if (stddev > 0.0) {
    Rng rng = make_rng(seed, 0x1417);
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& v : p.context.flat()) v = normal(rng);
  }
  return p;
}

nlohmann::json to_json(const PromptParams& params) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < params.context.rows(); ++r) {
    auto row = params.context.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return nlohmann::json{{"mode", to_string(params.mode)}, {"logit_scale", params.logit_scale}, {"context", rows}};
}

PromptParams params_from_json(const nlohmann::json& j, Matrix anchors) {
  PromptParams p;
  p.mode = parse_mode(j.at("mode").get<std::string>());
  p.logit_scale = j.at("logit_scale").get<double>();
  const auto& rows = j.at("context");
  const std::size_t d = rows.empty() ? 0 : rows.at(0).size();
  p.context = Matrix(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto values = rows.at(r).get<std::vector<double>>();
    if (values.size() != d) raise(Errc::DimensionMismatch, "ragged context rows");
    std::copy(values.begin(), values.end(), p.context.row(r).begin());
  }
  p.anchors = std::move(anchors);
  p.validate();
  return p;
}

std::vector<double> class_embedding(const PromptParams& params, ClassId j) {
  if (j >= params.num_classes()) raise(Errc::InvalidParam, "class index out of range");
  auto a = params.anchors.row(j);
  auto t = params.context_for(j);
  std::vector<double> u(a.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = a[k] + t[k];
  const double n = norm2(u);
  if (!(n >= 1e-12)) raise(Errc::ZeroRow, "anchor plus context vanishes for class " + std::to_string(j));
  for (double& v : u) v /= n;
  return u;
}

namespace {

void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - hi);
    s += out[j];
  }
  for (double& v : out) v /= s;
}

}  // namespace

std::vector<double> predict_probs(std::span<const double> x, const PromptParams& params) {
  const std::size_t classes = params.num_classes();
  std::vector<double> logits(classes), probs(classes);
  for (ClassId j = 0; j < classes; ++j) logits[j] = params.logit_scale * dot(x, class_embedding(params, j));
  softmax_row(logits, probs);
  return probs;
}

BatchForward forward(const PromptParams& params, const Matrix& features) {
  if (features.cols() != params.dim()) raise(Errc::DimensionMismatch, "feature and anchor dimensions differ");
  const std::size_t classes = params.num_classes(), d = params.dim();
  BatchForward f;
  f.unit_embeddings = Matrix(classes, d);
  f.pre_norms.resize(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    auto a = params.anchors.row(j);
    auto t = params.context_for(j);
    auto u = f.unit_embeddings.row(j);
    for (std::size_t k = 0; k < d; ++k) u[k] = a[k] + t[k];
    const double n = norm2(u);
    if (!(n >= 1e-12)) raise(Errc::ZeroRow, "anchor plus context vanishes for class " + std::to_string(j));
    f.pre_norms[j] = n;
    for (double& v : u) v /= n;
  }
  f.cosines = Matrix(features.rows(), classes);
  f.probs = Matrix(features.rows(), classes);
  std::vector<double> logits(classes);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < classes; ++j) {
      f.cosines(i, j) = dot(features.row(i), f.unit_embeddings.row(j));
      logits[j] = params.logit_scale * f.cosines(i, j);
    }
    softmax_row(logits, f.probs.row(i));
  }
  return f;
}

Matrix backward(const PromptParams& params, const Matrix& features, const BatchForward& fwd, const Matrix& dprobs) {
  const std::size_t classes = params.num_classes(), d = params.dim();
  Matrix grad(params.context.rows(), d, 0.0);
  std::vector<double> dcos(classes);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto p = fwd.probs.row(i);
    auto g = dprobs.row(i);
    double mean_g = 0.0;
    for (std::size_t j = 0; j < classes; ++j) mean_g += p[j] * g[j];
    for (std::size_t j = 0; j < classes; ++j) dcos[j] = params.logit_scale * p[j] * (g[j] - mean_g);

    auto x = features.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      if (dcos[j] == 0.0) continue;
      // d cos(x, u/|u|) / du = (x - cos * e) / |u|
      auto e = fwd.unit_embeddings.row(j);
      const double scale = dcos[j] / fwd.pre_norms[j];
      const double c = fwd.cosines(i, j);
      auto out = grad.row(params.mode == PromptMode::Uni ? 0 : j);
      for (std::size_t k = 0; k < d; ++k) out[k] += scale * (x[k] - c * e[k]);
    }
  }
  return grad;
}

LossValue loss_and_gradient(const PromptParams& params, const Matrix& features, const BatchLossFn& loss) {
  const BatchForward fwd = forward(params, features);
  ProbLoss pl = loss(fwd.probs);
  if (!std::isfinite(pl.value)) raise(Errc::InvalidParam, "loss is not finite");
  return LossValue{pl.value, backward(params, features, fwd, pl.dprobs)};
}

}  // namespace hops::prompt
