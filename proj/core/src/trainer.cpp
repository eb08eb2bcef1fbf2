#include "hops/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "hops/error.hpp"
#include "hops/random.hpp"

namespace hops::train {

namespace {

/// Splits [0, n) into contiguous chunks, one per worker.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * threads) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto src = m.row(idx[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

ClassId argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return static_cast<ClassId>(best);
}

}  // namespace

Method parse_method(std::string_view s) {
  if (s == "hops") return Method::Hops;
  if (s == "baseline") return Method::Baseline;
  if (s == "ldf_only") return Method::LdfOnly;
  if (s == "gop_only") return Method::GopOnly;
  raise(Errc::InvalidParam, "unknown method '" + std::string(s) + "'");
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Hops: return "hops";
    case Method::Baseline: return "baseline";
    case Method::LdfOnly: return "ldf_only";
    case Method::GopOnly: return "gop_only";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) raise(Errc::ConfigInvalid, "epochs must be >= 1");
  if (batch_size < 1) raise(Errc::ConfigInvalid, "batch size must be >= 1");
  if (!(lr > 0.0)) raise(Errc::ConfigInvalid, "lr must be positive");
  if (!(warmup_lr >= 0.0)) raise(Errc::ConfigInvalid, "warmup lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) raise(Errc::ConfigInvalid, "momentum must lie in [0, 1)");
  if (!(lambda >= 0.0)) raise(Errc::ConfigInvalid, "lambda must be non-negative");
  if (!(logit_scale > 0.0)) raise(Errc::ConfigInvalid, "logit scale must be positive");
  if (!(init_std >= 0.0)) raise(Errc::ConfigInvalid, "init std must be non-negative");
  if (threads < 1) raise(Errc::ConfigInvalid, "threads must be >= 1");
  if (uses_local()) ldf.validate();
  if (uses_global()) sinkhorn.validate();
}

std::string TrainConfig::label() const {
  switch (method) {
    case Method::Hops: return "HopS";
    case Method::LdfOnly: return "LDF-only";
    case Method::GopOnly: return "GOP-only";
    case Method::Baseline: {
      std::string s(prompt::to_string(loss));
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      return s;
    }
  }
  return "?";
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  if (epoch == 0) return cfg.warmup_lr;
  if (cfg.epochs < 2) return cfg.lr;
  const double progress = static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

IdentificationRecord identification_metrics(std::span<const ClassId> y_local, std::span<const ClassId> y_global,
                                             std::span<const ClassId> gt) {
  if (y_local.size() != gt.size() || y_global.size() != gt.size()) {
    raise(Errc::LengthMismatch, "selection and ground-truth lengths differ");
  }
  IdentificationRecord r;
  if (gt.empty()) return r;
  std::size_t local = 0, global = 0, both = 0, local_only = 0, global_only = 0, neither = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool l = y_local[i] == gt[i];
    const bool g = y_global[i] == gt[i];
    local += l;
    global += g;
    both += l && g;
    local_only += l && !g;
    global_only += !l && g;
    neither += !l && !g;
  }
  const double n = static_cast<double>(gt.size());
  r.acc_local = static_cast<double>(local) / n;
  r.acc_global = static_cast<double>(global) / n;
  r.acc_joint = static_cast<double>(both) / n;
  r.venn_local_only = static_cast<double>(local_only) / n;
  r.venn_global_only = static_cast<double>(global_only) / n;
  r.venn_both = static_cast<double>(both) / n;
  r.venn_neither = static_cast<double>(neither) / n;
  return r;
}

double MetricsLog::final_test_acc() const { return epochs.empty() ? 0.0 : epochs.back().test_acc; }

std::pair<double, std::size_t> MetricsLog::best_test_acc() const {
  std::pair<double, std::size_t> best{0.0, 0};
  for (const auto& r : epochs) {
    if (r.test_acc > best.first) best = {r.test_acc, r.epoch};
  }
  return best;
}

double evaluate(const prompt::PromptParams& params, const DatasetBundle& test, std::size_t threads) {
  if (!test.labels) raise(Errc::MissingLabels, "test set has no labels");
  if (test.d() != params.dim()) raise(Errc::DimensionMismatch, "test features and prompt dimension differ");
  const Matrix x = test.embeddings.as_double();
  const prompt::BatchForward fwd = prompt::forward(params, x);
  std::vector<std::uint8_t> hit(test.n(), 0);
  parallel_for(test.n(), threads, [&](std::size_t i) { hit[i] = argmax(fwd.probs.row(i)) == (*test.labels)[i]; });
  const auto correct = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return static_cast<double>(correct) / static_cast<double>(test.n());
}

TrainResult train(const DatasetBundle& bundle, const DatasetBundle& test, const TrainConfig& cfg) {
  cfg.validate();
  bundle.validate();
  test.validate();
  if (!bundle.candidates) raise(Errc::ConfigInvalid, "training set has no candidate sets");
  if (!bundle.class_anchors) raise(Errc::ConfigInvalid, "training set has no class anchors");
  if (!test.labels) raise(Errc::MissingLabels, "test set has no labels");
  if (test.d() != bundle.d() || test.num_classes != bundle.num_classes) {
    raise(Errc::DimensionMismatch, "train and test dimensions differ");
  }

  const std::size_t n = bundle.n();
  const CandidateMatrix& cands = *bundle.candidates;
  const Matrix features = bundle.embeddings.as_double();
  const bool track_ident = bundle.labels.has_value();

  std::optional<ldf::LocalFilter> local;
  if (cfg.uses_local()) local.emplace(bundle.embeddings, cands, cfg.ldf);

  TrainResult result;
  result.params = prompt::PromptParams::random(cfg.mode, to_double(*bundle.class_anchors), cfg.logit_scale,
                                               cfg.init_std, cfg.seed);
  Matrix velocity(result.params.context.rows(), result.params.context.cols(), 0.0);
  Rng rng = make_rng(cfg.seed, 0xba7c);
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = learning_rate(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<ClassId> sel_local(n), sel_global(n), gt(n);
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const std::size_t b = idx.size();
      const Matrix x = gather_rows(features, idx);
      const prompt::BatchForward fwd = prompt::forward(result.params, x);

      std::vector<ClassId> y_local(b), y_global(b);
      if (local) {
        parallel_for(b, cfg.threads, [&](std::size_t k) { y_local[k] = local->select(idx[k], fwd.probs.row(k)); });
      }
      if (cfg.uses_global()) {
        const CandidateMatrix batch = cands.select_rows(idx);
        const gop::Marginals m = gop::batch_marginals(batch);
        const gop::CostMatrix cost = gop::cost_matrix(fwd.probs, batch);
        const gop::TransportPlan plan = gop::sinkhorn(cost, m, cfg.sinkhorn);
        y_global = gop::select_global(plan.plan);
      }

      prompt::ProbLoss pl;
      switch (cfg.method) {
        case Method::Hops: pl = prompt::hops_batch_loss(fwd.probs, y_local, y_global, cfg.lambda); break;
        case Method::LdfOnly: pl = prompt::pseudo_label_ce(fwd.probs, y_local); break;
        case Method::GopOnly: pl = prompt::pseudo_label_ce(fwd.probs, y_global); break;
        case Method::Baseline: pl = prompt::baseline_loss(cfg.loss, fwd.probs, cands.select_rows(idx)); break;
      }
      if (!std::isfinite(pl.value)) raise(Errc::NonFiniteScaling, "training loss became non-finite");
      const Matrix grad = prompt::backward(result.params, x, fwd, pl.dprobs);

      auto v = velocity.flat();
      auto g = grad.flat();
      auto t = result.params.context.flat();
      for (std::size_t k = 0; k < t.size(); ++k) {
        v[k] = cfg.momentum * v[k] + g[k];
        t[k] -= lr * v[k];
      }

      loss_sum += pl.value * static_cast<double>(b);
      for (std::size_t k = 0; k < b; ++k) {
        sel_local[start + k] = y_local[k];
        sel_global[start + k] = y_global[k];
        if (track_ident) gt[start + k] = (*bundle.labels)[idx[k]];
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(n);
    rec.lr = lr;
    if (track_ident && cfg.method != Method::Baseline) {
      const IdentificationRecord id = identification_metrics(sel_local, sel_global, gt);
      if (cfg.uses_local()) rec.acc_local = id.acc_local;
      if (cfg.uses_global()) rec.acc_global = id.acc_global;
      if (cfg.uses_local() && cfg.uses_global()) {
        rec.acc_joint = id.acc_joint;
        rec.venn_local_only = id.venn_local_only;
        rec.venn_global_only = id.venn_global_only;
        rec.venn_both = id.venn_both;
        rec.venn_neither = id.venn_neither;
      }
    }
    rec.test_acc = evaluate(result.params, test, cfg.threads);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(rec);
  }
  return result;
}

RepeatedResult summarize(std::vector<double> accs) {
  RepeatedResult r;
  r.test_accs = std::move(accs);
  if (r.test_accs.empty()) return r;
  const double n = static_cast<double>(r.test_accs.size());
  r.mean = std::accumulate(r.test_accs.begin(), r.test_accs.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : r.test_accs) ss += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(ss / n);
  return r;
}

RepeatedResult run_repeated(const DatasetBundle& bundle, const DatasetBundle& test, TrainConfig cfg,
                            std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) raise(Errc::ConfigInvalid, "run_repeated needs at least one seed");
  std::vector<double> accs;
  for (std::uint64_t s : seeds) {
    cfg.seed = s;
    accs.push_back(train(bundle, test, cfg).log.final_test_acc());
  }
  return summarize(std::move(accs));
}

RepeatedResult run_repeated(const DataFactory& make_data, TrainConfig cfg, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) raise(Errc::ConfigInvalid, "run_repeated needs at least one seed");
  std::vector<double> accs;
  for (std::uint64_t s : seeds) {
    auto [bundle, test] = make_data(s);
    cfg.seed = s;
    accs.push_back(train(bundle, test, cfg).log.final_test_acc());
  }
  return summarize(std::move(accs));
}

}  // namespace hops::train
