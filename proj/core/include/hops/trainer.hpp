#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hops/dataset.hpp"
#include "hops/gop.hpp"
#include "hops/ldf.hpp"
#include "hops/losses.hpp"
#include "hops/prompt_head.hpp"

namespace hops::train {

enum class Method { Hops, Baseline, LdfOnly, GopOnly };

Method parse_method(std::string_view s);
std::string_view to_string(Method m) noexcept;

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double lr = 0.002;
  /// Constant rate used for epoch 0; cosine annealing covers the rest.
  double warmup_lr = 1e-5;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  Method method = Method::Hops;
  prompt::BaselineLoss loss = prompt::BaselineLoss::Cc;  // Method::Baseline only
  double lambda = 1.0;
  ldf::LdfConfig ldf{};
  gop::SinkhornConfig sinkhorn{};
  prompt::PromptMode mode = prompt::PromptMode::Uni;
  double logit_scale = 1.0;
  /// Standard deviation of the random context initialization; 0 starts at zero.
  double init_std = 0.02;
  /// Worker threads for per-instance work. Results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
  bool uses_local() const noexcept { return method == Method::Hops || method == Method::LdfOnly; }
  bool uses_global() const noexcept { return method == Method::Hops || method == Method::GopOnly; }
  /// Short display name: HopS, LDF-only, GOP-only, or the loss name.
  std::string label() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// warmup_lr at epoch 0, then lr * (1 + cos(pi * (e - 1) / (epochs - 1))) / 2.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct IdentificationRecord {
  double acc_local = 0.0;
  double acc_global = 0.0;
  double acc_joint = 0.0;
  double venn_local_only = 0.0;
  double venn_global_only = 0.0;
  double venn_both = 0.0;
  double venn_neither = 0.0;
};

/// Agreement of the two selectors with the ground truth, as a partition of
/// instances into local-only / global-only / both / neither correct.
IdentificationRecord identification_metrics(std::span<const ClassId> y_local, std::span<const ClassId> y_global,
                                             std::span<const ClassId> gt);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  /// Only the selectors the method runs are reported; the rest stay empty.
  std::optional<double> acc_local, acc_global, acc_joint;
  std::optional<double> venn_local_only, venn_global_only, venn_both, venn_neither;
  double test_acc = 0.0;
  double lr = 0.0;
  double wall_time_s = 0.0;
};

struct MetricsLog {
  std::vector<EpochRecord> epochs;

  double final_test_acc() const;
  /// (accuracy, epoch) of the best epoch; earliest wins ties.
  std::pair<double, std::size_t> best_test_acc() const;
};

struct TrainResult {
  prompt::PromptParams params;
  MetricsLog log;
};

/// Fraction of test instances whose most probable class is the label.
double evaluate(const prompt::PromptParams& params, const DatasetBundle& test, std::size_t threads = 1);

TrainResult train(const DatasetBundle& bundle, const DatasetBundle& test, const TrainConfig& cfg);

struct RepeatedResult {
  std::vector<double> test_accs;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

RepeatedResult summarize(std::vector<double> accs);

/// Re-trains with each seed as the training seed on fixed data.
RepeatedResult run_repeated(const DatasetBundle& bundle, const DatasetBundle& test, TrainConfig cfg,
                            std::span<const std::uint64_t> seeds);

/// Re-draws the data per seed as well.
using DataFactory = std::function<std::pair<DatasetBundle, DatasetBundle>(std::uint64_t seed)>;
RepeatedResult run_repeated(const DataFactory& make_data, TrainConfig cfg, std::span<const std::uint64_t> seeds);

// ---- serialization -------------------------------------------------------

inline constexpr std::string_view kMetricsCsvHeader =
    "epoch,loss,acc_local,acc_global,acc_joint,venn_local_only,venn_global_only,venn_both,venn_neither,test_acc,lr";

void write_metrics_csv(const MetricsLog& log, std::ostream& out);

/// Final summary: method, realized confusion rate, final and best test
/// accuracy, final identification accuracies, timing, and the full config.
nlohmann::json summary_json(const TrainResult& result, const TrainConfig& cfg, const DatasetBundle& bundle);

}  // namespace hops::train
