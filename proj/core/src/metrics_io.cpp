#include <cmath>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hops/corruption.hpp"
#include "hops/error.hpp"
#include "hops/trainer.hpp"

namespace hops::train {

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("nan"); }

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lr", cfg.lr},
      {"warmup_lr", cfg.warmup_lr},
      {"momentum", cfg.momentum},
      {"seed", cfg.seed},
      {"method", to_string(cfg.method)},
      {"loss", prompt::to_string(cfg.loss)},
      {"lambda", cfg.lambda},
      {"k", cfg.ldf.k},
      {"tau", cfg.ldf.tau},
      {"voting", ldf::to_string(cfg.ldf.voting)},
      {"epsilon", cfg.sinkhorn.epsilon},
      {"sinkhorn_iterations", cfg.sinkhorn.iterations},
      {"sinkhorn_log_domain", cfg.sinkhorn.log_domain},
      {"sinkhorn_tol", cfg.sinkhorn.tol},
      {"mode", prompt::to_string(cfg.mode)},
      {"logit_scale", cfg.logit_scale},
      {"init_std", cfg.init_std},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  cfg = TrainConfig{};
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.warmup_lr = j.value("warmup_lr", cfg.warmup_lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.method = parse_method(j.value("method", std::string("hops")));
  cfg.loss = prompt::parse_loss(j.value("loss", std::string("cc")));
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.ldf.k = j.value("k", cfg.ldf.k);
  cfg.ldf.tau = j.value("tau", cfg.ldf.tau);
  cfg.ldf.voting = ldf::parse_voting(j.value("voting", std::string("hard")));
  cfg.sinkhorn.epsilon = j.value("epsilon", cfg.sinkhorn.epsilon);
  cfg.sinkhorn.iterations = j.value("sinkhorn_iterations", cfg.sinkhorn.iterations);
  cfg.sinkhorn.log_domain = j.value("sinkhorn_log_domain", cfg.sinkhorn.log_domain);
  cfg.sinkhorn.tol = j.value("sinkhorn_tol", cfg.sinkhorn.tol);
  cfg.mode = prompt::parse_mode(j.value("mode", std::string("uni")));
  cfg.logit_scale = j.value("logit_scale", cfg.logit_scale);
  cfg.init_std = j.value("init_std", cfg.init_std);
}

void write_metrics_csv(const MetricsLog& log, std::ostream& out) {
  out << kMetricsCsvHeader << '\n';
  for (const EpochRecord& r : log.epochs) {
    out << fmt::format("{},{:.9g},{},{},{},{},{},{},{},{:.6f},{:.9g}\n", r.epoch, r.loss, cell(r.acc_local),
                       cell(r.acc_global), cell(r.acc_joint), cell(r.venn_local_only), cell(r.venn_global_only),
                       cell(r.venn_both), cell(r.venn_neither), r.test_acc, r.lr);
  }
}

nlohmann::json summary_json(const TrainResult& result, const TrainConfig& cfg, const DatasetBundle& bundle) {
  const auto& log = result.log;
  const auto [best_acc, best_epoch] = log.best_test_acc();
  double wall = 0.0;
  for (const auto& r : log.epochs) wall += r.wall_time_s;
  nlohmann::json j{
      {"method", to_string(cfg.method)},
      {"label", cfg.label()},
      {"gamma_c", bundle.candidates ? realized_confusion_rate(*bundle.candidates) : 0.0},
      {"seed", cfg.seed},
      {"n_train", bundle.n()},
      {"num_classes", bundle.num_classes},
      {"final_test_acc", log.final_test_acc()},
      {"best_test_acc", best_acc},
      {"best_epoch", best_epoch},
      {"wall_time_s", wall},
      {"config", cfg},
  };
  if (cfg.method == Method::Baseline) j["loss"] = prompt::to_string(cfg.loss);
  if (!log.epochs.empty()) {
    const auto& last = log.epochs.back();
    j["final_acc_local"] = optional_json(last.acc_local);
    j["final_acc_global"] = optional_json(last.acc_global);
    j["final_acc_joint"] = optional_json(last.acc_joint);
  }
  return j;
}

}  // namespace hops::train
