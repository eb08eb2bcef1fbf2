#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hops/corruption.hpp"
#include "hops/error.hpp"
#include "hops/gop.hpp"
#include "hops/hops_format.hpp"
#include "hops/ldf.hpp"
#include "hops/trainer.hpp"

namespace hops::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Usage-class failure detected after flag parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoFailure:
    case Errc::BadMagic:
    case Errc::VersionUnsupported:
    case Errc::TruncatedFile:
    case Errc::ChecksumMismatch:
    case Errc::MalformedFile:
      return kIo;
    case Errc::InvalidParam:
    case Errc::InvalidL:
    case Errc::ConfigInvalid:
    case Errc::UnknownLoss:
    case Errc::RateNotIntegral:
    case Errc::KTooLarge:
    case Errc::EmptyClassAfterDecay:
    case Errc::InsufficientClassCount:
      return kUsage;
    default:
      return kRuntime;
  }
}

std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path);
  if (!in) raise(Errc::IoFailure, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

/// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(what + ": " + e.what());
  }
}

std::size_t threads_from_env() {
  const char* v = std::getenv("HOPS_THREADS");
  if (!v || !*v) return 1;
  try {
    const long t = std::stol(v);
    return t >= 1 ? static_cast<std::size_t>(t) : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  SynthParams params;
  std::string out;
  std::string test_out;
  std::size_t test_per_class = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (!a.test_out.empty()) {
    if (a.test_per_class < 1) throw UsageError("--test-out needs --test-per-class >= 1");
    auto [train, test] = synth_gaussian_mixture_split(a.params, a.test_per_class);
    save_bundle(train, a.out);
    save_bundle(test, a.test_out);
    out << fmt::format("n={} d={} C={}\n", train.n(), train.d(), train.num_classes);
    out << fmt::format("test n={} d={} C={}\n", test.n(), test.d(), test.num_classes);
    return kOk;
  }
  const DatasetBundle b = synth_gaussian_mixture(a.params);
  save_bundle(b, a.out);
  out << fmt::format("n={} d={} C={}\n", b.n(), b.d(), b.num_classes);
  return kOk;
}

// ---- corrupt --------------------------------------------------------------

struct CorruptArgs {
  std::string in, out, config;
  std::string kind = "rand";
  std::size_t L = 2;
  std::uint64_t seed = 0;
  double missing_rate = 0.0;
  std::string tail = "none";
  double tail_ratio = -1.0;
  std::size_t shots = 0;
};

int cmd_corrupt(const CorruptArgs& a, std::ostream& out) {
  CorruptionConfig cfg;
  if (!a.config.empty()) {
    cfg = parse_json(read_text(a.config), "corruption config").get<CorruptionConfig>();
  } else {
    cfg.kind = parse_corruption_kind(a.kind);
    cfg.L = a.L;
    cfg.seed = a.seed;
    cfg.missing_rate = a.missing_rate;
    cfg.tail.pattern = parse_tail_pattern(a.tail);
    cfg.tail.ratio = a.tail_ratio > 0.0                          ? a.tail_ratio
                     : cfg.tail.pattern == TailPattern::Exp      ? kDefaultExpTailRatio
                     : cfg.tail.pattern == TailPattern::TwoLevel ? kDefaultTwoLevelTailRatio
                                                                 : 1.0;
  }
  DatasetBundle b = load_bundle(a.in);
  if (!b.labels) throw UsageError("input dataset has no labels");
  cfg.validate(b.num_classes);
  if (a.shots > 0) b = sample_few_shot(b, a.shots, cfg.seed);
  const DatasetBundle corrupted = apply_corruption(b, cfg);
  save_bundle(corrupted, a.out);

  std::size_t missing = 0;
  for (std::size_t i = 0; i < corrupted.n(); ++i) {
    missing += !corrupted.candidates->contains(i, (*corrupted.labels)[i]);
  }
  out << fmt::format("n={} C={} kind={} L={}\n", corrupted.n(), corrupted.num_classes, to_string(cfg.kind), cfg.L);
  out << fmt::format("gamma_c={:.2f}\n", realized_confusion_rate(*corrupted.candidates));
  if (cfg.missing_rate > 0.0) out << fmt::format("missing_gt_rows={}\n", missing);
  return kOk;
}

// ---- knn ------------------------------------------------------------------

struct KnnArgs {
  std::string in, out;
  std::size_t k = 20;
  bool strict = false;
};

int cmd_knn(const KnnArgs& a, std::ostream& out) {
  const DatasetBundle b = load_bundle(a.in);
  const auto index = ldf::topk_neighbors(cosine_affinity(b.embeddings), a.k, a.strict);
  emit(a.out, ldf::to_json(index).dump() + "\n", out);
  return kOk;
}

// ---- ot-solve -------------------------------------------------------------

struct OtArgs {
  std::string in = "-";
  std::string out;
};

int cmd_ot_solve(const OtArgs& a, std::ostream& out) {
  const json inst = parse_json(read_text(a.in), "OT instance");
  gop::Marginals m;
  std::size_t rows = 0, cols = 0;
  Matrix cost;
  std::vector<std::uint8_t> allowed;
  try {
    m.r = inst.at("r").get<std::vector<double>>();
    m.c = inst.at("c").get<std::vector<double>>();
    rows = m.r.size();
    cols = m.c.size();
    const json& cost_rows = inst.at("cost");
    if (cost_rows.size() != rows) throw UsageError("cost must have one row per entry of r");
    cost = Matrix(rows, cols, 0.0);
    allowed.assign(rows * cols, 0);
    const json* mask = inst.contains("mask") ? &inst.at("mask") : nullptr;
    if (mask && mask->size() != rows) throw UsageError("mask must have one row per entry of r");
    for (std::size_t i = 0; i < rows; ++i) {
      if (cost_rows[i].size() != cols || (mask && (*mask)[i].size() != cols)) {
        throw UsageError("cost/mask rows must have one entry per entry of c");
      }
      for (std::size_t j = 0; j < cols; ++j) {
        const json& cij = cost_rows[i][j];
        bool ok = !cij.is_null();
        if (mask) {
          const json& mij = (*mask)[i][j];
          ok = mij.is_boolean() ? mij.get<bool>() : mij.get<double>() != 0.0;
        }
        if (ok) {
          if (cij.is_null()) throw UsageError("allowed cost entry is null");
          cost(i, j) = cij.get<double>();
          allowed[i * cols + j] = 1;
        }
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("OT instance: ") + e.what());
  }

  gop::SinkhornConfig cfg;
  cfg.epsilon = inst.value("epsilon", cfg.epsilon);
  cfg.iterations = inst.value("iterations", cfg.iterations);
  cfg.log_domain = inst.value("log_domain", cfg.log_domain);
  cfg.tol = inst.value("tol", cfg.tol);

  const gop::CostMatrix cm = gop::make_cost_matrix(std::move(cost), std::move(allowed));
  const gop::TransportPlan plan = gop::sinkhorn(cm, m, cfg);
  json plan_rows = json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = plan.plan.row(i);
    plan_rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  const json result{{"plan", plan_rows},
                    {"residual_r", plan.residual_r},
                    {"residual_c", plan.residual_c},
                    {"objective", gop::entropic_objective(plan.plan, cm, cfg.epsilon)},
                    {"iterations", plan.iterations}};
  emit(a.out, result.dump() + "\n", out);
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string train, test, out_dir = ".";
  std::string method = "hops", loss = "cc", mode = "uni", voting = "hard";
  train::TrainConfig cfg;
  bool scaling_domain = false;
};

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  train::TrainConfig cfg = a.cfg;
  cfg.method = train::parse_method(a.method);
  cfg.loss = prompt::parse_loss(a.loss);
  cfg.mode = prompt::parse_mode(a.mode);
  cfg.ldf.voting = ldf::parse_voting(a.voting);
  cfg.sinkhorn.log_domain = !a.scaling_domain;
  cfg.threads = threads_from_env();
  cfg.validate();

  const DatasetBundle bundle = load_bundle(a.train);
  const DatasetBundle test = load_bundle(a.test);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) raise(Errc::IoFailure, "cannot create " + a.out_dir + ": " + ec.message());

  train::TrainResult result;
  try {
    result = train::train(bundle, test, cfg);
  } catch (const Error& e) {
    err << "training failed: " << e.what() << "\n";
    return kRuntime;
  }

  std::ostringstream csv;
  train::write_metrics_csv(result.log, csv);
  const fs::path dir(a.out_dir);
  write_text(dir / "metrics.csv", csv.str());
  write_text(dir / "params.json", prompt::to_json(result.params).dump(2) + "\n");
  write_text(dir / "summary.json", train::summary_json(result, cfg, bundle).dump(2) + "\n");
  out << fmt::format("method={} test_acc={:.4f}\n", cfg.label(), result.log.final_test_acc());
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string params, test;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const DatasetBundle test = load_bundle(a.test);
  if (!test.class_anchors) throw UsageError("test dataset has no class anchors");
  const json j = parse_json(read_text(a.params), "prompt parameters");
  const prompt::PromptParams params = prompt::params_from_json(j, to_double(*test.class_anchors));
  out << fmt::format("accuracy={:.4f}\n", train::evaluate(params, test, threads_from_env()));
  return kOk;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> summaries;
  std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  // (gamma_c rounded to hundredths, label) -> accuracies
  std::map<std::pair<long, std::string>, std::vector<double>> groups;
  for (const auto& path : a.summaries) {
    const json s = parse_json(read_text(path), path);
    try {
      const double gamma = s.at("gamma_c").get<double>();
      const std::string label = s.at("label").get<std::string>();
      const double acc = s.at("final_test_acc").get<double>();
      groups[{std::lround(gamma * 100.0), label}].push_back(acc);
    } catch (const json::exception& e) {
      throw UsageError(path + ": malformed summary: " + e.what());
    }
  }
  std::string table = "| Method | gamma_c | Runs | Test acc (mean ± std) |\n|---|---|---|---|\n";
  for (auto& [key, accs] : groups) {
    const auto stats = train::summarize(accs);
    table += fmt::format("| {} | {:.2f} | {} | {:.2f} ± {:.2f} |\n", key.second, static_cast<double>(key.first) / 100.0,
                         accs.size(), 100.0 * stats.mean, 100.0 * stats.stddev);
  }
  emit(a.out, table, out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HopS partial-label prompt learning engine", "hops"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a Gaussian-mixture dataset");
  s->add_option("--classes", synth.params.classes, "Number of classes C")->required();
  s->add_option("--dim", synth.params.dim, "Feature dimension d")->required();
  s->add_option("--per-class", synth.params.per_class, "Instances per class")->required();
  s->add_option("--noise", synth.params.noise, "Per-coordinate instance noise");
  s->add_option("--separation", synth.params.separation, "Spread of class mean directions");
  s->add_option("--anchor-noise", synth.params.anchor_noise, "Perturbation of class anchors from the means");
  s->add_option("--seed", synth.params.seed, "Random seed");
  s->add_option("--out", synth.out, "Output HOPS file")->required();
  s->add_option("--test-out", synth.test_out, "Optional held-out HOPS file from the same mixture");
  s->add_option("--test-per-class", synth.test_per_class, "Held-out instances per class");

  CorruptArgs corrupt;
  auto* c = app.add_subcommand("corrupt", "Attach partial-label candidate sets");
  c->add_option("--in", corrupt.in, "Input HOPS file with labels")->required();
  c->add_option("--out", corrupt.out, "Output HOPS file")->required();
  c->add_option("--config", corrupt.config, "Corruption config JSON (overrides the flags below)");
  c->add_option("--kind", corrupt.kind, "rand | insd");
  c->add_option("--L", corrupt.L, "Candidate set size");
  c->add_option("--seed", corrupt.seed, "Random seed");
  c->add_option("--missing-rate", corrupt.missing_rate, "Fraction of rows per class losing the ground truth");
  c->add_option("--tail", corrupt.tail, "none | exp | two_level");
  c->add_option("--tail-ratio", corrupt.tail_ratio, "Imbalance ratio of the tail pattern");
  c->add_option("--shots", corrupt.shots, "Class-balanced few-shot sample taken first (0 = all)");

  KnnArgs knn;
  auto* k = app.add_subcommand("knn", "Dump the k-nearest-neighbor index as JSON");
  k->add_option("--in", knn.in, "Input HOPS file")->required();
  k->add_option("--k", knn.k, "Neighbors per instance");
  k->add_flag("--strict", knn.strict, "Fail instead of clamping when k >= n");
  k->add_option("--out", knn.out, "Output JSON (default stdout)");

  OtArgs ot;
  auto* o = app.add_subcommand("ot-solve", "Solve one masked entropic transport instance");
  o->add_option("--in", ot.in, "Instance JSON ('-' for stdin)");
  o->add_option("--out", ot.out, "Output JSON (default stdout)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a prompt head");
  t->add_option("--train", tr.train, "Training HOPS file with candidates")->required();
  t->add_option("--test", tr.test, "Test HOPS file with labels")->required();
  t->add_option("--out-dir", tr.out_dir, "Directory for metrics.csv, params.json, summary.json");
  t->add_option("--method", tr.method, "hops | baseline | ldf_only | gop_only");
  t->add_option("--loss", tr.loss, "Baseline loss: rc cc exp gce lwc mae mse sce");
  t->add_option("--epochs", tr.cfg.epochs);
  t->add_option("--batch-size", tr.cfg.batch_size);
  t->add_option("--lr", tr.cfg.lr);
  t->add_option("--warmup-lr", tr.cfg.warmup_lr);
  t->add_option("--momentum", tr.cfg.momentum);
  t->add_option("--seed", tr.cfg.seed);
  t->add_option("--lambda", tr.cfg.lambda, "Weight of the global term");
  t->add_option("--k", tr.cfg.ldf.k, "LDF neighbors");
  t->add_option("--tau", tr.cfg.ldf.tau, "LDF frequency threshold");
  t->add_option("--voting", tr.voting, "hard | soft");
  t->add_option("--epsilon", tr.cfg.sinkhorn.epsilon, "Entropic regularization");
  t->add_option("--sinkhorn-iters", tr.cfg.sinkhorn.iterations);
  t->add_option("--sinkhorn-tol", tr.cfg.sinkhorn.tol);
  t->add_flag("--scaling-domain", tr.scaling_domain, "Run Sinkhorn on raw scalings instead of logs");
  t->add_option("--mode", tr.mode, "uni | cls");
  t->add_option("--logit-scale", tr.cfg.logit_scale);
  t->add_option("--init-std", tr.cfg.init_std);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Test accuracy of saved prompt parameters");
  e->add_option("--params", ev.params, "params.json from train")->required();
  e->add_option("--test", ev.test, "Test HOPS file with labels and anchors")->required();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Markdown table from summary JSON files");
  r->add_option("summaries", rep.summaries, "summary.json files")->required();
  r->add_option("--out", rep.out, "Output markdown (default stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << pe.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (c->parsed()) return cmd_corrupt(corrupt, out);
    if (k->parsed()) return cmd_knn(knn, out);
    if (o->parsed()) return cmd_ot_solve(ot, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (r->parsed()) return cmd_report(rep, out);
  } catch (const UsageError& ue) {
    err << ue.what() << "\n";
    return kUsage;
  } catch (const Error& he) {
    err << he.what() << "\n";
    return exit_code_for(he.code());
  } catch (const std::exception& ex) {
    err << ex.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace hops::cli
