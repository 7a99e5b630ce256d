// Copyright 2026 The PueLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: corpus synthesis, pretraining, fine-tuning runs,
// evaluation, extraction probes and tradeoff reports.
//
// Exit codes: 0 success, 2 invalid config, 3 no feasible checkpoint
// (report --require-feasible), 4 I/O or checkpoint failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "puelab/checkpoint.h"
#include "puelab/corpus.h"
#include "puelab/error.h"
#include "puelab/finetune.h"
#include "puelab/lab.h"
#include "puelab/metrics.h"

namespace {

namespace fs = std::filesystem;
using namespace puelab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

// Flags mirroring TrainConfig. Only flags given on the command line override
// the JSON config.
struct TrainFlags {
  std::string config_path;
  std::string method;
  double sigma = 0;
  double clip = 0;
  int rank = 0;
  double alpha = 0;
  double lr = 0;
  int epochs = 0;
  int batch_size = 0;
  int warmup = 0;
  std::uint64_t seed = 0;
  bool plain = false;

  CLI::Option* o_method = nullptr;
  CLI::Option* o_sigma = nullptr;
  CLI::Option* o_clip = nullptr;
  CLI::Option* o_rank = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_epochs = nullptr;
  CLI::Option* o_batch = nullptr;
  CLI::Option* o_warmup = nullptr;
  CLI::Option* o_seed = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file with config fields");
    o_method = app->add_option("--method", method, "fft, dp or lora");
    o_sigma = app->add_option("--sigma", sigma, "DP noise scale");
    o_clip = app->add_option("--clip", clip, "DP clipping threshold T");
    o_rank = app->add_option("--rank", rank, "LoRA rank r");
    o_alpha = app->add_option("--alpha", alpha, "LoRA alpha");
    o_lr = app->add_option("--lr", lr, "peak learning rate");
    o_epochs = app->add_option("--epochs", epochs, "training epochs");
    o_batch = app->add_option("--batch-size", batch_size, "batch size B");
    o_warmup = app->add_option("--warmup", warmup, "warmup steps");
    o_seed = app->add_option("--seed", seed, "master seed");
    app->add_flag("--plain-gradient", plain, "plain gradient step, no Adam");
  }

  bool seed_given() const { return o_seed->count() > 0; }

  nlohmann::json file_json() const {
    if (config_path.empty()) return nlohmann::json::object();
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot read " + config_path);
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
  }

  TrainConfig apply(TrainConfig base) const {
    const nlohmann::json j = file_json();
    const nlohmann::json& train_j =
        j.contains("train") ? j.at("train") : j;
    Method m = base.method;
    if (o_method->count()) {
      m = method_from_string(method);
    } else if (train_j.contains("method") && train_j["method"].is_string()) {
      m = method_from_string(train_j["method"].get<std::string>());
    }
    if (m != base.method) {
      const auto s = base.seed;
      base = TrainConfig::defaults_for(m);
      base.seed = s;
    }
    TrainConfig c = train_config_from_json(train_j, base);
    c.method = m;
    if (o_sigma->count()) c.dp.noise_scale = sigma;
    if (o_clip->count()) c.dp.clip_threshold = clip;
    if (o_rank->count()) c.lora.rank = rank;
    if (o_alpha->count()) c.lora.alpha = alpha;
    if (o_lr->count()) c.learning_rate = lr;
    if (o_epochs->count()) c.epochs = epochs;
    if (o_batch->count()) c.batch_size = batch_size;
    if (o_warmup->count()) c.warmup_steps = warmup;
    if (o_seed->count()) c.seed = seed;
    if (plain) c.optimizer = OptimizerKind::kPlain;
    c.validate();
    return c;
  }
};

// Where the fine-tuning documents come from.
struct DataFlags {
  std::string corpus_path;
  std::string dataset = "dialog";
  int n_docs = 200;
  double test_fraction = 0.2;

  void attach(CLI::App* app) {
    app->add_option("--corpus", corpus_path,
                    "corpus JSONL; synthesized from --seed when absent");
    app->add_option("--dataset", dataset, "dialog or bio")
        ->check(CLI::IsMember({"dialog", "bio"}));
    app->add_option("--n-docs", n_docs, "documents to synthesize");
    app->add_option("--test-fraction", test_fraction, "held-out share");
  }

  LabData load(const ModelConfig& model, std::uint64_t seed) const {
    if (!corpus_path.empty()) {
      return prepare_data(load_corpus(corpus_path), test_fraction, model, seed);
    }
    CorpusSpec spec;
    spec.dataset = dataset_tag_from_string(dataset);
    spec.n_docs = n_docs;
    spec.test_fraction = test_fraction;
    return prepare_data(spec, model, seed);
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

void log_line(const std::string& line) { std::cerr << line << std::endl; }

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

int cmd_synth(const std::string& dataset, int n_docs, std::uint64_t seed,
              const std::string& out) {
  if (n_docs < 1) throw ConfigError("--n-docs must be at least 1");
  const auto n = static_cast<std::size_t>(n_docs);
  Corpus corpus;
  switch (dataset_tag_from_string(dataset)) {
    case DatasetTag::kDialog:
      corpus = generate_dialog_corpus(seed, n);
      break;
    case DatasetTag::kBio:
      corpus = generate_bio_corpus(seed, n);
      break;
    case DatasetTag::kPretrain:
      corpus = generate_pretrain_corpus(seed, n);
      break;
  }
  if (out == "-") {
    write_corpus_jsonl(std::cout, corpus);
  } else {
    save_corpus(out, corpus);
  }
  return kExitOk;
}

int cmd_pretrain(const TrainFlags& flags, int n_docs, const std::string& out) {
  PretrainSpec spec;
  spec.n_docs = n_docs;
  TrainConfig base = PretrainSpec::default_config();
  if (flags.seed_given()) base.seed = flags.seed;
  spec.config = flags.apply(base);
  if (spec.config.method != Method::kFft) {
    throw ConfigError("pretraining uses full fine-tuning");
  }
  const ModelConfig model;
  const ModelState state = pretrain_base(model, spec, spec.config.seed, log_line);
  save_model(out, state,
             {{"pretrain",
               {{"n_docs", n_docs},
                {"config", train_config_to_json(spec.config)}}}});
  return kExitOk;
}

int cmd_train(const TrainFlags& flags, const DataFlags& data_flags,
              const std::string& base_path, const std::string& out) {
  TrainConfig c = flags.apply(TrainConfig::defaults_for(Method::kFft));
  const ModelState base = load_model(base_path);
  c.validate(base.config);
  const LabData data = data_flags.load(base.config, c.seed);
  const RunResult r = run_config(base, data, c, out, log_line);
  print_json({{"run_dir", r.directory},
              {"epochs", r.reports.size()},
              {"label", c.label()}});
  return kExitOk;
}

std::optional<ModelState> optional_base(const std::string& base_path) {
  if (base_path.empty()) return std::nullopt;
  return load_model(base_path);
}

int cmd_eval(const std::string& ckpt, const std::string& base_path,
             const DataFlags& data_flags, std::uint64_t seed) {
  const ModelState model = load_epoch_model(ckpt, optional_base(base_path));
  const LabData data = data_flags.load(model.config, seed);
  const SplitLosses tr = evaluate_split(model, data.train);
  const SplitLosses te = evaluate_split(model, data.test);
  print_json({{"checkpoint", ckpt},
              {"privacy", opt_json(tr.sensitive())},
              {"utility_loss", opt_json(te.nonsensitive())},
              {"loss_train_sensitive", opt_json(tr.sensitive())},
              {"loss_train_nonsensitive", opt_json(tr.nonsensitive())},
              {"loss_train_all", opt_json(tr.all())},
              {"loss_test_sensitive", opt_json(te.sensitive())},
              {"loss_test_nonsensitive", opt_json(te.nonsensitive())},
              {"loss_test_all", opt_json(te.all())},
              {"n_train_sensitive", tr.n_sensitive},
              {"n_train_nonsensitive", tr.n_nonsensitive},
              {"n_test_sensitive", te.n_sensitive},
              {"n_test_nonsensitive", te.n_nonsensitive}});
  return kExitOk;
}

int cmd_probe(const std::string& ckpt, const std::string& base_path,
              const DataFlags& data_flags, std::uint64_t seed,
              std::size_t prefix_len, const std::vector<std::string>& kind_names,
              int limit) {
  const ModelState model = load_epoch_model(ckpt, optional_base(base_path));
  const LabData data = data_flags.load(model.config, seed);
  std::vector<EntityKind> kinds;
  for (const auto& k : kind_names) kinds.push_back(entity_kind_from_string(k));
  std::span<const AnnotatedDocument> docs = data.split.train;
  if (limit > 0 && static_cast<std::size_t>(limit) < docs.size()) {
    docs = docs.first(static_cast<std::size_t>(limit));
  }
  const ProbeReport report = recollection_probe(model, docs, prefix_len, kinds);
  nlohmann::json rates = nlohmann::json::object();
  for (std::size_t len : {1, 2, 4, 8}) {
    rates[std::to_string(len)] = report.rate_at(len);
  }
  print_json({{"checkpoint", ckpt},
              {"spans", report.size()},
              {"prefix_len", prefix_len},
              {"exact_match_rate", report.exact_match_rate()},
              {"rate_at", rates}});
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out,
               std::optional<double> min_privacy, bool require_feasible) {
  std::vector<TradeoffPoint> points;
  for (const auto& dir : run_dirs) {
    const fs::path p(dir);
    const auto reports = load_metrics_csv((p / "metrics.csv").string());
    const auto pts = tradeoff_points(p.filename().string(), reports);
    points.insert(points.end(), pts.begin(), pts.end());
  }
  if (points.empty()) throw ConfigError("no tradeoff points in the given runs");
  fs::create_directories(out);
  emit_tradeoff_plot(points, (fs::path(out) / "tradeoff.svg").string(),
                     (fs::path(out) / "tradeoff.csv").string());
  nlohmann::json result = {{"points", points.size()},
                           {"svg", (fs::path(out) / "tradeoff.svg").string()}};
  int code = kExitOk;
  if (min_privacy) {
    const auto best = pareto_select(points, *min_privacy);
    if (best) {
      result["selected"] = {{"tag", best->tag},
                            {"method", best->method},
                            {"epoch", best->epoch},
                            {"privacy", best->privacy},
                            {"utility_loss", best->utility_loss},
                            {"flops_cumulative", best->flops_cumulative}};
    } else {
      result["selected"] = nullptr;
      if (require_feasible) code = kExitInfeasible;
    }
  }
  print_json(result);
  return code;
}

int cmd_run(const std::string& plan_path, const std::string& out,
            const TrainFlags& flags, int sweep_epochs, int n_docs,
            int pretrain_docs, const std::string& dataset,
            const std::string& base_path) {
  const std::uint64_t seed = flags.seed_given() ? flags.seed : 0;
  ExperimentPlan plan = ExperimentPlan::defaults(out, seed);
  if (!plan_path.empty()) {
    std::ifstream in(plan_path);
    if (!in) throw IoError("cannot read " + plan_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(plan_path + ": " + e.what());
    }
    plan = plan_from_json(j, plan);
  }
  if (flags.seed_given()) {
    plan.seed = seed;
    plan.pretrain.config.seed = seed;
    for (auto& c : plan.sweep) c.seed = seed;
  }
  if (sweep_epochs > 0) {
    for (auto& c : plan.sweep) c.epochs = sweep_epochs;
  }
  if (n_docs > 0) plan.corpus.n_docs = n_docs;
  if (pretrain_docs > 0) plan.pretrain.n_docs = pretrain_docs;
  if (!dataset.empty()) plan.corpus.dataset = dataset_tag_from_string(dataset);
  if (!base_path.empty()) plan.base_model = base_path;
  plan.output_dir = out;
  plan.log = log_line;
  const ExperimentResult r = run_experiment(plan);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) runs.push_back(run.directory);
  print_json({{"output_dir", r.output_dir},
              {"base_model", r.base_model_path},
              {"runs", runs}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy, utility and efficiency lab for fine-tuning methods"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_dataset = "dialog";
  int synth_docs = 200;
  synth->add_option("--dataset", synth_dataset, "dialog, bio or pretrain")
      ->check(CLI::IsMember({"dialog", "bio", "pretrain"}));
  synth->add_option("--n-docs", synth_docs, "number of documents");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out, "output JSONL path, - for stdout")
      ->required();

  auto* pretrain = app.add_subcommand("pretrain", "pretrain a base model");
  TrainFlags pretrain_flags;
  pretrain_flags.attach(pretrain);
  int pretrain_docs = 2000;
  pretrain->add_option("--n-docs", pretrain_docs, "pretraining documents");
  pretrain->add_option("--out", out, "output checkpoint")->required();

  auto* train = app.add_subcommand("train", "fine-tune one config from a base");
  TrainFlags train_flags;
  DataFlags train_data;
  std::string base_path;
  train_flags.attach(train);
  train_data.attach(train);
  train->add_option("--base", base_path, "base model checkpoint")->required();
  train->add_option("--out", out, "run directory")->required();

  auto* eval = app.add_subcommand("eval", "masked losses of a checkpoint");
  std::string ckpt;
  DataFlags eval_data;
  eval_data.attach(eval);
  eval->add_option("--checkpoint", ckpt, "model or epoch checkpoint")
      ->required();
  eval->add_option("--base", base_path, "base model (LoRA checkpoints)");
  eval->add_option("--seed", seed, "seed used for corpus and split");

  auto* probe = app.add_subcommand("probe", "prefix-prompt extraction probe");
  DataFlags probe_data;
  std::size_t prefix_len = 20;
  std::vector<std::string> kinds;
  int probe_limit = 0;
  probe_data.attach(probe);
  probe->add_option("--checkpoint", ckpt, "model or epoch checkpoint")
      ->required();
  probe->add_option("--base", base_path, "base model (LoRA checkpoints)");
  probe->add_option("--seed", seed, "seed used for corpus and split");
  probe->add_option("--prefix-len", prefix_len, "bytes preceding each span");
  probe->add_option("--kinds", kinds, "entity kinds to probe");
  probe->add_option("--limit", probe_limit, "probe only the first N documents");

  auto* report = app.add_subcommand("report", "tradeoff plot and selection");
  std::vector<std::string> run_dirs;
  double min_privacy = 0.0;
  bool require_feasible = false;
  report->add_option("runs", run_dirs, "run directories holding metrics.csv")
      ->required();
  report->add_option("--out", out, "output directory")->required();
  auto* o_min = report->add_option("--min-privacy", min_privacy,
                                   "privacy floor for checkpoint selection");
  report->add_flag("--require-feasible", require_feasible,
                   "exit 3 when no checkpoint meets the floor");

  auto* run = app.add_subcommand("run", "pretrain and run a full sweep");
  TrainFlags run_flags;
  std::string plan_path;
  int sweep_epochs = 0;
  int run_docs = 0;
  int run_pretrain_docs = 0;
  std::string run_dataset;
  run->add_option("--plan", plan_path, "experiment plan JSON");
  run->add_option("--out", out, "output directory")->required();
  run_flags.o_seed = run->add_option("--seed", run_flags.seed, "master seed");
  run->add_option("--epochs", sweep_epochs, "epochs for every sweep config");
  run->add_option("--n-docs", run_docs, "fine-tuning documents");
  run->add_option("--pretrain-docs", run_pretrain_docs, "pretraining documents");
  run->add_option("--dataset", run_dataset, "dialog or bio");
  run->add_option("--base", base_path, "reuse this base model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(synth_dataset, synth_docs, seed, out);
    if (*pretrain) return cmd_pretrain(pretrain_flags, pretrain_docs, out);
    if (*train) return cmd_train(train_flags, train_data, base_path, out);
    if (*eval) return cmd_eval(ckpt, base_path, eval_data, seed);
    if (*probe) {
      return cmd_probe(ckpt, base_path, probe_data, seed, prefix_len, kinds,
                       probe_limit);
    }
    if (*report) {
      return cmd_report(run_dirs, out,
                        o_min->count() ? std::optional<double>(min_privacy)
                                       : std::nullopt,
                        require_feasible);
    }
    if (*run) {
      return cmd_run(plan_path, out, run_flags, sweep_epochs, run_docs,
                     run_pretrain_docs, run_dataset, base_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DecodeError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
