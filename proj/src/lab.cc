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

#include "puelab/lab.h"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "puelab/checkpoint.h"
#include "puelab/efficiency.h"
#include "puelab/error.h"
#include "text_file.h"

namespace puelab {
namespace {

namespace fs = std::filesystem;

constexpr const char* kResumeFile = "resume.ckpt";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kConfigFile = "config.json";
constexpr const char* kFlopsFile = "flops.json";

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory " + dir);
  }
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  internal::write_text_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
  const std::string text = internal::read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void emit(const std::function<void(const std::string&)>& log,
          const std::string& line) {
  if (log) log(line);
}

std::span<double> trainable_values(TrainState& state) {
  if (state.adapters) return state.adapters->values;
  return state.model.values;
}

std::span<const double> trainable_values(const TrainState& state) {
  if (state.adapters) return state.adapters->values;
  return state.model.values;
}

const ParamLayout& trainable_layout(const TrainState& state) {
  return state.adapters ? state.adapters->layout : state.model.layout;
}

std::size_t adapter_param_count(const ModelState& base,
                                const TrainConfig& config) {
  if (config.method != Method::kLora) return 0;
  const auto targets = config.lora.targets.empty()
                           ? default_lora_targets(base.config)
                           : config.lora.targets;
  std::size_t n = 0;
  for (const auto& t : targets) {
    const auto& e = base.layout.find(t);
    n += static_cast<std::size_t>(config.lora.rank) * (e.shape[0] + e.shape[1]);
  }
  return n;
}

void save_resume(const std::string& path, const TrainState& state,
                 const TrainConfig& config, double flops_cumulative) {
  const auto values = trainable_values(state);
  const std::size_t n = values.size();
  Checkpoint ck;
  ck.meta = {{"kind", "resume"},
             {"method", std::string(to_string(config.method))},
             {"epochs_done", state.epochs_done},
             {"optimizer_step", state.optimizer.step},
             {"total_steps", state.total_steps},
             {"flops_cumulative", flops_cumulative},
             {"config", train_config_to_json(config)}};
  ck.layout.add("params", {n});
  ck.layout.add("adam.m", {n});
  ck.layout.add("adam.v", {n});
  ck.values.reserve(3 * n);
  ck.values.insert(ck.values.end(), values.begin(), values.end());
  ck.values.insert(ck.values.end(), state.optimizer.m.begin(),
                   state.optimizer.m.end());
  ck.values.insert(ck.values.end(), state.optimizer.v.begin(),
                   state.optimizer.v.end());
  save_checkpoint(path, ck);
}

// Restores a state built by make_train_state for the same config.
double load_resume(const std::string& path, TrainState& state,
                   const TrainConfig& config) {
  const Checkpoint ck = load_checkpoint(path);
  auto fail = [&](const std::string& why) -> CheckpointError {
    return CheckpointError(path + ": " + why);
  };
  try {
    if (ck.meta.at("kind") != "resume") throw fail("not a resume checkpoint");
    if (ck.meta.at("config") != train_config_to_json(config)) {
      throw fail("written for a different training config");
    }
    auto values = trainable_values(state);
    const std::size_t n = values.size();
    const ParamLayout& layout = ck.layout;
    if (!layout.contains("params") || !layout.contains("adam.m") ||
        !layout.contains("adam.v") || layout.find("params").size != n ||
        layout.find("adam.m").size != n || layout.find("adam.v").size != n) {
      throw fail("array sizes do not match the model");
    }
    const auto epochs_done = ck.meta.at("epochs_done").get<int>();
    const auto total_steps = ck.meta.at("total_steps").get<std::int64_t>();
    const auto step = ck.meta.at("optimizer_step").get<std::int64_t>();
    if (epochs_done < 0 || epochs_done > config.epochs ||
        total_steps != state.total_steps || step < 0 || step > total_steps) {
      throw fail("inconsistent progress counters");
    }
    auto copy = [&](const char* name, std::span<double> dst) {
      const auto& e = layout.find(name);
      std::copy_n(ck.values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                  e.size, dst.begin());
    };
    copy("params", values);
    copy("adam.m", state.optimizer.m);
    copy("adam.v", state.optimizer.v);
    state.optimizer.step = step;
    state.epochs_done = epochs_done;
    return ck.meta.at("flops_cumulative").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad metadata: ") + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Plans

TrainConfig PretrainSpec::default_config() {
  TrainConfig c = TrainConfig::defaults_for(Method::kFft);
  c.learning_rate = 1e-3;
  c.batch_size = 16;
  c.epochs = 3;
  c.warmup_steps = 10;
  return c;
}

std::vector<TrainConfig> ExperimentPlan::default_sweep(std::uint64_t seed) {
  std::vector<TrainConfig> sweep;
  for (Method m : {Method::kFft, Method::kDp, Method::kLora}) {
    TrainConfig c = TrainConfig::defaults_for(m);
    c.seed = seed;
    sweep.push_back(c);
  }
  return sweep;
}

ExperimentPlan ExperimentPlan::defaults(std::string output_dir,
                                        std::uint64_t seed) {
  ExperimentPlan plan;
  plan.output_dir = std::move(output_dir);
  plan.seed = seed;
  plan.pretrain.config.seed = seed;
  plan.sweep = default_sweep(seed);
  return plan;
}

void ExperimentPlan::validate() const {
  if (output_dir.empty()) throw ConfigError("output directory is empty");
  if (corpus.dataset == DatasetTag::kPretrain) {
    throw ConfigError("fine-tuning corpus must be dialog or bio");
  }
  if (corpus.n_docs < 2) throw ConfigError("corpus needs at least 2 documents");
  if (!(corpus.test_fraction > 0.0 && corpus.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  model.validate();
  if (!base_model) {
    if (pretrain.n_docs < 1) {
      throw ConfigError("pretraining needs at least 1 document");
    }
    pretrain.config.validate(model);
  }
  if (sweep.empty()) throw ConfigError("sweep has no training configs");
  std::set<std::string> labels;
  for (const auto& c : sweep) {
    c.validate(model);
    if (!labels.insert(c.label()).second) {
      throw ConfigError("two sweep configs share the label " + c.label());
    }
  }
}

nlohmann::json plan_to_json(const ExperimentPlan& plan) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& c : plan.sweep) sweep.push_back(train_config_to_json(c));
  nlohmann::json j = {
      {"corpus",
       {{"dataset", std::string(to_string(plan.corpus.dataset))},
        {"n_docs", plan.corpus.n_docs},
        {"test_fraction", plan.corpus.test_fraction}}},
      {"model", model_config_to_json(plan.model)},
      {"pretrain",
       {{"n_docs", plan.pretrain.n_docs},
        {"config", train_config_to_json(plan.pretrain.config)}}},
      {"sweep", sweep},
      {"seed", plan.seed}};
  if (plan.base_model) j["base_model"] = *plan.base_model;
  return j;
}

ExperimentPlan plan_from_json(const nlohmann::json& j, ExperimentPlan base) {
  if (!j.is_object()) throw ConfigError("plan must be a JSON object");
  try {
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corpus")) {
      const auto& c = j.at("corpus");
      if (c.contains("dataset")) {
        base.corpus.dataset =
            dataset_tag_from_string(c.at("dataset").get<std::string>());
      }
      if (c.contains("n_docs")) base.corpus.n_docs = c.at("n_docs").get<int>();
      if (c.contains("test_fraction")) {
        base.corpus.test_fraction = c.at("test_fraction").get<double>();
      }
    }
    if (j.contains("model")) base.model = model_config_from_json(j.at("model"));
    if (j.contains("pretrain")) {
      const auto& p = j.at("pretrain");
      if (p.contains("n_docs")) base.pretrain.n_docs = p.at("n_docs").get<int>();
      if (p.contains("config")) {
        base.pretrain.config =
            train_config_from_json(p.at("config"), base.pretrain.config);
      }
    }
    if (j.contains("sweep")) {
      base.sweep.clear();
      for (const auto& c : j.at("sweep")) {
        TrainConfig start;
        if (c.contains("method")) {
          start = TrainConfig::defaults_for(
              method_from_string(c.at("method").get<std::string>()));
        }
        start.seed = base.seed;
        base.sweep.push_back(train_config_from_json(c, start));
      }
    }
    if (j.contains("base_model")) {
      base.base_model = j.at("base_model").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad plan: ") + e.what());
  }
  return base;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = master ^ h;  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

LabData prepare_data(const CorpusSpec& spec, const ModelConfig& model,
                     std::uint64_t seed) {
  LabData data;
  const auto n = static_cast<std::size_t>(spec.n_docs);
  const std::uint64_t corpus_seed = derive_seed(seed, "corpus");
  switch (spec.dataset) {
    case DatasetTag::kDialog:
      data.corpus = generate_dialog_corpus(corpus_seed, n);
      break;
    case DatasetTag::kBio:
      data.corpus = generate_bio_corpus(corpus_seed, n);
      break;
    case DatasetTag::kPretrain:
      throw ConfigError("fine-tuning corpus must be dialog or bio");
  }
  return prepare_data(std::move(data.corpus), spec.test_fraction, model, seed);
}

LabData prepare_data(Corpus corpus, double test_fraction,
                     const ModelConfig& model, std::uint64_t seed) {
  LabData data;
  data.corpus = std::move(corpus);
  data.split = split_train_test(data.corpus, test_fraction,
                                derive_seed(seed, "split"));
  const auto ctx = static_cast<std::size_t>(model.context_len);
  data.train = encode_corpus(data.split.train, SplitTag::kTrain, ctx);
  data.test = encode_corpus(data.split.test, SplitTag::kTest, ctx);
  return data;
}

std::vector<TokenBatch> pretrain_windows(const PretrainSpec& spec,
                                         const ModelConfig& model,
                                         std::uint64_t seed) {
  const Corpus docs = generate_pretrain_corpus(
      derive_seed(seed, "pretrain-corpus"),
      static_cast<std::size_t>(spec.n_docs));
  return encode_corpus(docs, SplitTag::kTrain,
                       static_cast<std::size_t>(model.context_len));
}

ModelState pretrain_base(const ModelConfig& model, const PretrainSpec& spec,
                         std::uint64_t seed,
                         const std::function<void(const std::string&)>& log) {
  const auto windows = pretrain_windows(spec, model, seed);
  TrainState state = make_train_state(init_params(model, derive_seed(seed, "init")),
                                      spec.config, windows.size());
  for (int e = 0; e < spec.config.epochs; ++e) {
    const EpochOutcome out = train_epoch(state, windows, spec.config);
    std::ostringstream line;
    line << "pretrain epoch " << state.epochs_done << "/" << spec.config.epochs
         << " mean loss " << out.mean_loss;
    emit(log, line.str());
  }
  return state.model;
}

// ---------------------------------------------------------------------------
// Runs

nlohmann::json flops_report(const ModelState& base,
                            std::span<const TokenBatch> train,
                            const TrainConfig& config) {
  if (train.empty()) throw ConfigError("flops report needs training windows");
  const auto b = std::min(train.size(), static_cast<std::size_t>(config.batch_size));
  const auto batch = train.first(b);
  double tokens = 0.0;
  for (const auto& s : batch) tokens += static_cast<double>(s.num_targets());
  const double n = static_cast<double>(base.num_params());
  const double na = static_cast<double>(adapter_param_count(base, config));
  const CostEstimate est = flops_per_method(config.method, tokens, n, na,
                                            static_cast<double>(b));
  const double measured =
      2.0 * static_cast<double>(measure_one_step(base, batch, config));
  return nlohmann::json{{"method", std::string(to_string(config.method))},
                        {"analytic_per_step", est.flops_per_step},
                        {"measured_per_step", measured},
                        {"ratio_to_fft", est.relative_to_fft},
                        {"memory_values",
                         memory_estimate(config.method, n, na,
                                         static_cast<double>(config.batch_size))}};
}

void save_epoch_checkpoint(const std::string& path, const TrainState& state,
                           const TrainConfig& config, int epoch) {
  Checkpoint ck;
  ck.meta = {{"kind", "epoch"},
             {"method", std::string(to_string(config.method))},
             {"epoch", epoch},
             {"model_config", model_config_to_json(state.model.config)}};
  if (state.adapters) {
    ck.meta["lora"] = {{"rank", state.adapters->rank},
                       {"alpha", state.adapters->alpha},
                       {"targets", state.adapters->targets}};
  }
  ck.layout = trainable_layout(state);
  const auto values = trainable_values(state);
  ck.values.assign(values.begin(), values.end());
  save_checkpoint(path, ck);
}

ModelState load_epoch_model(const std::string& path,
                            const std::optional<ModelState>& base) {
  Checkpoint ck = load_checkpoint(path);
  try {
    const std::string kind = ck.meta.value("kind", "");
    if (kind == "model") return load_model(path);
    if (kind != "epoch") throw CheckpointError(path + ": not a model checkpoint");
    const ModelConfig config = model_config_from_json(ck.meta.at("model_config"));
    if (!ck.meta.contains("lora")) {
      ModelState state{config, model_layout(config), std::move(ck.values)};
      if (!(state.layout == ck.layout)) {
        throw CheckpointError(path + ": layout does not match model_config");
      }
      return state;
    }
    if (!base) throw ConfigError(path + ": LoRA checkpoint needs its base model");
    if (!(base->config == config)) {
      throw CheckpointError(path + ": base model config differs");
    }
    const auto& lora = ck.meta.at("lora");
    LoraAdapters ad = lora_init(*base, lora.at("rank").get<int>(),
                                lora.at("alpha").get<double>(),
                                lora.at("targets").get<std::vector<std::string>>(),
                                0);
    if (!(ad.layout == ck.layout)) {
      throw CheckpointError(path + ": adapter layout mismatch");
    }
    ad.values = std::move(ck.values);
    return lora_effective(*base, ad);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": bad metadata: " + e.what());
  }
}

RunResult run_config(const ModelState& base, const LabData& data,
                     const TrainConfig& config, const std::string& run_dir,
                     const std::function<void(const std::string&)>& log) {
  ensure_directory(run_dir);
  const std::string config_path = join(run_dir, kConfigFile);
  const nlohmann::json config_json = train_config_to_json(config);
  if (fs::exists(config_path) && read_json(config_path) != config_json) {
    throw ConfigError(run_dir + " already holds a different config");
  }
  write_json(config_path, config_json);
  write_json(join(run_dir, kFlopsFile), flops_report(base, data.train, config));

  RunResult result{config, run_dir, {}};
  TrainState state = make_train_state(base, config, data.train.size());
  double flops = 0.0;
  const std::string resume_path = join(run_dir, kResumeFile);
  const std::string metrics_path = join(run_dir, kMetricsFile);
  if (fs::exists(resume_path)) {
    flops = load_resume(resume_path, state, config);
    auto rows = load_metrics_csv(metrics_path);
    const auto done = static_cast<std::size_t>(state.epochs_done);
    if (rows.size() < done) {
      throw CheckpointError(metrics_path + " has fewer rows than completed epochs");
    }
    rows.resize(done);
    result.reports = std::move(rows);
    emit(log, config.label() + ": resuming after epoch " +
                  std::to_string(state.epochs_done));
  }

  while (state.epochs_done < config.epochs) {
    const EpochOutcome out = train_epoch(state, data.train, config);
    flops += out.analytic_flops;
    const int epoch = state.epochs_done;
    const EpochReport report =
        epoch_report(evaluation_model(state), data.train, data.test, config,
                     epoch, out.final_lr, flops, state.optimizer.step);
    save_epoch_checkpoint(join(run_dir, "epoch_" + std::to_string(epoch) + ".ckpt"),
                          state, config, epoch);
    result.reports.push_back(report);
    save_metrics_csv(metrics_path, result.reports);
    save_resume(resume_path, state, config, flops);

    std::ostringstream line;
    line << config.label() << " epoch " << epoch << "/" << config.epochs
         << " train_loss " << out.mean_loss << " privacy "
         << report.loss_train_sensitive.value_or(0.0) << " utility "
         << report.loss_test_nonsensitive.value_or(0.0);
    emit(log, line.str());
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  ensure_directory(plan.output_dir);
  write_json(join(plan.output_dir, "plan.json"), plan_to_json(plan));

  const LabData data = prepare_data(plan.corpus, plan.model, plan.seed);
  save_corpus(join(plan.output_dir, "corpus.jsonl"), data.corpus);
  nlohmann::json split = {{"train", nlohmann::json::array()},
                          {"test", nlohmann::json::array()}};
  for (const auto& d : data.split.train) split["train"].push_back(d.doc_id);
  for (const auto& d : data.split.test) split["test"].push_back(d.doc_id);
  write_json(join(plan.output_dir, "split.json"), split);

  ExperimentResult result;
  result.output_dir = plan.output_dir;
  const std::string base_dir = join(plan.output_dir, "base");
  ensure_directory(base_dir);
  result.base_model_path = join(base_dir, "model.ckpt");
  ModelState base;
  if (plan.base_model) {
    base = load_model(*plan.base_model);
    save_model(result.base_model_path, base, {{"source", *plan.base_model}});
  } else if (fs::exists(result.base_model_path)) {
    base = load_model(result.base_model_path);
    emit(plan.log, "loaded base model from " + result.base_model_path);
  } else {
    base = pretrain_base(plan.model, plan.pretrain, plan.seed, plan.log);
    save_model(result.base_model_path, base,
               {{"pretrain",
                 {{"n_docs", plan.pretrain.n_docs},
                  {"config", train_config_to_json(plan.pretrain.config)}}}});
  }
  if (!(base.config == plan.model)) {
    throw ConfigError("base model config differs from the plan's model config");
  }

  std::vector<TradeoffPoint> points;
  for (const auto& config : plan.sweep) {
    RunResult run = run_config(base, data, config,
                               join(plan.output_dir, config.label()), plan.log);
    const auto pts = tradeoff_points(config.label(), run.reports);
    points.insert(points.end(), pts.begin(), pts.end());
    result.runs.push_back(std::move(run));
  }
  if (!points.empty()) {
    emit_tradeoff_plot(points, join(plan.output_dir, "tradeoff.svg"),
                       join(plan.output_dir, "tradeoff.csv"));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint selection

std::vector<TradeoffPoint> tradeoff_points(std::string_view tag,
                                           std::span<const EpochReport> reports) {
  std::vector<TradeoffPoint> out;
  for (const auto& r : reports) {
    if (!r.loss_train_sensitive || !r.loss_test_nonsensitive) continue;
    out.push_back(TradeoffPoint{r.method, std::string(tag), r.epoch,
                                *r.loss_train_sensitive,
                                *r.loss_test_nonsensitive, r.flops_cumulative});
  }
  return out;
}

std::optional<TradeoffPoint> pareto_select(std::span<const TradeoffPoint> points,
                                           double min_privacy) {
  if (points.empty()) throw ConfigError("pareto_select needs at least one point");
  const TradeoffPoint* best = nullptr;
  for (const auto& p : points) {
    if (!(p.privacy >= min_privacy)) continue;
    if (best == nullptr || p.utility_loss < best->utility_loss ||
        (p.utility_loss == best->utility_loss &&
         (p.privacy > best->privacy ||
          (p.privacy == best->privacy && p.epoch < best->epoch)))) {
      best = &p;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

// ---------------------------------------------------------------------------
// Recollection probe

double ProbeReport::exact_match_rate() const {
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.generated == r.value ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double ProbeReport::rate_at(std::size_t len) const {
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : results) {
    const std::size_t n = std::min(len, r.value.size());
    hits += r.generated.compare(0, n, r.value, 0, n) == 0 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

ProbeReport recollection_probe(const ModelState& model,
                               std::span<const AnnotatedDocument> docs,
                               std::size_t prefix_len,
                               std::span<const EntityKind> kinds) {
  if (prefix_len == 0) throw ConfigError("prefix_len must be at least 1");
  const std::size_t per_window =
      static_cast<std::size_t>(model.config.context_len) - 1;
  ProbeReport report;
  for (const auto& doc : docs) {
    for (const auto& span : doc.spans) {
      if (!kinds.empty() &&
          std::find(kinds.begin(), kinds.end(), span.kind) == kinds.end()) {
        continue;
      }
      const std::size_t window_start = span.start / per_window * per_window;
      const std::size_t begin =
          std::max(window_start, span.start > prefix_len ? span.start - prefix_len
                                                         : std::size_t{0});
      std::vector<TokenId> prompt{kBos};
      for (std::size_t i = begin; i < span.start; ++i) {
        prompt.push_back(static_cast<unsigned char>(doc.text[i]));
      }
      const std::size_t n = span.end - span.start;
      const auto out = greedy_generate(model, prompt, n);
      ProbeResult r;
      r.doc_id = doc.doc_id;
      r.kind = span.kind;
      r.value = doc.text.substr(span.start, n);
      // BOS has no byte; NUL never occurs inside a span value.
      for (std::size_t i = prompt.size(); i < out.size(); ++i) {
        r.generated.push_back(out[i] < 256 ? static_cast<char>(out[i]) : '\0');
      }
      report.results.push_back(std::move(r));
    }
  }
  return report;
}

}  // namespace puelab
