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

#ifndef PUELAB_LAB_H_
#define PUELAB_LAB_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puelab/corpus.h"
#include "puelab/finetune.h"
#include "puelab/metrics.h"
#include "puelab/model.h"
#include "puelab/tokens.h"

namespace puelab {

struct CorpusSpec {
  DatasetTag dataset = DatasetTag::kDialog;
  int n_docs = 200;
  double test_fraction = 0.2;
};

struct PretrainSpec {
  int n_docs = 2000;
  TrainConfig config = default_config();

  // Full fine-tuning for 3 epochs at learning rate 1e-3, batch 16.
  static TrainConfig default_config();
};

struct ExperimentPlan {
  CorpusSpec corpus;
  ModelConfig model;
  PretrainSpec pretrain;
  std::vector<TrainConfig> sweep;
  std::string output_dir;
  std::uint64_t seed = 0;
  // When set, the base model is loaded from here instead of pretrained.
  std::optional<std::string> base_model;
  // Logs one line per finished epoch when set.
  std::function<void(const std::string&)> log;

  // fft; dp with sigma 0.1 and T 1e-2; lora with r = alpha = 16. Every config
  // and the pretraining run take `seed`.
  static std::vector<TrainConfig> default_sweep(std::uint64_t seed);
  static ExperimentPlan defaults(std::string output_dir, std::uint64_t seed);

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

nlohmann::json plan_to_json(const ExperimentPlan& plan);
// Fields missing from `j` keep the values in `base`. The sweep, when given,
// replaces the base sweep; its configs start from their method's defaults.
ExperimentPlan plan_from_json(const nlohmann::json& j, ExperimentPlan base);

// Documents and encoded windows shared by every config of a plan.
struct LabData {
  Corpus corpus;
  CorpusSplit split;
  std::vector<TokenBatch> train;
  std::vector<TokenBatch> test;
};

// Seeds for corpus generation, splitting and pretraining derived from one
// master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);

LabData prepare_data(const CorpusSpec& spec, const ModelConfig& model,
                     std::uint64_t seed);
// Splits and encodes an existing corpus.
LabData prepare_data(Corpus corpus, double test_fraction,
                     const ModelConfig& model, std::uint64_t seed);

// Pretraining corpus windows for `seed`.
std::vector<TokenBatch> pretrain_windows(const PretrainSpec& spec,
                                         const ModelConfig& model,
                                         std::uint64_t seed);

// Initializes a model from `seed` and trains it on the pretraining corpus.
ModelState pretrain_base(const ModelConfig& model, const PretrainSpec& spec,
                         std::uint64_t seed,
                         const std::function<void(const std::string&)>& log = {});

struct RunResult {
  TrainConfig config;
  std::string directory;
  std::vector<EpochReport> reports;
};

struct ExperimentResult {
  std::string output_dir;
  std::string base_model_path;
  std::vector<RunResult> runs;
};

// Trains one config from `base`, writing into `run_dir`:
//   config.json, epoch_{k}.ckpt, metrics.csv, flops.json, resume.ckpt.
// A run directory holding resume.ckpt continues after its last complete
// epoch; a corrupt resume checkpoint raises CheckpointError.
RunResult run_config(const ModelState& base, const LabData& data,
                     const TrainConfig& config, const std::string& run_dir,
                     const std::function<void(const std::string&)>& log = {});

// Writes corpus.jsonl and base/model.ckpt (pretrained or copied), runs every
// config into <output_dir>/<label>, then emits tradeoff.svg and tradeoff.csv.
ExperimentResult run_experiment(const ExperimentPlan& plan);

// Writes flops.json for `config` using the first batch of `train`.
nlohmann::json flops_report(const ModelState& base,
                            std::span<const TokenBatch> train,
                            const TrainConfig& config);

// Trainable arrays of the state after an epoch: model weights for fft and
// dp, adapter factors for lora.
void save_epoch_checkpoint(const std::string& path, const TrainState& state,
                           const TrainConfig& config, int epoch);

// Rebuilds the evaluated model from an epoch checkpoint; lora checkpoints
// need the base they were trained from.
ModelState load_epoch_model(const std::string& path,
                            const std::optional<ModelState>& base = {});

struct TradeoffPoint {
  std::string method;
  std::string tag;  // run label, e.g. "dp_sigma0.1"
  int epoch = 0;
  double privacy = 0.0;       // loss_train_sensitive
  double utility_loss = 0.0;  // loss_test_nonsensitive
  double flops_cumulative = 0.0;

  friend bool operator==(const TradeoffPoint&, const TradeoffPoint&) = default;
};

// Reports lacking either loss are skipped.
std::vector<TradeoffPoint> tradeoff_points(std::string_view tag,
                                           std::span<const EpochReport> reports);

// Among points with privacy >= min_privacy, the one with least utility_loss;
// ties go to higher privacy, then earlier epoch. Empty when none qualifies.
// Throws ConfigError for an empty input.
std::optional<TradeoffPoint> pareto_select(std::span<const TradeoffPoint> points,
                                           double min_privacy);

// SVG with utility loss on x and privacy on y, one epoch-ordered arrow chain
// per run, plus the plotted values as CSV. Throws IoError on write failure.
void emit_tradeoff_plot(std::span<const TradeoffPoint> points,
                        const std::string& svg_path,
                        const std::string& csv_path);

std::vector<TradeoffPoint> read_tradeoff_csv(const std::string& path);

struct ProbeResult {
  std::string doc_id;
  EntityKind kind = EntityKind::kName;
  std::string value;
  std::string generated;  // raw bytes, same length as value
};

struct ProbeReport {
  std::vector<ProbeResult> results;

  std::size_t size() const { return results.size(); }
  // Share of spans reproduced in full; 0 when there are none.
  double exact_match_rate() const;
  // Share of spans whose first min(len, |value|) bytes were reproduced.
  double rate_at(std::size_t len) const;
};

// For every span of the selected kinds (all kinds when empty), prompts with
// BOS followed by the prefix_len bytes preceding the span, clipped to the
// training window holding the span start, and greedily decodes |value| bytes.
// Throws ConfigError when prefix_len is 0.
ProbeReport recollection_probe(const ModelState& model,
                               std::span<const AnnotatedDocument> docs,
                               std::size_t prefix_len,
                               std::span<const EntityKind> kinds = {});

}  // namespace puelab

#endif  // PUELAB_LAB_H_
