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

#ifndef PUELAB_FINETUNE_H_
#define PUELAB_FINETUNE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "puelab/model.h"
#include "puelab/tokens.h"

namespace puelab {

enum class Method { kFft, kDp, kLora };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

// kPlain is W <- W - lr * g, used to check the update rules in isolation.
enum class OptimizerKind { kAdam, kPlain };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct DpConfig {
  double noise_scale = 0.1;      // sigma
  double clip_threshold = 1e-2;  // T; +inf disables clipping
};

struct LoraConfig {
  int rank = 16;
  double alpha = 16.0;
  // Weight matrices to adapt; empty means every attention Q/K/V/O projection.
  std::vector<std::string> targets;
};

struct TrainConfig {
  Method method = Method::kFft;
  double learning_rate = 2.5e-4;
  int batch_size = 16;
  int epochs = 50;
  int warmup_steps = 10;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  DpConfig dp;
  LoraConfig lora;

  // Learning rate and batch size defaults per method.
  static TrainConfig defaults_for(Method method);

  // Throws ConfigError when a field is out of range. With a model config the
  // LoRA rank is also checked against every targeted matrix.
  void validate() const;
  void validate(const ModelConfig& model) const;

  // Short run-directory label, e.g. "dp_sigma0.1" or "lora_r16_a16".
  std::string label() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
// Fields missing from `j` keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j,
                                   TrainConfig base = {});

// Linear warmup from 0 to base_lr over `warmup` steps, then linear decay to 0
// at total_steps.
double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr,
                   std::int64_t warmup);

// grad / max(1, ||grad||_2 / T), with the norm taken over all arrays.
GradientSet clip(const GradientSet& grad, double threshold);

// Seeded Gaussian source for DP noise.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed, std::uint64_t stream = 0);
  double gaussian(double stddev);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// grad + N(0, sigma^2 T^2) independently per coordinate; sigma == 0 returns
// grad unchanged without drawing.
GradientSet add_noise(const GradientSet& grad, double sigma, double threshold,
                      NoiseStream& noise);

// Clipped per-sample gradients summed in the order they are added.
class ClippedSum {
 public:
  ClippedSum(const ParamLayout& layout, double threshold);

  // Returns the pre-clip norm of `grad`.
  double add(const GradientSet& grad, OpCounter* counter = nullptr);
  std::size_t count() const { return count_; }

  // Noise((1/B) * sum). `batch_size` is the configured B even for a short
  // final batch.
  GradientSet finish(int batch_size, double sigma, NoiseStream& noise,
                     OpCounter* counter = nullptr) const;

 private:
  GradientSet sum_;
  double threshold_;
  std::size_t count_ = 0;
};

// Convenience wrapper over ClippedSum for already materialized gradients.
GradientSet dp_aggregate(std::span<const GradientSet> per_sample,
                         int batch_size, double sigma, double threshold,
                         NoiseStream& noise);

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  static OptimizerState zeros(std::size_t n);
};

// One update of `params` in place (Adam with bias correction or plain).
void optimizer_update(std::span<double> params, std::span<const double> grad,
                      OptimizerState& opt, OptimizerKind kind, double lr);

struct StepStats {
  double loss = 0.0;          // mean over the batch of window losses
  double lr = 0.0;
  std::size_t samples = 0;
  std::size_t tokens = 0;     // next-token targets processed
  std::size_t clipped = 0;    // DP only: samples whose norm exceeded T
};

StepStats fft_step(ModelState& state, std::span<const TokenBatch> batch,
                   const TrainConfig& config, OptimizerState& opt, double lr,
                   OpCounter* counter = nullptr);

StepStats dp_step(ModelState& state, std::span<const TokenBatch> batch,
                  const TrainConfig& config, OptimizerState& opt, double lr,
                  NoiseStream& noise, OpCounter* counter = nullptr);

// Low-rank factors for a set of frozen base matrices W0 [d, k]:
// B [d, r] stored as "<target>.lora_B", A [r, k] stored as "<target>.lora_A".
struct LoraAdapters {
  int rank = 0;
  double alpha = 0.0;
  std::vector<std::string> targets;
  ParamLayout layout;
  std::vector<double> values;

  double scale() const { return alpha / static_cast<double>(rank); }
  std::size_t num_params() const { return values.size(); }
  std::span<const double> factor_a(std::string_view target) const;
  std::span<const double> factor_b(std::string_view target) const;
  // dense B * A, [d, k] row-major
  std::vector<double> delta(std::string_view target) const;
};

std::vector<std::string> default_lora_targets(const ModelConfig& config);

// A ~ Normal(0, 0.02^2), B = 0. Throws ConfigError when r exceeds min(d, k)
// for a target or a target is not a 2-D weight.
LoraAdapters lora_init(const ModelState& base, int rank, double alpha,
                       std::vector<std::string> targets, std::uint64_t seed);

// Base weights with W0 + (alpha / r) * B * A substituted for every target.
ModelState lora_effective(const ModelState& base, const LoraAdapters& adapters);

// Gradient of batch_loss(lora_effective(base, adapters), batch) with respect
// to the adapter factors.
GradientSet lora_gradient(const ModelState& base, const LoraAdapters& adapters,
                          std::span<const TokenBatch> batch,
                          OpCounter* counter = nullptr);

StepStats lora_step(const ModelState& base, LoraAdapters& adapters,
                    std::span<const TokenBatch> batch,
                    const TrainConfig& config, OptimizerState& opt, double lr,
                    OpCounter* counter = nullptr);

// Everything a method needs between epochs.
struct TrainState {
  ModelState model;  // trained weights (fft, dp) or the frozen base (lora)
  std::optional<LoraAdapters> adapters;
  OptimizerState optimizer;
  std::int64_t total_steps = 0;
  int epochs_done = 0;
};

std::int64_t steps_per_epoch(std::size_t dataset_size, int batch_size);

TrainState make_train_state(ModelState base, const TrainConfig& config,
                            std::size_t dataset_size);

struct EpochOutcome {
  std::int64_t steps = 0;
  std::size_t tokens = 0;
  double analytic_flops = 0.0;
  double final_lr = 0.0;
  double mean_loss = 0.0;
};

// One pass over `dataset` in a seed-determined order, dispatching to the
// configured method's step. The last partial batch is processed.
EpochOutcome train_epoch(TrainState& state, std::span<const TokenBatch> dataset,
                         const TrainConfig& config,
                         OpCounter* counter = nullptr);

// The model the method's current state represents.
ModelState evaluation_model(const TrainState& state);

}  // namespace puelab

#endif  // PUELAB_FINETUNE_H_
