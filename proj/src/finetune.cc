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

#include "puelab/finetune.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "puelab/efficiency.h"
#include "puelab/error.h"

namespace puelab {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kLoraInitStd = 0.02;

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

void check_batch(std::span<const TokenBatch> batch) {
  if (batch.empty()) throw ConfigError("training step needs a non-empty batch");
}

std::size_t count_targets(std::span<const TokenBatch> batch) {
  std::size_t n = 0;
  for (const auto& s : batch) n += s.num_targets();
  return n;
}

std::string target_a(std::string_view target) {
  return std::string(target) + ".lora_A";
}

std::string target_b(std::string_view target) {
  return std::string(target) + ".lora_B";
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedule, clipping and noise

double lr_schedule(std::int64_t step, std::int64_t total_steps, double base_lr,
                   std::int64_t warmup) {
  if (step < 0 || step > total_steps) {
    throw ConfigError("lr_schedule: step outside [0, total_steps]");
  }
  if (warmup < 0 || warmup >= total_steps) {
    throw ConfigError("lr_schedule: warmup must lie in [0, total_steps)");
  }
  if (step < warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

GradientSet clip(const GradientSet& grad, double threshold) {
  if (!(threshold > 0)) throw ConfigError("clip threshold must be positive");
  const double denom = std::max(1.0, grad.global_norm() / threshold);
  GradientSet out = grad;
  for (double& v : out.values) v /= denom;
  return out;
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream)
    : engine_(seeded_engine(seed, stream, 0x4015e)) {}

double NoiseStream::gaussian(double stddev) {
  return stddev * normal_(engine_);
}

GradientSet add_noise(const GradientSet& grad, double sigma, double threshold,
                      NoiseStream& noise) {
  if (sigma < 0) throw ConfigError("noise scale must be non-negative");
  GradientSet out = grad;
  if (sigma == 0.0) return out;
  const double stddev = sigma * threshold;
  for (double& v : out.values) v += noise.gaussian(stddev);
  return out;
}

ClippedSum::ClippedSum(const ParamLayout& layout, double threshold)
    : sum_(GradientSet::zeros(layout)), threshold_(threshold) {
  if (!(threshold > 0)) throw ConfigError("clip threshold must be positive");
}

double ClippedSum::add(const GradientSet& grad, OpCounter* counter) {
  if (grad.values.size() != sum_.values.size()) {
    throw ConfigError("per-sample gradient does not match the layout");
  }
  const double norm = grad.global_norm();
  const double denom = std::max(1.0, norm / threshold_);
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    sum_.values[i] += grad.values[i] / denom;
  }
  if (counter != nullptr) counter->add(2 * grad.values.size());
  ++count_;
  return norm;
}

GradientSet ClippedSum::finish(int batch_size, double sigma,
                               NoiseStream& noise, OpCounter* counter) const {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  GradientSet mean = sum_;
  const double b = static_cast<double>(batch_size);
  for (double& v : mean.values) v /= b;
  if (counter != nullptr && sigma > 0) counter->add(mean.values.size());
  return add_noise(mean, sigma, threshold_, noise);
}

GradientSet dp_aggregate(std::span<const GradientSet> per_sample,
                         int batch_size, double sigma, double threshold,
                         NoiseStream& noise) {
  if (per_sample.empty()) throw ConfigError("no per-sample gradients");
  ClippedSum sum(per_sample.front().layout, threshold);
  for (const auto& g : per_sample) sum.add(g);
  return sum.finish(batch_size, sigma, noise);
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState OptimizerState::zeros(std::size_t n) {
  return OptimizerState{std::vector<double>(n, 0.0),
                        std::vector<double>(n, 0.0), 0};
}

void optimizer_update(std::span<double> params, std::span<const double> grad,
                      OptimizerState& opt, OptimizerKind kind, double lr) {
  if (params.size() != grad.size()) {
    throw ConfigError("parameter and gradient sizes differ");
  }
  ++opt.step;
  if (kind == OptimizerKind::kPlain) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (opt.m.size() != params.size() || opt.v.size() != params.size()) {
    throw ConfigError("optimizer state does not match the parameters");
  }
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    opt.m[i] = kAdamBeta1 * opt.m[i] + (1.0 - kAdamBeta1) * g;
    opt.v[i] = kAdamBeta2 * opt.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = opt.m[i] / c1;
    const double v_hat = opt.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

// ---------------------------------------------------------------------------
// Update rules

StepStats fft_step(ModelState& state, std::span<const TokenBatch> batch,
                   const TrainConfig& config, OptimizerState& opt, double lr,
                   OpCounter* counter) {
  check_batch(batch);
  GradientSet grad = GradientSet::zeros(state.layout);
  const double scale = 1.0 / static_cast<double>(batch.size());
  StepStats stats;
  for (const auto& seq : batch) {
    stats.loss += accumulate_gradient(state, seq, scale, grad, {}, counter);
  }
  optimizer_update(state.values, grad.values, opt, config.optimizer, lr);
  stats.loss /= static_cast<double>(batch.size());
  stats.lr = lr;
  stats.samples = batch.size();
  stats.tokens = count_targets(batch);
  return stats;
}

StepStats dp_step(ModelState& state, std::span<const TokenBatch> batch,
                  const TrainConfig& config, OptimizerState& opt, double lr,
                  NoiseStream& noise, OpCounter* counter) {
  check_batch(batch);
  if (batch.size() > static_cast<std::size_t>(config.batch_size)) {
    throw ConfigError("DP batch larger than the configured batch size");
  }
  const double threshold = config.dp.clip_threshold;
  ClippedSum sum(state.layout, threshold);
  GradientSet sample = GradientSet::zeros(state.layout);
  StepStats stats;
  for (const auto& seq : batch) {
    std::fill(sample.values.begin(), sample.values.end(), 0.0);
    stats.loss += accumulate_gradient(state, seq, 1.0, sample, {}, counter);
    if (sum.add(sample, counter) > threshold) ++stats.clipped;
  }
  const GradientSet update =
      sum.finish(config.batch_size, config.dp.noise_scale, noise, counter);
  optimizer_update(state.values, update.values, opt, config.optimizer, lr);
  stats.loss /= static_cast<double>(batch.size());
  stats.lr = lr;
  stats.samples = batch.size();
  stats.tokens = count_targets(batch);
  return stats;
}

// ---------------------------------------------------------------------------
// LoRA

std::span<const double> LoraAdapters::factor_a(std::string_view target) const {
  const auto& e = layout.find(target_a(target));
  return std::span<const double>(values).subspan(e.offset, e.size);
}

std::span<const double> LoraAdapters::factor_b(std::string_view target) const {
  const auto& e = layout.find(target_b(target));
  return std::span<const double>(values).subspan(e.offset, e.size);
}

std::vector<double> LoraAdapters::delta(std::string_view target) const {
  const auto& eb = layout.find(target_b(target));
  const auto& ea = layout.find(target_a(target));
  const auto d = static_cast<Eigen::Index>(eb.shape[0]);
  const auto k = static_cast<Eigen::Index>(ea.shape[1]);
  const auto r = static_cast<Eigen::Index>(rank);
  std::vector<double> out(static_cast<std::size_t>(d * k));
  Eigen::Map<RowMat>(out.data(), d, k).noalias() =
      Eigen::Map<const RowMat>(values.data() + eb.offset, d, r) *
      Eigen::Map<const RowMat>(values.data() + ea.offset, r, k);
  return out;
}

std::vector<std::string> default_lora_targets(const ModelConfig& config) {
  std::vector<std::string> targets;
  for (int l = 0; l < config.n_layers; ++l) {
    for (const char* p : {"q", "k", "v", "o"}) {
      targets.push_back("h" + std::to_string(l) + ".attn.w" + p);
    }
  }
  return targets;
}

LoraAdapters lora_init(const ModelState& base, int rank, double alpha,
                       std::vector<std::string> targets, std::uint64_t seed) {
  if (rank < 1) throw ConfigError("LoRA rank must be at least 1");
  if (!(alpha > 0)) throw ConfigError("LoRA alpha must be positive");
  if (targets.empty()) targets = default_lora_targets(base.config);
  LoraAdapters ad;
  ad.rank = rank;
  ad.alpha = alpha;
  const auto r = static_cast<std::size_t>(rank);
  for (const auto& t : targets) {
    const auto& e = base.layout.find(t);
    if (e.shape.size() != 2) {
      throw ConfigError("LoRA target " + t + " is not a weight matrix");
    }
    if (r > std::min(e.shape[0], e.shape[1])) {
      throw ConfigError("LoRA rank " + std::to_string(rank) +
                        " exceeds min(d, k) for " + t);
    }
    ad.layout.add(target_a(t), {r, e.shape[1]});
    ad.layout.add(target_b(t), {e.shape[0], r});
  }
  ad.targets = std::move(targets);
  ad.values.assign(ad.layout.total_size(), 0.0);
  auto rng = seeded_engine(seed, 0x10a, 0);
  std::normal_distribution<double> normal(0.0, kLoraInitStd);
  for (const auto& t : ad.targets) {
    const auto& e = ad.layout.find(target_a(t));
    for (std::size_t i = 0; i < e.size; ++i) ad.values[e.offset + i] = normal(rng);
  }
  return ad;
}

ModelState lora_effective(const ModelState& base, const LoraAdapters& adapters) {
  ModelState eff = base;
  const double s = adapters.scale();
  for (const auto& t : adapters.targets) {
    const auto& w = base.layout.find(t);
    const auto d = static_cast<Eigen::Index>(w.shape[0]);
    const auto k = static_cast<Eigen::Index>(w.shape[1]);
    const std::vector<double> delta = adapters.delta(t);
    Eigen::Map<RowMat>(eff.values.data() + w.offset, d, k) +=
        s * Eigen::Map<const RowMat>(delta.data(), d, k);
  }
  return eff;
}

namespace {

GradientSet lora_gradient_impl(const ModelState& base,
                               const LoraAdapters& adapters,
                               std::span<const TokenBatch> batch,
                               OpCounter* counter, double* loss) {
  check_batch(batch);
  const ModelState eff = lora_effective(base, adapters);
  const auto r = static_cast<Eigen::Index>(adapters.rank);
  std::vector<bool> trainable(eff.layout.entries().size(), false);
  for (const auto& t : adapters.targets) {
    trainable[eff.layout.index_of(t)] = true;
    const auto& w = base.layout.find(t);
    if (counter != nullptr) {
      counter->add(w.shape[0] * w.shape[1] * static_cast<std::size_t>(r));
    }
  }
  GradientSet dw = GradientSet::zeros(eff.layout);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss_sum = 0.0;
  for (const auto& seq : batch) {
    loss_sum += accumulate_gradient(eff, seq, scale, dw, trainable, counter);
  }
  if (loss != nullptr) *loss = loss_sum / static_cast<double>(batch.size());

  // dL/dB = s * dW * A^T and dL/dA = s * B^T * dW.
  GradientSet grad = GradientSet::zeros(adapters.layout);
  const double s = adapters.scale();
  for (const auto& t : adapters.targets) {
    const auto& w = eff.layout.find(t);
    const auto d = static_cast<Eigen::Index>(w.shape[0]);
    const auto k = static_cast<Eigen::Index>(w.shape[1]);
    const auto& ea = adapters.layout.find(target_a(t));
    const auto& eb = adapters.layout.find(target_b(t));
    Eigen::Map<const RowMat> dW(dw.values.data() + w.offset, d, k);
    Eigen::Map<const RowMat> A(adapters.values.data() + ea.offset, r, k);
    Eigen::Map<const RowMat> B(adapters.values.data() + eb.offset, d, r);
    Eigen::Map<RowMat>(grad.values.data() + eb.offset, d, r).noalias() =
        s * (dW * A.transpose());
    Eigen::Map<RowMat>(grad.values.data() + ea.offset, r, k).noalias() =
        s * (B.transpose() * dW);
    if (counter != nullptr) counter->add(2 * static_cast<std::uint64_t>(d * k * r));
  }
  return grad;
}

}  // namespace

GradientSet lora_gradient(const ModelState& base, const LoraAdapters& adapters,
                          std::span<const TokenBatch> batch,
                          OpCounter* counter) {
  return lora_gradient_impl(base, adapters, batch, counter, nullptr);
}

StepStats lora_step(const ModelState& base, LoraAdapters& adapters,
                    std::span<const TokenBatch> batch,
                    const TrainConfig& config, OptimizerState& opt, double lr,
                    OpCounter* counter) {
  StepStats stats;
  const GradientSet grad =
      lora_gradient_impl(base, adapters, batch, counter, &stats.loss);
  optimizer_update(adapters.values, grad.values, opt, config.optimizer, lr);
  stats.lr = lr;
  stats.samples = batch.size();
  stats.tokens = count_targets(batch);
  return stats;
}

// ---------------------------------------------------------------------------
// Epoch loop

std::int64_t steps_per_epoch(std::size_t dataset_size, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  const auto b = static_cast<std::size_t>(batch_size);
  return static_cast<std::int64_t>((dataset_size + b - 1) / b);
}

TrainState make_train_state(ModelState base, const TrainConfig& config,
                            std::size_t dataset_size) {
  config.validate(base.config);
  if (dataset_size == 0) throw ConfigError("training dataset is empty");
  TrainState state;
  state.total_steps =
      steps_per_epoch(dataset_size, config.batch_size) * config.epochs;
  if (config.warmup_steps >= state.total_steps) {
    throw ConfigError("warmup_steps must be smaller than the total step count");
  }
  if (config.method == Method::kLora) {
    state.adapters = lora_init(base, config.lora.rank, config.lora.alpha,
                               config.lora.targets, config.seed);
    state.optimizer = OptimizerState::zeros(state.adapters->num_params());
  } else {
    state.optimizer = OptimizerState::zeros(base.num_params());
  }
  state.model = std::move(base);
  return state;
}

EpochOutcome train_epoch(TrainState& state, std::span<const TokenBatch> dataset,
                         const TrainConfig& config, OpCounter* counter) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const auto epoch = static_cast<std::uint64_t>(state.epochs_done);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto shuffle_rng = seeded_engine(config.seed, epoch, 0x5b);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  NoiseStream noise(config.seed, (epoch << 8) | 0x7);

  const double n_params = static_cast<double>(state.model.num_params());
  const double n_adapter =
      state.adapters ? static_cast<double>(state.adapters->num_params()) : 0.0;
  const auto b = static_cast<std::size_t>(config.batch_size);

  EpochOutcome out;
  std::vector<TokenBatch> batch;
  batch.reserve(b);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += b) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + b); ++i) {
      batch.push_back(dataset[order[i]]);
    }
    const double lr = lr_schedule(state.optimizer.step + 1, state.total_steps,
                                  config.learning_rate, config.warmup_steps);
    StepStats stats;
    switch (config.method) {
      case Method::kFft:
        stats = fft_step(state.model, batch, config, state.optimizer, lr,
                         counter);
        break;
      case Method::kDp:
        stats = dp_step(state.model, batch, config, state.optimizer, lr, noise,
                        counter);
        break;
      case Method::kLora:
        stats = lora_step(state.model, *state.adapters, batch, config,
                          state.optimizer, lr, counter);
        break;
    }
    const auto cost =
        flops_per_method(config.method, static_cast<double>(stats.tokens),
                         n_params, n_adapter, static_cast<double>(batch.size()));
    out.analytic_flops += cost.flops_per_step;
    out.tokens += stats.tokens;
    out.final_lr = lr;
    loss_sum += stats.loss;
    ++out.steps;
  }
  out.mean_loss = loss_sum / static_cast<double>(out.steps);
  ++state.epochs_done;
  return out;
}

ModelState evaluation_model(const TrainState& state) {
  if (state.adapters) return lora_effective(state.model, *state.adapters);
  return state.model;
}

}  // namespace puelab
