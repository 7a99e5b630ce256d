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

#include "puelab/efficiency.h"

#include "puelab/error.h"

namespace puelab {

double flops_forward(double tokens, double params) {
  return 2.0 * tokens * params;
}

double flops_backward(double tokens, double params) {
  return 4.0 * tokens * params;
}

double flops_fft(double tokens, double params) {
  return 6.0 * tokens * params;
}

CostEstimate flops_per_method(Method method, double tokens, double params,
                              double adapter_params, double batch) {
  if (tokens < 0 || params < 0 || adapter_params < 0) {
    throw ConfigError("token and parameter counts must be non-negative");
  }
  if (adapter_params > params) {
    throw ConfigError("adapter parameters cannot exceed model parameters");
  }
  if (batch < 1) throw ConfigError("batch must be at least 1");
  CostEstimate est;
  const double fft = flops_fft(tokens, params);
  switch (method) {
    case Method::kFft:
      est.flops_per_step = fft;
      break;
    case Method::kLora:
      est.flops_per_step = 2.0 * tokens * (params + adapter_params) +
                           2.0 * tokens * params +
                           4.0 * tokens * adapter_params;
      break;
    case Method::kDp:
      est.flops_per_step = fft + 3.0 * params * batch + 2.0 * params;
      break;
  }
  est.memory_values = memory_estimate(method, params, adapter_params, batch);
  if (method == Method::kFft) {
    est.relative_to_fft = 1.0;
  } else {
    est.relative_to_fft = fft > 0 ? est.flops_per_step / fft : 0.0;
  }
  return est;
}

CostEstimate scale_to_run(CostEstimate estimate, double steps_per_epoch,
                          double epochs) {
  estimate.flops_per_epoch = estimate.flops_per_step * steps_per_epoch;
  estimate.cumulative_flops = estimate.flops_per_epoch * epochs;
  return estimate;
}

double memory_estimate(Method method, double params, double adapter_params,
                       double batch) {
  switch (method) {
    case Method::kFft:
      return 4.0 * params;
    case Method::kDp:
      return 4.0 * params + batch * params;
    case Method::kLora:
      return params + 4.0 * adapter_params;
  }
  return 0.0;
}

std::uint64_t measured_step_cost(const OpCounter& counter) {
  if (!counter.enabled()) {
    throw ConfigError("step cost requested from a disabled op counter");
  }
  return counter.macs();
}

std::uint64_t measure_one_step(const ModelState& base,
                               std::span<const TokenBatch> batch,
                               const TrainConfig& config) {
  // The schedule is irrelevant to the count; warmup 0 keeps any epoch count
  // valid.
  TrainConfig one = config;
  one.warmup_steps = 0;
  TrainState state = make_train_state(base, one, batch.size());
  OpCounter counter(true);
  const double lr = config.learning_rate;
  switch (config.method) {
    case Method::kFft:
      fft_step(state.model, batch, one, state.optimizer, lr, &counter);
      break;
    case Method::kDp: {
      NoiseStream noise(config.seed, 0);
      dp_step(state.model, batch, one, state.optimizer, lr, noise, &counter);
      break;
    }
    case Method::kLora:
      lora_step(state.model, *state.adapters, batch, one, state.optimizer,
                lr, &counter);
      break;
  }
  return measured_step_cost(counter);
}

}  // namespace puelab
