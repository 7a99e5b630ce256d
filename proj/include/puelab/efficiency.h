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

#ifndef PUELAB_EFFICIENCY_H_
#define PUELAB_EFFICIENCY_H_

#include <cstdint>

#include "puelab/finetune.h"
#include "puelab/model.h"

namespace puelab {

// Profiler-measured ratios reported for billion-parameter models. Kept for
// annotation only; desk-scale models are not expected to reproduce them.
inline constexpr double kReferenceDpToFftRatio = 1.33;
inline constexpr double kReferenceLoraToFftRatio = 0.65;

struct CostEstimate {
  double flops_per_step = 0.0;
  double flops_per_epoch = 0.0;
  double cumulative_flops = 0.0;
  double memory_values = 0.0;
  double relative_to_fft = 1.0;
};

// 6 * D * N: 2DN forward plus 4DN backward.
double flops_fft(double tokens, double params);
double flops_forward(double tokens, double params);
double flops_backward(double tokens, double params);

// Analytic cost of one step over `tokens` training tokens and `batch`
// samples:
//   fft  6DN
//   lora 2D(N + Na) forward + 2DN activation backward + 4D*Na adapter grads
//   dp   6DN + 3N per sample (norm 2N, scale N) + 2N noise per step
// flops_per_epoch and cumulative_flops are left at zero; see scale_to_run.
CostEstimate flops_per_method(Method method, double tokens, double params,
                              double adapter_params, double batch);

CostEstimate scale_to_run(CostEstimate estimate, double steps_per_epoch,
                          double epochs);

// Resident numeric values: fft 4N, dp 4N + B*N, lora N + 4*Na.
double memory_estimate(Method method, double params, double adapter_params,
                       double batch);

// Multiply-accumulates recorded by an instrumented step. Throws ConfigError
// if the counter was disabled.
std::uint64_t measured_step_cost(const OpCounter& counter);

// Runs one step of `config.method` on copies of the given state and returns
// the counted multiply-accumulates.
std::uint64_t measure_one_step(const ModelState& base,
                               std::span<const TokenBatch> batch,
                               const TrainConfig& config);

}  // namespace puelab

#endif  // PUELAB_EFFICIENCY_H_
