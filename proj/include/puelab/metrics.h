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

#ifndef PUELAB_METRICS_H_
#define PUELAB_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "puelab/finetune.h"
#include "puelab/model.h"
#include "puelab/tokens.h"

namespace puelab {

enum class Select { kSensitive, kNonsensitive };

struct MaskedMean {
  std::optional<double> mean;  // absent when no position was selected
  std::size_t count = 0;
};

// Mean of losses[i] over positions where mask[i] matches `select`.
MaskedMean masked_mean_loss(std::span<const double> losses,
                            const std::vector<bool>& mask, Select select);

// Teacher-forced loss sums of one split. Target i of a window is labelled by
// mask[i + 1], so BOS never contributes.
struct SplitLosses {
  double sum_sensitive = 0.0;
  double sum_nonsensitive = 0.0;
  double sum_all = 0.0;
  std::size_t n_sensitive = 0;
  std::size_t n_nonsensitive = 0;

  std::size_t n_all() const { return n_sensitive + n_nonsensitive; }
  std::optional<double> sensitive() const;
  std::optional<double> nonsensitive() const;
  std::optional<double> all() const;
};

// Worker count for evaluation: PUELAB_THREADS when set to a positive integer,
// otherwise the hardware concurrency.
int evaluation_threads();

// Windows are scored in parallel and reduced in input order, so the result
// does not depend on the thread count.
SplitLosses evaluate_split(const ModelState& model,
                           std::span<const TokenBatch> split,
                           int threads = 0);

// Sensitive-token mean loss over the train split; higher means more privacy.
// Throws ConfigError when the split has no sensitive token.
double privacy_score(const ModelState& model, std::span<const TokenBatch> train);

// Non-sensitive-token mean loss over the test split; lower means more utility.
// Throws ConfigError when the split has no non-sensitive token.
double utility_score(const ModelState& model, std::span<const TokenBatch> test);

// Unmasked (train, test) mean losses.
std::pair<double, double> legacy_scores(const ModelState& model,
                                        std::span<const TokenBatch> train,
                                        std::span<const TokenBatch> test);

struct EpochReport {
  int epoch = 0;
  std::string method;
  std::optional<double> sigma;
  std::optional<int> rank;
  std::optional<double> alpha;
  double lr = 0.0;  // learning rate of the epoch's last update
  std::optional<double> loss_train_sensitive;
  std::optional<double> loss_train_nonsensitive;
  std::optional<double> loss_train_all;
  std::optional<double> loss_test_sensitive;
  std::optional<double> loss_test_nonsensitive;
  std::optional<double> loss_test_all;
  std::size_t n_train_sensitive = 0;
  std::size_t n_train_nonsensitive = 0;
  std::size_t n_test_sensitive = 0;
  std::size_t n_test_nonsensitive = 0;
  double flops_cumulative = 0.0;
  std::int64_t steps_cumulative = 0;

  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

inline constexpr double kDecompositionTolerance = 1e-9;

// Throws ConsistencyError unless each all-token loss equals the
// count-weighted mean of its two parts within kDecompositionTolerance
// relative, and every loss is non-negative.
void check_decomposition(const EpochReport& report);

// Fills the hyperparameter columns relevant to config.method.
EpochReport epoch_report(const ModelState& model,
                         std::span<const TokenBatch> train,
                         std::span<const TokenBatch> test,
                         const TrainConfig& config, int epoch, double lr,
                         double flops_cumulative,
                         std::int64_t steps_cumulative);

const std::vector<std::string>& metrics_columns();

// Numbers at 17 significant digits; absent values are empty fields.
std::string metrics_header();
std::string format_metrics_row(const EpochReport& report);
EpochReport parse_metrics_row(const std::string& line);

void write_metrics_csv(std::ostream& out, std::span<const EpochReport> reports);
std::vector<EpochReport> read_metrics_csv(std::istream& in);

// Throws IoError when the file cannot be written or read.
void save_metrics_csv(const std::string& path,
                      std::span<const EpochReport> reports);
std::vector<EpochReport> load_metrics_csv(const std::string& path);

}  // namespace puelab

#endif  // PUELAB_METRICS_H_
