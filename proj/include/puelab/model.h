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

#ifndef PUELAB_MODEL_H_
#define PUELAB_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "puelab/tokens.h"

namespace puelab {

struct ModelConfig {
  int vocab_size = kVocabSize;
  int context_len = static_cast<int>(kDefaultContextLen);
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;

  // Throws ConfigError unless every dimension is >= 1, d_model % n_heads == 0
  // and vocab_size covers the byte vocabulary plus BOS.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

// Names, shapes and offsets of parameter arrays packed into one flat buffer.
class ParamLayout {
 public:
  ParamLayout() = default;

  void add(std::string name, std::vector<std::size_t> shape);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t total_size() const { return total_; }
  // Throws ConfigError for unknown names.
  const ParamEntry& find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

// Parameter arrays of a pre-norm decoder-only transformer. Linear weights are
// stored [out, in]; the output head is tied to tok_emb.
ParamLayout model_layout(const ModelConfig& config);

struct ModelState {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> values;

  std::size_t num_params() const { return values.size(); }
  std::span<double> param(std::string_view name);
  std::span<const double> param(std::string_view name) const;
};

// One array per parameter array of a layout, packed the same way.
struct GradientSet {
  ParamLayout layout;
  std::vector<double> values;

  static GradientSet zeros(const ParamLayout& layout);

  double global_norm() const;
  std::span<double> param(std::string_view name);
  std::span<const double> param(std::string_view name) const;
};

// Counts multiply-accumulates executed by matrix products.
class OpCounter {
 public:
  explicit OpCounter(bool enabled = true) : enabled_(enabled) {}

  void add(std::uint64_t macs) {
    if (enabled_) macs_ += macs;
  }
  bool enabled() const { return enabled_; }
  std::uint64_t macs() const { return macs_; }
  void reset() { macs_ = 0; }

 private:
  bool enabled_;
  std::uint64_t macs_ = 0;
};

// Row-major [rows, cols] matrix of logits.
struct Logits {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }
};

// Linear weights and embeddings ~ Normal(0, 0.02^2), biases 0, LN gains 1.
ModelState init_params(const ModelConfig& config, std::uint64_t seed);

// Logits for every input position. Causal. Throws ConfigError for empty or
// overlong input and for ids outside the vocabulary.
Logits forward(const ModelState& state, std::span<const TokenId> tokens,
               OpCounter* counter = nullptr);

// loss[i] = -log softmax(logits[i])[targets[i]] (natural log).
std::vector<double> per_token_loss(const Logits& logits,
                                   std::span<const TokenId> targets);

// Per-target losses of one window: position i scores token i + 1.
std::vector<double> sequence_token_losses(const ModelState& state,
                                          const TokenBatch& seq,
                                          OpCounter* counter = nullptr);

// Mean target loss of one window.
double sequence_loss(const ModelState& state, const TokenBatch& seq);

// Training objective for a batch: the average over windows of each window's
// mean target loss.
double batch_loss(const ModelState& state, std::span<const TokenBatch> batch);

// Adds scale * d(sequence_loss)/d(params) into `grad`. When `trainable` is
// non-empty it is indexed by layout entry and weight gradients of frozen
// entries are skipped (their slots in `grad` are left untouched). Returns the
// window's mean target loss.
double accumulate_gradient(const ModelState& state, const TokenBatch& seq,
                           double scale, GradientSet& grad,
                           const std::vector<bool>& trainable = {},
                           OpCounter* counter = nullptr);

// Exact gradient of batch_loss. Accumulates windows in batch order.
GradientSet backward(const ModelState& state, std::span<const TokenBatch> batch,
                     OpCounter* counter = nullptr);

// Argmax decoding; ties go to the lowest token id. Inputs longer than the
// context window are truncated to their most recent context_len tokens.
std::vector<TokenId> greedy_generate(const ModelState& state,
                                     std::span<const TokenId> prefix,
                                     std::size_t n_new);

}  // namespace puelab

#endif  // PUELAB_MODEL_H_
