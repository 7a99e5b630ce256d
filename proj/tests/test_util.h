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

#ifndef PUELAB_TESTS_TEST_UTIL_H_
#define PUELAB_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <random>
#include <vector>

#include "puelab/model.h"
#include "puelab/tokens.h"

namespace puelab::testing {

// 1,240 parameters: small enough for exhaustive finite differences.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.context_len = 8;
  c.d_model = 4;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 8;
  return c;
}

// Two layers, still cheap, for training-loop tests.
inline ModelConfig small_config() {
  ModelConfig c;
  c.context_len = 32;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  return c;
}

// BOS followed by `len - 1` random bytes with a random mask.
inline TokenBatch random_window(std::mt19937_64& rng, std::size_t len) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::bernoulli_distribution coin(0.3);
  TokenBatch w;
  w.token_ids.push_back(kBos);
  w.sensitivity_mask.push_back(false);
  for (std::size_t i = 1; i < len; ++i) {
    w.token_ids.push_back(byte(rng));
    w.sensitivity_mask.push_back(coin(rng));
  }
  w.doc_id = "rand";
  return w;
}

inline std::vector<TokenBatch> random_batch(std::mt19937_64& rng,
                                            std::size_t n, std::size_t min_len,
                                            std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::vector<TokenBatch> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_window(rng, len(rng)));
  return out;
}

}  // namespace puelab::testing

#endif  // PUELAB_TESTS_TEST_UTIL_H_
