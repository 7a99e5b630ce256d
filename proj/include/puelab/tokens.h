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

#ifndef PUELAB_TOKENS_H_
#define PUELAB_TOKENS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "puelab/corpus.h"

namespace puelab {

using TokenId = std::int32_t;

inline constexpr TokenId kBos = 256;
inline constexpr int kVocabSize = 257;
inline constexpr std::size_t kDefaultContextLen = 256;

enum class SplitTag { kTrain, kTest };

std::string_view to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view tag);

// One BOS-prefixed token window with its per-token sensitivity mask. A whole
// document becomes one or more of these.
struct TokenBatch {
  std::vector<TokenId> token_ids;
  std::vector<bool> sensitivity_mask;  // same length; mask[0] is BOS, false
  std::string doc_id;
  SplitTag split_tag = SplitTag::kTrain;

  std::size_t size() const { return token_ids.size(); }
  // Number of next-token targets (every position after BOS).
  std::size_t num_targets() const {
    return token_ids.empty() ? 0 : token_ids.size() - 1;
  }

  friend bool operator==(const TokenBatch&, const TokenBatch&) = default;
};

// [BOS] followed by one token per UTF-8 byte. Throws DecodeError on
// invalid UTF-8.
std::vector<TokenId> tokenize(std::string_view text);

// Inverse of tokenize. Throws DecodeError when ids do not start with BOS,
// contain an id >= 256 after it, or do not form valid UTF-8.
std::string detokenize(std::span<const TokenId> ids);

// Byte-level mask over tokenize(text): BOS is never sensitive. Throws
// ConfigError when a span falls outside the text.
std::vector<bool> align_spans_to_mask(std::string_view text,
                                      std::span<const SensitiveSpan> spans);

bool is_valid_utf8(std::string_view bytes);

// Tokenizes, aligns and splits into non-overlapping windows of at most
// `context_len` tokens, each starting with BOS.
std::vector<TokenBatch> encode_document(const AnnotatedDocument& doc,
                                        SplitTag split,
                                        std::size_t context_len =
                                            kDefaultContextLen);

std::vector<TokenBatch> encode_corpus(const Corpus& corpus, SplitTag split,
                                      std::size_t context_len =
                                          kDefaultContextLen);

// JSON Lines: {"doc_id","split_tag","token_ids":[...],"mask":[0|1,...]}
void write_token_cache(std::ostream& out, std::span<const TokenBatch> batches);
std::vector<TokenBatch> read_token_cache(std::istream& in);

}  // namespace puelab

#endif  // PUELAB_TOKENS_H_
