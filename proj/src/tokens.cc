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

#include "puelab/tokens.h"

#include <istream>
#include <ostream>

#include "json.hpp"
#include "puelab/error.h"

namespace puelab {

std::string_view to_string(SplitTag tag) {
  return tag == SplitTag::kTrain ? "train" : "test";
}

SplitTag split_tag_from_string(std::string_view tag) {
  if (tag == "train") return SplitTag::kTrain;
  if (tag == "test") return SplitTag::kTest;
  throw ConfigError("unknown split tag: " + std::string(tag));
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::vector<TokenId> tokenize(std::string_view text) {
  if (!is_valid_utf8(text)) throw DecodeError("input is not valid UTF-8");
  std::vector<TokenId> ids;
  ids.reserve(text.size() + 1);
  ids.push_back(kBos);
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  return ids;
}

std::string detokenize(std::span<const TokenId> ids) {
  if (ids.empty() || ids.front() != kBos) {
    throw DecodeError("token sequence must start with BOS");
  }
  std::string out;
  out.reserve(ids.size() - 1);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= 256) {
      throw DecodeError("token id " + std::to_string(ids[i]) +
                        " is not a byte");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(ids[i])));
  }
  if (!is_valid_utf8(out)) throw DecodeError("bytes are not valid UTF-8");
  return out;
}

std::vector<bool> align_spans_to_mask(std::string_view text,
                                      std::span<const SensitiveSpan> spans) {
  std::vector<bool> mask(text.size() + 1, false);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > text.size()) {
      throw ConfigError("span [" + std::to_string(s.start) + ", " +
                        std::to_string(s.end) + ") out of bounds");
    }
    // Token i + 1 holds byte i.
    for (std::size_t b = s.start; b < s.end; ++b) mask[b + 1] = true;
  }
  return mask;
}

std::vector<TokenBatch> encode_document(const AnnotatedDocument& doc,
                                        SplitTag split,
                                        std::size_t context_len) {
  if (context_len < 2) throw ConfigError("context_len must be at least 2");
  const auto ids = tokenize(doc.text);
  const auto mask = align_spans_to_mask(doc.text, doc.spans);
  const std::size_t per_window = context_len - 1;  // bytes after BOS
  std::vector<TokenBatch> windows;
  std::size_t pos = 1;
  do {
    const std::size_t take = std::min(per_window, ids.size() - pos);
    TokenBatch w;
    w.doc_id = doc.doc_id;
    w.split_tag = split;
    w.token_ids.reserve(take + 1);
    w.sensitivity_mask.reserve(take + 1);
    w.token_ids.push_back(kBos);
    w.sensitivity_mask.push_back(false);
    for (std::size_t i = pos; i < pos + take; ++i) {
      w.token_ids.push_back(ids[i]);
      w.sensitivity_mask.push_back(mask[i]);
    }
    windows.push_back(std::move(w));
    pos += take;
  } while (pos < ids.size());
  return windows;
}

std::vector<TokenBatch> encode_corpus(const Corpus& corpus, SplitTag split,
                                      std::size_t context_len) {
  std::vector<TokenBatch> out;
  for (const auto& doc : corpus) {
    auto windows = encode_document(doc, split, context_len);
    for (auto& w : windows) out.push_back(std::move(w));
  }
  return out;
}

void write_token_cache(std::ostream& out, std::span<const TokenBatch> batches) {
  for (const auto& b : batches) {
    nlohmann::ordered_json j;
    j["doc_id"] = b.doc_id;
    j["split_tag"] = std::string(to_string(b.split_tag));
    j["token_ids"] = b.token_ids;
    std::vector<int> mask(b.sensitivity_mask.begin(), b.sensitivity_mask.end());
    j["mask"] = mask;
    out << j.dump() << '\n';
  }
}

std::vector<TokenBatch> read_token_cache(std::istream& in) {
  std::vector<TokenBatch> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TokenBatch b;
      b.doc_id = j.at("doc_id").get<std::string>();
      b.split_tag = split_tag_from_string(j.at("split_tag").get<std::string>());
      b.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
      for (int m : j.at("mask").get<std::vector<int>>()) {
        b.sensitivity_mask.push_back(m != 0);
      }
      if (b.token_ids.size() != b.sensitivity_mask.size()) {
        throw ConfigError("token/mask length mismatch for " + b.doc_id);
      }
      out.push_back(std::move(b));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("token cache: ") + e.what());
    }
  }
  return out;
}

}  // namespace puelab
