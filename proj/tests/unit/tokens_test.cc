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

#include <gtest/gtest.h>

#include <sstream>

#include "puelab/corpus.h"
#include "puelab/error.h"

namespace puelab {
namespace {

TEST(TokenizeTest, EmptyTextIsJustBos) {
  EXPECT_EQ(tokenize(""), std::vector<TokenId>{kBos});
}

TEST(TokenizeTest, AsciiBytes) {
  EXPECT_EQ(tokenize("ab"), (std::vector<TokenId>{kBos, 97, 98}));
}

TEST(TokenizeTest, MultibyteUtf8IsOneTokenPerByte) {
  const std::string text = "caf\xc3\xa9";
  const auto ids = tokenize(text);
  ASSERT_EQ(ids.size(), text.size() + 1);
  EXPECT_EQ(ids[4], 0xc3);
  EXPECT_EQ(ids[5], 0xa9);
}

TEST(TokenizeTest, InvalidUtf8Rejected) {
  EXPECT_THROW(tokenize("\xff"), DecodeError);
  EXPECT_THROW(tokenize("\xc3"), DecodeError);
}

TEST(DetokenizeTest, Examples) {
  EXPECT_EQ(detokenize(std::vector<TokenId>{kBos}), "");
  EXPECT_EQ(detokenize(std::vector<TokenId>{kBos, 72, 105}), "Hi");
}

TEST(DetokenizeTest, Errors) {
  EXPECT_THROW(detokenize(std::vector<TokenId>{72}), DecodeError);
  EXPECT_THROW(detokenize(std::vector<TokenId>{}), DecodeError);
  EXPECT_THROW(detokenize(std::vector<TokenId>{kBos, 0xc3}), DecodeError);
  EXPECT_THROW(detokenize(std::vector<TokenId>{kBos, kBos}), DecodeError);
}

TEST(DetokenizeTest, RoundTripOverGeneratedText) {
  std::size_t checked = 0;
  for (const auto& corpus :
       {generate_dialog_corpus(3, 400), generate_bio_corpus(3, 400),
        generate_pretrain_corpus(3, 200)}) {
    for (const auto& doc : corpus) {
      ASSERT_EQ(detokenize(tokenize(doc.text)), doc.text);
      ++checked;
    }
  }
  EXPECT_GE(checked, 1000u);
}

TEST(AlignTest, NameSpanShiftsByBos) {
  const std::string text = "I am Catherine Pena.";
  const std::vector<SensitiveSpan> spans{{5, 19, EntityKind::kName}};
  const auto mask = align_spans_to_mask(text, spans);
  ASSERT_EQ(mask.size(), text.size() + 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    EXPECT_EQ(mask[i], i >= 6 && i <= 19) << "position " << i;
  }
}

TEST(AlignTest, NoSpansAllFalse) {
  const auto mask = align_spans_to_mask("hello", {});
  EXPECT_EQ(mask, std::vector<bool>(6, false));
}

TEST(AlignTest, WholeTextSpanExceptBos) {
  const std::vector<SensitiveSpan> spans{{0, 5, EntityKind::kPhone}};
  const auto mask = align_spans_to_mask("hello", spans);
  EXPECT_FALSE(mask[0]);
  for (std::size_t i = 1; i < mask.size(); ++i) EXPECT_TRUE(mask[i]);
}

TEST(AlignTest, OutOfBoundsSpanRejected) {
  const std::vector<SensitiveSpan> past{{2, 9, EntityKind::kName}};
  EXPECT_THROW(align_spans_to_mask("hello", past), ConfigError);
  const std::vector<SensitiveSpan> empty{{3, 3, EntityKind::kName}};
  EXPECT_THROW(align_spans_to_mask("hello", empty), ConfigError);
}

TEST(AlignTest, SensitiveRunsReproduceSpanText) {
  for (const auto& doc : generate_dialog_corpus(11, 100)) {
    const auto ids = tokenize(doc.text);
    const auto mask = align_spans_to_mask(doc.text, doc.spans);
    std::vector<std::string> runs;
    std::string current;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (mask[i]) {
        current.push_back(static_cast<char>(ids[i]));
      } else if (!current.empty()) {
        runs.push_back(current);
        current.clear();
      }
    }
    if (!current.empty()) runs.push_back(current);
    // Adjacent spans would merge into one run; generated spans never touch.
    ASSERT_EQ(runs.size(), doc.spans.size()) << doc.doc_id;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      EXPECT_EQ(runs[s], doc.span_text(doc.spans[s]));
    }
  }
}

TEST(EncodeTest, PartitionAndBosInvariants) {
  const auto corpus = generate_bio_corpus(5, 50);
  for (const auto& w : encode_corpus(corpus, SplitTag::kTrain)) {
    ASSERT_EQ(w.token_ids.size(), w.sensitivity_mask.size());
    ASSERT_LE(w.size(), kDefaultContextLen);
    EXPECT_EQ(w.token_ids[0], kBos);
    EXPECT_FALSE(w.sensitivity_mask[0]);
    EXPECT_EQ(w.split_tag, SplitTag::kTrain);
  }
}

TEST(EncodeTest, LongDocumentSplitsIntoBosPrefixedWindows) {
  AnnotatedDocument doc;
  doc.doc_id = "long";
  doc.text = std::string(20, 'x');
  doc.spans = {{6, 9, EntityKind::kOrderId}};
  const auto windows = encode_document(doc, SplitTag::kTest, 8);
  ASSERT_EQ(windows.size(), 3u);  // 7 + 7 + 6 bytes
  std::string joined;
  std::vector<bool> joined_mask;
  for (const auto& w : windows) {
    EXPECT_EQ(w.token_ids[0], kBos);
    EXPECT_LE(w.size(), 8u);
    for (std::size_t i = 1; i < w.size(); ++i) {
      joined.push_back(static_cast<char>(w.token_ids[i]));
      joined_mask.push_back(w.sensitivity_mask[i]);
    }
  }
  EXPECT_EQ(joined, doc.text);
  for (std::size_t b = 0; b < joined_mask.size(); ++b) {
    EXPECT_EQ(joined_mask[b], b >= 6 && b < 9);
  }
}

TEST(TokenCacheTest, RoundTrip) {
  const auto windows =
      encode_corpus(generate_dialog_corpus(2, 5), SplitTag::kTest);
  std::stringstream ss;
  write_token_cache(ss, windows);
  EXPECT_EQ(read_token_cache(ss), windows);
}

TEST(TokenCacheTest, LengthMismatchRejected) {
  std::stringstream ss(
      R"({"doc_id":"a","split_tag":"train","token_ids":[256,1],"mask":[0]})");
  EXPECT_THROW(read_token_cache(ss), ConfigError);
}

}  // namespace
}  // namespace puelab
