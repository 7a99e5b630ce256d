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

#ifndef PUELAB_CORPUS_H_
#define PUELAB_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace puelab {

enum class EntityKind { kName, kPhone, kEmail, kAddress, kOrderId, kTrackingId };

std::string_view to_string(EntityKind kind);
// Throws ConfigError for an unknown tag.
EntityKind entity_kind_from_string(std::string_view tag);

enum class DatasetTag { kDialog, kBio, kPretrain };

std::string_view to_string(DatasetTag tag);
DatasetTag dataset_tag_from_string(std::string_view tag);

// Half-open byte range [start, end) into the UTF-8 text of a document.
struct SensitiveSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityKind kind = EntityKind::kName;

  friend bool operator==(const SensitiveSpan&, const SensitiveSpan&) = default;
};

struct AnnotatedDocument {
  std::string doc_id;
  std::string text;
  std::vector<SensitiveSpan> spans;  // sorted, non-overlapping
  DatasetTag dataset_tag = DatasetTag::kDialog;

  std::string_view span_text(const SensitiveSpan& span) const {
    return std::string_view(text).substr(span.start, span.end - span.start);
  }

  friend bool operator==(const AnnotatedDocument&,
                         const AnnotatedDocument&) = default;
};

using Corpus = std::vector<AnnotatedDocument>;

// The closed name gazetteer shared by the generators and the annotator.
const std::vector<std::string>& first_names();
const std::vector<std::string>& last_names();

// Regular-expression rules for the machine-patterned kinds plus the name
// gazetteer. Names are matched as "<First> <Last>" word pairs.
struct PatternSet {
  std::map<EntityKind, std::string> rules;
  std::vector<std::string> gazetteer_first;
  std::vector<std::string> gazetteer_last;

  // Grammars used by the synthetic generators.
  static PatternSet defaults();
};

// All non-overlapping maximal matches, leftmost-longest, sorted by start.
// Throws ConfigError when a rule does not compile or names a kind twice.
std::vector<SensitiveSpan> regex_annotate(std::string_view text,
                                          const PatternSet& patterns);

// True when `value` is exactly one match of the rule (or gazetteer) for
// `kind` under `patterns`.
bool matches_grammar(EntityKind kind, std::string_view value,
                     const PatternSet& patterns);

// Generators are pure functions of (seed, n_docs); n_docs must be >= 1.
Corpus generate_dialog_corpus(std::uint64_t seed, std::size_t n_docs);
Corpus generate_bio_corpus(std::uint64_t seed, std::size_t n_docs);
Corpus generate_pretrain_corpus(std::uint64_t seed, std::size_t n_docs);

struct CorpusSplit {
  Corpus train;
  Corpus test;
};

// Seeded shuffle followed by PII-disjoint assignment: any document sharing a
// span value with another document is kept in train.
CorpusSplit split_train_test(const Corpus& corpus, double test_fraction,
                             std::uint64_t seed);

// JSON Lines: {"doc_id","text","dataset_tag","spans":[{"start","end","kind"}]}
void write_corpus_jsonl(std::ostream& out, const Corpus& corpus);
Corpus read_corpus_jsonl(std::istream& in);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// Throws ConfigError if any span is out of range, empty, unsorted or
// overlapping.
void validate_spans(const AnnotatedDocument& doc);

}  // namespace puelab

#endif  // PUELAB_CORPUS_H_
