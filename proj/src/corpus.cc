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

#include "puelab/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "puelab/error.h"

namespace puelab {
namespace {

using Rng = std::mt19937_64;

constexpr std::array<const char*, 5> kEmailDomains = {
    "outlook.com", "gmail.com", "yahoo.com", "proton.me", "icloud.com"};

constexpr std::array<const char*, 10> kStreetSuffixes = {
    "Street", "Avenue", "Road",  "Lane", "Trail",
    "Drive",  "Court",  "Way",   "Place", "Boulevard"};

constexpr std::array<const char*, 24> kStreetNames = {
    "Tanglewood", "Maple",    "Oakridge",  "Willow",    "Cedar",
    "Sunset",     "Highland", "Riverside", "Meadow",    "Lakeview",
    "Pinecrest",  "Elmwood",  "Briarwood", "Fairview",  "Ashford",
    "Magnolia",   "Westgate", "Brookside", "Hawthorne", "Juniper",
    "Sycamore",   "Redwood",  "Chestnut",  "Birchwood"};

constexpr std::array<const char*, 12> kItems = {
    "a pot",        "a lamp",      "a pair of shoes", "a jacket",
    "a coffee mug", "a backpack",  "a desk chair",    "a phone case",
    "a blender",    "some towels", "a bike helmet",   "a book"};

constexpr std::array<const char*, 10> kJobs = {
    "teacher",    "nurse",      "software developer", "carpenter",
    "accountant", "chef",       "librarian",          "electrician",
    "pharmacist", "bus driver"};

constexpr std::array<const char*, 10> kHobbies = {
    "hiking",          "painting",        "baking bread",
    "playing chess",   "gardening",       "reading novels",
    "cycling",         "photography",     "playing the piano",
    "watching movies"};

// Generic stand-ins used by the pretraining corpus in place of PII values.
const std::map<EntityKind, std::vector<std::string>>& placeholders() {
  static const std::map<EntityKind, std::vector<std::string>> kPlaceholders = {
      {EntityKind::kName,
       {"the customer", "the account holder", "the name on the account"}},
      {EntityKind::kPhone, {"the number on file", "my usual number"}},
      {EntityKind::kOrderId,
       {"the number on my receipt", "the one in my email"}},
      {EntityKind::kTrackingId,
       {"on your account page", "in your confirmation email"}},
      {EntityKind::kEmail, {"my usual email", "the email on file"}},
      {EntityKind::kAddress,
       {"the address on file", "the same address as before"}},
  };
  return kPlaceholders;
}

template <typename Seq>
const auto& pick(Rng& rng, const Seq& seq) {
  std::uniform_int_distribution<std::size_t> dist(0, std::size(seq) - 1);
  return seq[dist(rng)];
}

std::string digits(Rng& rng, int n) {
  std::uniform_int_distribution<int> dist(0, 9);
  std::string out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>('0' + dist(rng)));
  return out;
}

std::string upper_alnum(Rng& rng, int n) {
  static constexpr std::string_view kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::uniform_int_distribution<std::size_t> dist(0, kAlphabet.size() - 1);
  std::string out;
  for (int i = 0; i < n; ++i) out.push_back(kAlphabet[dist(rng)]);
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Person {
  std::string first;
  std::string last;
};

Person sample_person(Rng& rng) {
  return {pick(rng, first_names()), pick(rng, last_names())};
}

std::string sample_phone(Rng& rng) {
  const char sep = std::bernoulli_distribution(0.5)(rng) ? '.' : '-';
  return digits(rng, 3) + sep + digits(rng, 3) + sep + digits(rng, 4);
}

std::string sample_order_id(Rng& rng) {
  return digits(rng, 3) + "-" + digits(rng, 5) + "-" + digits(rng, 4);
}

std::string sample_address(Rng& rng) {
  std::uniform_int_distribution<int> number(10, 9999);
  return std::to_string(number(rng)) + " " + pick(rng, kStreetNames) + " " +
         pick(rng, kStreetSuffixes);
}

std::string sample_email(Rng& rng, const Person& p) {
  return lower(p.first) + "-" + lower(p.last) + "@" + pick(rng, kEmailDomains);
}

// A slot value either carries PII (and produces a span) or is plain text.
struct Slot {
  std::string value;
  bool sensitive = false;
  EntityKind kind = EntityKind::kName;
};

// Expands "{KEY}" placeholders, recording spans for sensitive slots.
AnnotatedDocument render(std::string_view tmpl,
                         const std::map<std::string, Slot>& slots) {
  AnnotatedDocument doc;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      doc.text.append(tmpl.substr(pos));
      break;
    }
    doc.text.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    const std::string key(tmpl.substr(open + 1, close - open - 1));
    const Slot& slot = slots.at(key);
    const std::size_t start = doc.text.size();
    doc.text += slot.value;
    if (slot.sensitive) {
      doc.spans.push_back({start, doc.text.size(), slot.kind});
    }
    pos = close + 1;
  }
  return doc;
}

// Dialog templates are assembled from turn pools; {NAME}, {PHONE}, {ORDER}
// and {TRACK} are PII slots, {ITEM} is ordinary text.
constexpr std::array<const char*, 4> kDialogRequests = {
    "USR: Hello robot. I ordered {ITEM} several days ago but I can't track "
    "it.\n",
    "USR: Hi. Where is my package?\n",
    "USR: Hi, my order of {ITEM} has not arrived yet.\n",
    "USR: I would like to check on {ITEM} that I ordered last week.\n"};

constexpr std::array<const char*, 4> kDialogNameAnswers = {
    "USR: {NAME}\n", "USR: I am {NAME}.\n", "USR: It is {NAME}.\n",
    "USR: My full name is {NAME}.\n"};

constexpr std::array<const char*, 2> kDialogOrderTurns = {
    "SYS: Verify your order number please.\nUSR: It's {ORDER}.\n",
    "SYS: What is your order number?\nUSR: The order number is {ORDER}.\n"};

constexpr std::array<const char*, 2> kDialogPhoneTurns = {
    "SYS: Verify your phone number.\nUSR: You can reach me at {PHONE}.\n",
    "SYS: Could you give me your phone number?\nUSR: Sure, it is {PHONE}.\n"};

constexpr std::array<const char*, 3> kDialogTrackTurns = {
    "SYS: You can track your package with your tracking number, which is "
    "{TRACK}. Are you happy about my answer?\n",
    "SYS: The tracking number is {TRACK}. Anything else?\n",
    "SYS: Your package is on its way. The tracking number is {TRACK}.\n"};

constexpr std::array<const char*, 3> kDialogClosers = {
    "USR: All good. See you.\nSYS: Have a nice day! Bye.\n",
    "USR: All good.\n",
    "USR: No, thank you.\nSYS: Goodbye!\n"};

std::string dialog_template(Rng& rng) {
  std::string t = "SYS: Hello, I am the customer support bot. What can I do "
                  "for you?\n";
  t += pick(rng, kDialogRequests);
  t += "SYS: Could you verify your full name?\n";
  t += pick(rng, kDialogNameAnswers);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0:
      t += pick(rng, kDialogOrderTurns);
      break;
    case 1:
      t += pick(rng, kDialogPhoneTurns);
      break;
    default:
      t += pick(rng, kDialogOrderTurns);
      t += pick(rng, kDialogPhoneTurns);
      break;
  }
  t += pick(rng, kDialogTrackTurns);
  t += pick(rng, kDialogClosers);
  return t;
}

constexpr std::array<const char*, 2> kBioOpeners = {
    "My name is {NAME}, and I would like to share some aspects of my life's "
    "journey with you. ",
    "Hello, I am {NAME}, and this is a short story about my life. "};

constexpr std::array<const char*, 2> kBioHomes = {
    "I have had the pleasure of living in various places throughout my life, "
    "but I currently reside at {ADDRESS}. ",
    "These days I live at {ADDRESS}, a quiet place that I call home. "};

constexpr std::array<const char*, 3> kBioMiddles = {
    "I work as a {JOB} and I enjoy {HOBBY} on weekends. ",
    "For many years I have worked as a {JOB}, and in my free time I love "
    "{HOBBY}. ",
    "My friends know me for {HOBBY}, although my job as a {JOB} keeps me "
    "busy. "};

constexpr std::array<const char*, 2> kBioContacts = {
    "If you want to get in touch, you can reach me via email at {EMAIL} or "
    "by phone at {PHONE}.\n",
    "Feel free to write to {EMAIL} or call me at {PHONE}.\n"};

std::string bio_template(Rng& rng) {
  std::string t = pick(rng, kBioOpeners);
  t += pick(rng, kBioHomes);
  t += pick(rng, kBioMiddles);
  t += pick(rng, kBioContacts);
  return t;
}

std::map<std::string, Slot> sensitive_slots(Rng& rng) {
  const Person person = sample_person(rng);
  std::map<std::string, Slot> slots;
  slots["NAME"] = {person.first + " " + person.last, true, EntityKind::kName};
  slots["PHONE"] = {sample_phone(rng), true, EntityKind::kPhone};
  slots["ORDER"] = {sample_order_id(rng), true, EntityKind::kOrderId};
  slots["TRACK"] = {upper_alnum(rng, 10), true, EntityKind::kTrackingId};
  slots["EMAIL"] = {sample_email(rng, person), true, EntityKind::kEmail};
  slots["ADDRESS"] = {sample_address(rng), true, EntityKind::kAddress};
  return slots;
}

std::map<std::string, Slot> placeholder_slots(Rng& rng) {
  const auto& ph = placeholders();
  std::map<std::string, Slot> slots;
  slots["NAME"] = {pick(rng, ph.at(EntityKind::kName))};
  slots["PHONE"] = {pick(rng, ph.at(EntityKind::kPhone))};
  slots["ORDER"] = {pick(rng, ph.at(EntityKind::kOrderId))};
  slots["TRACK"] = {pick(rng, ph.at(EntityKind::kTrackingId))};
  slots["EMAIL"] = {pick(rng, ph.at(EntityKind::kEmail))};
  slots["ADDRESS"] = {pick(rng, ph.at(EntityKind::kAddress))};
  return slots;
}

void add_plain_slots(Rng& rng, std::map<std::string, Slot>& slots) {
  slots["ITEM"] = {pick(rng, kItems)};
  slots["JOB"] = {pick(rng, kJobs)};
  slots["HOBBY"] = {pick(rng, kHobbies)};
}

Rng make_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return Rng(seq);
}

std::string make_doc_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%06zu", index);
  return std::string(prefix) + buf;
}

void require_docs(std::size_t n_docs) {
  if (n_docs == 0) throw ConfigError("n_docs must be at least 1");
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_upper_word_start(std::string_view text, std::size_t i) {
  return (i == 0 || !is_word_char(text[i - 1])) &&
         std::isupper(static_cast<unsigned char>(text[i])) != 0;
}

// Finds "<First> <Last>" pairs whose words both come from the gazetteer.
void gazetteer_matches(std::string_view text, const PatternSet& patterns,
                       std::vector<SensitiveSpan>& out) {
  if (patterns.gazetteer_first.empty() || patterns.gazetteer_last.empty()) {
    return;
  }
  const std::unordered_set<std::string_view> first(
      patterns.gazetteer_first.begin(), patterns.gazetteer_first.end());
  const std::unordered_set<std::string_view> last(
      patterns.gazetteer_last.begin(), patterns.gazetteer_last.end());
  auto word_end = [&](std::size_t i) {
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i])))
      ++i;
    return i;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_upper_word_start(text, i)) continue;
    const std::size_t e1 = word_end(i);
    if (e1 >= text.size() || text[e1] != ' ') continue;
    if (!first.contains(text.substr(i, e1 - i))) continue;
    const std::size_t s2 = e1 + 1;
    if (s2 >= text.size() || !is_upper_word_start(text, s2)) continue;
    const std::size_t e2 = word_end(s2);
    if (e2 < text.size() && is_word_char(text[e2])) continue;
    if (!last.contains(text.substr(s2, e2 - s2))) continue;
    out.push_back({i, e2, EntityKind::kName});
  }
}

std::vector<std::pair<EntityKind, std::regex>> compile(
    const PatternSet& patterns) {
  std::vector<std::pair<EntityKind, std::regex>> compiled;
  for (const auto& [kind, rule] : patterns.rules) {
    if (rule.empty()) {
      throw ConfigError("empty pattern for kind " + std::string(to_string(kind)));
    }
    try {
      compiled.emplace_back(kind, std::regex(rule, std::regex::ECMAScript));
    } catch (const std::regex_error& e) {
      throw ConfigError("malformed pattern for kind " +
                        std::string(to_string(kind)) + ": " + e.what());
    }
  }
  return compiled;
}

}  // namespace

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::kName: return "name";
    case EntityKind::kPhone: return "phone";
    case EntityKind::kEmail: return "email";
    case EntityKind::kAddress: return "address";
    case EntityKind::kOrderId: return "order_id";
    case EntityKind::kTrackingId: return "tracking_id";
  }
  return "unknown";
}

EntityKind entity_kind_from_string(std::string_view tag) {
  for (EntityKind k :
       {EntityKind::kName, EntityKind::kPhone, EntityKind::kEmail,
        EntityKind::kAddress, EntityKind::kOrderId, EntityKind::kTrackingId}) {
    if (to_string(k) == tag) return k;
  }
  throw ConfigError("unknown entity kind: " + std::string(tag));
}

std::string_view to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::kDialog: return "dialog";
    case DatasetTag::kBio: return "bio";
    case DatasetTag::kPretrain: return "pretrain";
  }
  return "unknown";
}

DatasetTag dataset_tag_from_string(std::string_view tag) {
  if (tag == "dialog") return DatasetTag::kDialog;
  if (tag == "bio") return DatasetTag::kBio;
  if (tag == "pretrain") return DatasetTag::kPretrain;
  throw ConfigError("unknown dataset tag: " + std::string(tag));
}

PatternSet PatternSet::defaults() {
  PatternSet p;
  p.rules[EntityKind::kPhone] = R"(\b\d{3}[.-]\d{3}[.-]\d{4}\b)";
  p.rules[EntityKind::kOrderId] = R"(\b\d{3}-\d{5}-\d{4}\b)";
  p.rules[EntityKind::kTrackingId] = R"(\b[A-Z0-9]{10}\b)";
  p.rules[EntityKind::kEmail] =
      R"(\b[a-z]+-[a-z]+@(outlook\.com|gmail\.com|yahoo\.com|proton\.me|icloud\.com)\b)";
  p.rules[EntityKind::kAddress] =
      R"(\b\d{2,4} [A-Z][a-z]+ (Street|Avenue|Road|Lane|Trail|Drive|Court|Way|Place|Boulevard)\b)";
  p.gazetteer_first = first_names();
  p.gazetteer_last = last_names();
  return p;
}

std::vector<SensitiveSpan> regex_annotate(std::string_view text,
                                          const PatternSet& patterns) {
  if (patterns.rules.contains(EntityKind::kName)) {
    throw ConfigError("names are matched by the gazetteer, not by a rule");
  }
  const auto compiled = compile(patterns);
  std::vector<SensitiveSpan> candidates;
  for (const auto& [kind, re] : compiled) {
    using It = std::regex_iterator<std::string_view::const_iterator>;
    for (It it(text.begin(), text.end(), re), end; it != end; ++it) {
      const auto start = static_cast<std::size_t>(it->position(0));
      const auto len = static_cast<std::size_t>(it->length(0));
      if (len > 0) candidates.push_back({start, start + len, kind});
    }
  }
  gazetteer_matches(text, patterns, candidates);

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const SensitiveSpan& a, const SensitiveSpan& b) {
                     if (a.start != b.start) return a.start < b.start;
                     return (a.end - a.start) > (b.end - b.start);
                   });
  std::vector<SensitiveSpan> spans;
  std::size_t covered = 0;
  for (const auto& c : candidates) {
    if (!spans.empty() && c.start < covered) continue;
    spans.push_back(c);
    covered = c.end;
  }
  return spans;
}

bool matches_grammar(EntityKind kind, std::string_view value,
                     const PatternSet& patterns) {
  if (kind == EntityKind::kName) {
    std::vector<SensitiveSpan> found;
    gazetteer_matches(value, patterns, found);
    return found.size() == 1 && found[0].start == 0 &&
           found[0].end == value.size();
  }
  const auto it = patterns.rules.find(kind);
  if (it == patterns.rules.end()) return false;
  const std::regex re(it->second, std::regex::ECMAScript);
  return std::regex_match(value.begin(), value.end(), re);
}

Corpus generate_dialog_corpus(std::uint64_t seed, std::size_t n_docs) {
  require_docs(n_docs);
  Rng rng = make_rng(seed, 0xd1a1);
  Corpus corpus;
  corpus.reserve(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    const std::string tmpl = dialog_template(rng);
    auto slots = sensitive_slots(rng);
    add_plain_slots(rng, slots);
    AnnotatedDocument doc = render(tmpl, slots);
    doc.doc_id = make_doc_id("dialog", i);
    doc.dataset_tag = DatasetTag::kDialog;
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Corpus generate_bio_corpus(std::uint64_t seed, std::size_t n_docs) {
  require_docs(n_docs);
  Rng rng = make_rng(seed, 0xb10);
  Corpus corpus;
  corpus.reserve(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    const std::string tmpl = bio_template(rng);
    auto slots = sensitive_slots(rng);
    add_plain_slots(rng, slots);
    AnnotatedDocument doc = render(tmpl, slots);
    doc.doc_id = make_doc_id("bio", i);
    doc.dataset_tag = DatasetTag::kBio;
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

Corpus generate_pretrain_corpus(std::uint64_t seed, std::size_t n_docs) {
  require_docs(n_docs);
  Rng rng = make_rng(seed, 0x9e7);
  Corpus corpus;
  corpus.reserve(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    const bool dialog = std::bernoulli_distribution(0.5)(rng);
    const std::string tmpl = dialog ? dialog_template(rng) : bio_template(rng);
    auto slots = placeholder_slots(rng);
    add_plain_slots(rng, slots);
    AnnotatedDocument doc = render(tmpl, slots);
    doc.doc_id = make_doc_id("pretrain", i);
    doc.dataset_tag = DatasetTag::kPretrain;
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

CorpusSplit split_train_test(const Corpus& corpus, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  }
  if (corpus.empty()) throw ConfigError("cannot split an empty corpus");

  // Number of documents in which each span value occurs.
  std::unordered_map<std::string, std::size_t> value_docs;
  for (const auto& doc : corpus) {
    std::set<std::string> seen;
    for (const auto& s : doc.spans) seen.emplace(doc.span_text(s));
    for (const auto& v : seen) ++value_docs[v];
  }
  auto test_eligible = [&](const AnnotatedDocument& doc) {
    return std::none_of(doc.spans.begin(), doc.spans.end(), [&](const auto& s) {
      return value_docs.at(std::string(doc.span_text(s))) > 1;
    });
  };

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = make_rng(seed, 0x5b1);
  std::shuffle(order.begin(), order.end(), rng);

  const auto target = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(corpus.size())));
  std::vector<bool> in_test(corpus.size(), false);
  std::size_t n_test = 0;
  for (std::size_t idx : order) {
    if (n_test >= target) break;
    if (test_eligible(corpus[idx])) {
      in_test[idx] = true;
      ++n_test;
    }
  }

  CorpusSplit split;
  for (std::size_t idx : order) {
    (in_test[idx] ? split.test : split.train).push_back(corpus[idx]);
  }
  if (split.train.empty() || split.test.empty()) {
    throw ConfigError("split would leave the train or test side empty");
  }
  return split;
}

void validate_spans(const AnnotatedDocument& doc) {
  std::size_t prev_end = 0;
  for (const auto& s : doc.spans) {
    if (s.start >= s.end || s.end > doc.text.size()) {
      throw ConfigError("span out of bounds in " + doc.doc_id);
    }
    if (s.start < prev_end) {
      throw ConfigError("overlapping or unsorted spans in " + doc.doc_id);
    }
    prev_end = s.end;
  }
}

void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) {
    nlohmann::ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["text"] = doc.text;
    j["dataset_tag"] = std::string(to_string(doc.dataset_tag));
    j["spans"] = nlohmann::ordered_json::array();
    for (const auto& s : doc.spans) {
      j["spans"].push_back({{"start", s.start},
                            {"end", s.end},
                            {"kind", std::string(to_string(s.kind))}});
    }
    out << j.dump() << '\n';
  }
}

Corpus read_corpus_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnnotatedDocument doc;
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      doc.dataset_tag =
          dataset_tag_from_string(j.at("dataset_tag").get<std::string>());
      for (const auto& s : j.at("spans")) {
        doc.spans.push_back(
            {s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
             entity_kind_from_string(s.at("kind").get<std::string>())});
      }
      validate_spans(doc);
      corpus.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("corpus line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_corpus_jsonl(out, corpus);
  if (!out) throw IoError("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_corpus_jsonl(in);
}

}  // namespace puelab
