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

#include "puelab/lab.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <cstdlib>
#include <random>
#include <stdexcept>

#include <unistd.h>

#include "puelab/checkpoint.h"
#include "puelab/error.h"
#include "test_util.h"

namespace puelab {
void PrintTo(const TradeoffPoint& p, std::ostream* os) {
  *os << p.tag << "@" << p.epoch << "(" << p.privacy << ", " << p.utility_loss
      << ", " << p.flops_cumulative << ")";
}

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

::testing::AssertionResult same_bytes(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) {
    return ::testing::AssertionFailure() << "missing " << a << " or " << b;
  }
  if (slurp(a) == slurp(b)) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << a << " and " << b << " differ";
}

// Checks that every tag opened in `xml` is closed in order. Comments,
// declarations and attribute values containing '>' are not expected.
bool balanced_tags(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = xml.find('<', pos)) != std::string::npos) {
    const std::size_t end = xml.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = xml.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
  }
  return stack.empty();
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = haystack.find(needle); p != std::string::npos;
       p = haystack.find(needle, p + 1)) {
    ++n;
  }
  return n;
}

class TempDirTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("puelab_lab_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!std::getenv("PUELAB_KEEP")) fs::remove_all(dir_);
  }
  fs::path dir_;
};

// ---------------------------------------------------------------------------

std::vector<TradeoffPoint> three_points() {
  return {{"dp", "a", 1, 5.0, 2.0, 0}, {"fft", "b", 1, 3.0, 1.5, 0},
          {"lora", "c", 1, 6.0, 3.0, 0}};
}

TEST(ParetoTest, Examples) {
  const auto pts = three_points();
  const auto at4 = pareto_select(pts, 4.0);
  ASSERT_TRUE(at4.has_value());
  EXPECT_EQ(at4->privacy, 5.0);
  EXPECT_EQ(at4->utility_loss, 2.0);
  EXPECT_FALSE(pareto_select(pts, 10.0).has_value());
  const auto at0 = pareto_select(pts, 0.0);
  EXPECT_EQ(at0->privacy, 3.0);
  EXPECT_EQ(at0->utility_loss, 1.5);
  EXPECT_THROW(pareto_select(std::span<const TradeoffPoint>{}, 0.0),
               ConfigError);
}

TEST(ParetoTest, TieBreaks) {
  std::vector<TradeoffPoint> pts{{"fft", "x", 4, 2.0, 1.0, 0},
                                 {"fft", "x", 3, 3.0, 1.0, 0},
                                 {"fft", "x", 2, 3.0, 1.0, 0}};
  const auto best = pareto_select(pts, 0.0);
  EXPECT_EQ(best->epoch, 2);
  EXPECT_EQ(best->privacy, 3.0);
}

TEST(ParetoTest, SelectionIsNeverDominated) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TradeoffPoint> pts;
    for (int i = 0; i < 30; ++i) {
      // Coarse values force ties.
      pts.push_back({"fft", "t", i, static_cast<double>(coarse(rng)),
                     static_cast<double>(coarse(rng)), 0});
    }
    const double floor = u(rng) / 2;
    const auto best = pareto_select(pts, floor);
    if (!best) {
      for (const auto& p : pts) ASSERT_LT(p.privacy, floor);
      continue;
    }
    ASSERT_GE(best->privacy, floor);
    for (const auto& p : pts) {
      if (p.privacy < floor) continue;
      const bool dominates =
          p.privacy >= best->privacy && p.utility_loss <= best->utility_loss &&
          (p.privacy > best->privacy || p.utility_loss < best->utility_loss);
      ASSERT_FALSE(dominates);
    }
  }
}

TEST(TradeoffPointsTest, DrawnVerbatimFromReports) {
  EpochReport r;
  r.epoch = 4;
  r.method = "dp";
  r.loss_train_sensitive = 7.25;
  r.loss_test_nonsensitive = 1.125;
  r.flops_cumulative = 99.0;
  EpochReport missing = r;
  missing.loss_train_sensitive.reset();
  const std::vector<EpochReport> reports{r, missing};
  const auto pts = tradeoff_points("dp_sigma0.1", reports);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], (TradeoffPoint{"dp", "dp_sigma0.1", 4, 7.25, 1.125, 99.0}));
}

TEST_F(TempDirTest, PlotIsWellFormedWithSidecar) {
  std::vector<TradeoffPoint> pts;
  for (int e = 1; e <= 4; ++e) {
    pts.push_back({"fft", "fft", e, 6.0 - e, 2.0 - 0.1 * e, 1e12 * e});
    pts.push_back({"dp", "dp_sigma0.1", e, 8.0, 2.0 - 0.01 * e, 1.3e12 * e});
    pts.push_back({"lora", "lora_r16_a16", e, 7.0, 2.0 - 0.05 * e, 0.7e12 * e});
  }
  const auto svg = dir_ / "t.svg";
  const auto csv = dir_ / "t.csv";
  emit_tradeoff_plot(pts, svg, csv);
  const std::string text = slurp(svg);
  EXPECT_EQ(text.rfind("<?xml", 0), 0u);
  EXPECT_TRUE(balanced_tags(text));
  EXPECT_EQ(count_of(text, "<g class=\"curve\""), 3u);
  // The sidecar lists each run's points together, runs in first-seen order.
  std::vector<TradeoffPoint> grouped;
  for (const char* tag : {"fft", "dp_sigma0.1", "lora_r16_a16"}) {
    for (const auto& p : pts) {
      if (p.tag == tag) grouped.push_back(p);
    }
  }
  EXPECT_EQ(read_tradeoff_csv(csv), grouped);
}

TEST_F(TempDirTest, SingleMethodSingleCurve) {
  const std::vector<TradeoffPoint> pts{{"fft", "fft", 1, 5.0, 2.0, 1.0},
                                       {"fft", "fft", 2, 4.0, 1.9, 2.0}};
  emit_tradeoff_plot(pts, dir_ / "s.svg", dir_ / "s.csv");
  const std::string text = slurp(dir_ / "s.svg");
  EXPECT_TRUE(balanced_tags(text));
  EXPECT_EQ(count_of(text, "<g class=\"curve\""), 1u);
}

TEST_F(TempDirTest, PlotWriteFailureIsIoError) {
  const std::vector<TradeoffPoint> pts{{"fft", "fft", 1, 5.0, 2.0, 1.0}};
  EXPECT_THROW(emit_tradeoff_plot(pts, dir_ / "no" / "x.svg", dir_ / "x.csv"),
               IoError);
}

// ---------------------------------------------------------------------------

ExperimentPlan small_plan(const fs::path& out) {
  ExperimentPlan plan = ExperimentPlan::defaults(out, 5);
  plan.model = testing::small_config();
  plan.corpus.n_docs = 12;
  plan.pretrain.n_docs = 16;
  plan.pretrain.config.epochs = 1;
  plan.pretrain.config.warmup_steps = 0;
  for (auto& c : plan.sweep) {
    c.epochs = 2;
    c.warmup_steps = 1;
    c.lora.rank = 2;
    c.lora.alpha = 2;
    c.batch_size = 8;
  }
  return plan;
}

TEST_F(TempDirTest, SmallExperimentLayoutAndDeterminism) {
  const ExperimentResult a = run_experiment(small_plan(dir_ / "a"));
  const ExperimentResult b = run_experiment(small_plan(dir_ / "b"));
  ASSERT_EQ(a.runs.size(), 3u);
  for (const char* f : {"plan.json", "corpus.jsonl", "split.json",
                        "base/model.ckpt", "tradeoff.svg", "tradeoff.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  std::vector<TradeoffPoint> from_metrics;
  for (const auto& run : a.runs) {
    const fs::path rd = run.directory;
    for (const char* f : {"config.json", "flops.json", "metrics.csv",
                          "epoch_1.ckpt", "epoch_2.ckpt", "resume.ckpt"}) {
      EXPECT_TRUE(fs::exists(rd / f)) << rd / f;
    }
    const auto rows = load_metrics_csv(rd / "metrics.csv");
    EXPECT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows, run.reports);
    const auto pts = tradeoff_points(run.config.label(), rows);
    from_metrics.insert(from_metrics.end(), pts.begin(), pts.end());
    const fs::path other = dir_ / "b" / rd.filename();
    EXPECT_TRUE(same_bytes(rd / "metrics.csv", other / "metrics.csv"));
    EXPECT_TRUE(same_bytes(rd / "epoch_2.ckpt", other / "epoch_2.ckpt"));
  }
  EXPECT_EQ(read_tradeoff_csv(dir_ / "a" / "tradeoff.csv"), from_metrics);
  EXPECT_EQ(a.runs[0].directory, (dir_ / "a" / "fft").string());
  EXPECT_EQ(a.runs[1].directory, (dir_ / "a" / "dp_sigma0.1").string());
  EXPECT_EQ(a.runs[2].directory, (dir_ / "a" / "lora_r2_a2").string());
}

TEST_F(TempDirTest, EpochCheckpointsRebuildEvaluatedModel) {
  const ExperimentPlan plan = small_plan(dir_ / "e");
  const ExperimentResult res = run_experiment(plan);
  const ModelState base = load_model(res.base_model_path);
  const LabData data = prepare_data(plan.corpus, plan.model, plan.seed);
  for (const auto& run : res.runs) {
    const fs::path ck = fs::path(run.directory) / "epoch_2.ckpt";
    const ModelState m = load_epoch_model(ck, base);
    const EpochReport r = epoch_report(m, data.train, data.test, run.config, 2,
                                       run.reports[1].lr,
                                       run.reports[1].flops_cumulative,
                                       run.reports[1].steps_cumulative);
    EXPECT_EQ(r, run.reports[1]) << run.config.label();
  }
  const fs::path lora_ck = fs::path(res.runs[2].directory) / "epoch_1.ckpt";
  EXPECT_THROW(load_epoch_model(lora_ck), ConfigError);
}

TEST_F(TempDirTest, ResumeMatchesUninterruptedRun) {
  const ExperimentPlan plan = small_plan(dir_ / "r");
  const LabData data = prepare_data(plan.corpus, plan.model, plan.seed);
  const ModelState base = pretrain_base(plan.model, plan.pretrain, plan.seed);
  for (TrainConfig config : plan.sweep) {
    config.epochs = 3;
    const fs::path whole = dir_ / ("whole_" + config.label());
    const fs::path parts = dir_ / ("parts_" + config.label());
    run_config(base, data, config, whole);
    auto stop_after_two = [](const std::string& line) {
      if (line.find("epoch 2/3") != std::string::npos) {
        throw std::runtime_error("interrupted");
      }
    };
    EXPECT_THROW(run_config(base, data, config, parts, stop_after_two),
                 std::runtime_error);
    EXPECT_FALSE(fs::exists(parts / "epoch_3.ckpt"));
    std::vector<std::string> lines;
    const RunResult resumed = run_config(
        base, data, config, parts,
        [&](const std::string& l) { lines.push_back(l); });
    ASSERT_FALSE(lines.empty());
    EXPECT_NE(lines[0].find("resuming after epoch 2"), std::string::npos);
    EXPECT_EQ(resumed.reports.size(), 3u);
    EXPECT_TRUE(same_bytes(whole / "metrics.csv", parts / "metrics.csv"))
        << config.label();
    EXPECT_TRUE(same_bytes(whole / "epoch_3.ckpt", parts / "epoch_3.ckpt"));
  }
}

TEST_F(TempDirTest, CorruptResumeCheckpointAborts) {
  const ExperimentPlan plan = small_plan(dir_ / "c");
  const LabData data = prepare_data(plan.corpus, plan.model, plan.seed);
  const ModelState base = init_params(plan.model, 1);
  TrainConfig config = plan.sweep[0];
  const fs::path rd = dir_ / "run";
  run_config(base, data, config, rd);
  std::string bytes = slurp(rd / "resume.ckpt");
  bytes[bytes.size() / 2 + 40] ^= 0x10;
  std::ofstream(rd / "resume.ckpt", std::ios::binary | std::ios::trunc) << bytes;
  EXPECT_THROW(run_config(base, data, config, rd), CheckpointError);
}

TEST_F(TempDirTest, ChangedConfigInRunDirectoryRejected) {
  const ExperimentPlan plan = small_plan(dir_ / "d");
  const LabData data = prepare_data(plan.corpus, plan.model, plan.seed);
  const ModelState base = init_params(plan.model, 1);
  TrainConfig config = plan.sweep[0];
  config.epochs = 1;
  config.warmup_steps = 0;
  run_config(base, data, config, dir_ / "run");
  config.learning_rate *= 2;
  EXPECT_THROW(run_config(base, data, config, dir_ / "run"), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(PlanTest, DefaultsMirrorComparisonSettings) {
  const ExperimentPlan plan = ExperimentPlan::defaults("out", 7);
  ASSERT_EQ(plan.sweep.size(), 3u);
  EXPECT_EQ(plan.sweep[0].method, Method::kFft);
  EXPECT_EQ(plan.sweep[1].method, Method::kDp);
  EXPECT_EQ(plan.sweep[1].dp.noise_scale, 0.1);
  EXPECT_EQ(plan.sweep[1].dp.clip_threshold, 1e-2);
  EXPECT_EQ(plan.sweep[2].method, Method::kLora);
  EXPECT_EQ(plan.sweep[2].lora.rank, 16);
  EXPECT_EQ(plan.sweep[2].lora.alpha, 16.0);
  for (const auto& c : plan.sweep) {
    EXPECT_EQ(c.epochs, 50);
    EXPECT_EQ(c.seed, 7u);
  }
  EXPECT_EQ(plan.corpus.n_docs, 200);
  EXPECT_EQ(plan.pretrain.n_docs, 2000);
  EXPECT_EQ(plan.pretrain.config.epochs, 3);
}

TEST(PlanTest, JsonRoundTrip) {
  ExperimentPlan plan = ExperimentPlan::defaults("out", 7);
  plan.corpus.dataset = DatasetTag::kBio;
  plan.sweep.pop_back();
  const ExperimentPlan back =
      plan_from_json(plan_to_json(plan), ExperimentPlan::defaults("x", 0));
  EXPECT_EQ(plan_to_json(back), plan_to_json(plan));
  EXPECT_THROW(plan_from_json({{"corpus", {{"dataset", "pretrain"}}}},
                              ExperimentPlan::defaults("x", 0))
                   .validate(),
               ConfigError);
}

TEST(SeedTest, DerivedSeedsDifferByPurpose) {
  EXPECT_NE(derive_seed(0, "corpus"), derive_seed(0, "split"));
  EXPECT_NE(derive_seed(0, "corpus"), derive_seed(1, "corpus"));
  EXPECT_EQ(derive_seed(3, "init"), derive_seed(3, "init"));
}

// ---------------------------------------------------------------------------

TEST(ProbeTest, UntrainedModelExtractsNothing) {
  const Corpus docs = generate_dialog_corpus(2, 5);
  const ModelState m = init_params(testing::small_config(), 1);
  const std::vector<EntityKind> kinds{EntityKind::kTrackingId};
  const ProbeReport r = recollection_probe(m, docs, 20, kinds);
  EXPECT_EQ(r.size(), 5u);
  EXPECT_EQ(r.exact_match_rate(), 0.0);
  for (const auto& p : r.results) {
    EXPECT_EQ(p.kind, EntityKind::kTrackingId);
    EXPECT_EQ(p.generated.size(), p.value.size());
  }
  EXPECT_THROW(recollection_probe(m, docs, 0), ConfigError);
}

TEST(ProbeTest, RateIsMonotoneInMatchLength) {
  ProbeReport r;
  r.results = {{"a", EntityKind::kPhone, "123", "123"},
               {"b", EntityKind::kPhone, "456", "450"},
               {"c", EntityKind::kPhone, "789", "7xx"},
               {"d", EntityKind::kPhone, "000", "x00"}};
  double prev = 1.0;
  for (std::size_t len = 0; len <= 4; ++len) {
    EXPECT_LE(r.rate_at(len), prev);
    prev = r.rate_at(len);
  }
  EXPECT_EQ(r.rate_at(0), 1.0);
  EXPECT_EQ(r.rate_at(1), 0.75);
  EXPECT_EQ(r.rate_at(2), 0.5);
  EXPECT_EQ(r.exact_match_rate(), 0.25);
  EXPECT_EQ(ProbeReport{}.exact_match_rate(), 0.0);
}

TEST(ProbeTest, OverfitDocumentIsExtracted) {
  // One short document trained to near-zero loss; context 64 holds it all.
  AnnotatedDocument doc{
      "solo", "Order 843-58572-7002 ships to Lena Ortiz.",
      {{6, 20, EntityKind::kOrderId}}, DatasetTag::kDialog};
  ModelConfig mc = testing::small_config();
  mc.context_len = 64;
  const auto windows = encode_document(doc, SplitTag::kTrain, 64);
  TrainConfig c = TrainConfig::defaults_for(Method::kFft);
  c.learning_rate = 1e-2;
  c.epochs = 300;
  c.warmup_steps = 5;
  TrainState state = make_train_state(init_params(mc, 1), c, windows.size());
  const std::vector<AnnotatedDocument> docs{doc};
  EXPECT_EQ(recollection_probe(state.model, docs, 6).exact_match_rate(), 0.0);
  for (int e = 0; e < c.epochs; ++e) train_epoch(state, windows, c);
  EXPECT_EQ(recollection_probe(state.model, docs, 6).exact_match_rate(), 1.0);
}

}  // namespace
}  // namespace puelab
