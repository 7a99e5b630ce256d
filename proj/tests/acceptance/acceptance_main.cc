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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   acceptance --workdir DIR [--only 1,2,9]
//
// Criteria 6, 7, 8 and 11 share the default dialog sweep written under
// DIR/run_a (and DIR/run_b for the determinism rerun).

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "puelab/checkpoint.h"
#include "puelab/corpus.h"
#include "puelab/efficiency.h"
#include "puelab/error.h"
#include "puelab/finetune.h"
#include "puelab/lab.h"
#include "puelab/metrics.h"
#include "puelab/model.h"
#include "puelab/tokens.h"
#include "test_util.h"

namespace puelab {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::uint64_t kSeed = 0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// 1. Backward pass against central differences. Weights are drawn at standard
// deviation 0.3 so attention is far from uniform; at the 0.02 init scale the
// query and key gradients are ~1e-7, where the roundoff of a 1e-5 difference
// quotient (~1e-10) alone is a relative error of ~1e-4.

Outcome gradient_check() {
  const auto start = Clock::now();
  const ModelConfig config = testing::tiny_config();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> weight(0.0, 0.3);
  double worst = 0.0;
  std::size_t params = 0;
  for (int trial = 0; trial < 3; ++trial) {
    ModelState state = init_params(config, 500 + trial);
    for (double& v : state.values) v = weight(rng);
    params = state.num_params();
    const auto batch = testing::random_batch(rng, 3, 3, 8);
    const GradientSet grad = backward(state, batch);
    ModelState probe = state;
    const double h = 1e-5;
    for (std::size_t i = 0; i < probe.values.size(); ++i) {
      const double saved = probe.values[i];
      probe.values[i] = saved + h;
      const double up = batch_loss(probe, batch);
      probe.values[i] = saved - h;
      const double down = batch_loss(probe, batch);
      probe.values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.values[i];
      const double err =
          std::fabs(analytic - numeric) /
          std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
      worst = std::max(worst, err);
    }
  }
  const double elapsed = seconds_since(start);
  return {params <= 5000 && worst <= 1e-4 && elapsed <= 60.0,
          "params " + std::to_string(params) + ", max relative error " +
              fmt(worst) + ", " + fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Clipping contract.

double dot(const GradientSet& a, const GradientSet& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    s += static_cast<long double>(a.values[i]) * b.values[i];
  }
  return static_cast<double>(s);
}

Outcome clip_contract() {
  std::mt19937_64 rng(202);
  ParamLayout layout;
  layout.add("w", {7, 5});
  layout.add("b", {5});
  layout.add("s", {1});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-5.0, 1.0);
  const double thresholds[] = {1e-3, 1e-2, 1.0};
  double worst_excess = -kInf;
  double worst_cos = 0.0;
  int identity_cases = 0;
  bool identity_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const double t = thresholds[trial % 3];
    GradientSet g = GradientSet::zeros(layout);
    const double scale = std::pow(10.0, log_scale(rng));
    for (double& v : g.values) v = scale * normal(rng);
    const GradientSet c = clip(g, t);
    const double gn = g.global_norm();
    const double cn = c.global_norm();
    worst_excess = std::max(worst_excess, cn - t);
    if (gn <= t) {
      ++identity_cases;
      identity_ok = identity_ok && c.values == g.values;
    }
    worst_cos = std::max(worst_cos, std::fabs(dot(c, g) / (cn * gn) - 1.0));
  }
  const bool pass = worst_excess <= 1e-12 && identity_ok && worst_cos <= 1e-12;
  return {pass, "max(norm - T) " + fmt(worst_excess) + ", identity cases " +
                    std::to_string(identity_cases) +
                    (identity_ok ? " exact" : " CHANGED") +
                    ", max |cos - 1| " + fmt(worst_cos)};
}

// ---------------------------------------------------------------------------
// 3. DP with no noise and no clipping is a plain gradient step.

Outcome dp_degeneracy() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = testing::random_batch(rng, 4, 3, 32);
    const ModelState init = init_params(testing::small_config(), 30 + trial);
    TrainConfig fft = TrainConfig::defaults_for(Method::kFft);
    fft.optimizer = OptimizerKind::kPlain;
    TrainConfig dp = TrainConfig::defaults_for(Method::kDp);
    dp.optimizer = OptimizerKind::kPlain;
    dp.batch_size = 4;
    dp.dp.noise_scale = 0.0;
    dp.dp.clip_threshold = kInf;
    ModelState a = init;
    ModelState b = init;
    OptimizerState oa = OptimizerState::zeros(a.num_params());
    OptimizerState ob = oa;
    NoiseStream noise(trial);
    fft_step(a, batch, fft, oa, 0.05);
    dp_step(b, batch, dp, ob, 0.05, noise);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      worst = std::max(worst, std::fabs(a.values[i] - b.values[i]));
    }
  }
  return {worst <= 1e-12, "max |fft - dp| " + fmt(worst) + " over 10 batches"};
}

// ---------------------------------------------------------------------------
// 4. Noise standard deviation.

Outcome noise_calibration() {
  ParamLayout layout;
  layout.add("w", {1000000});
  NoiseStream noise(404);
  const GradientSet g =
      add_noise(GradientSet::zeros(layout), 0.5, 0.01, noise);
  double mean = 0.0;
  for (double v : g.values) mean += v;
  mean /= static_cast<double>(g.values.size());
  double var = 0.0;
  for (double v : g.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(g.values.size() - 1));
  const double target = 0.5 * 0.01;
  const double rel = std::fabs(sd - target) / target;
  return {rel <= 0.01,
          "stddev " + fmt(sd) + " vs " + fmt(target) + " (" +
              fmt(100 * rel) + "% off)"};
}

// ---------------------------------------------------------------------------
// 5. LoRA invariants at the default model size.

Outcome lora_invariants() {
  const ModelConfig config;
  const ModelState base = init_params(config, 505);
  const ModelState snapshot = base;
  const TrainConfig lora = TrainConfig::defaults_for(Method::kLora);
  std::mt19937_64 rng(505);

  // (a) zero-initialized adapters reproduce the base logits exactly.
  LoraAdapters adapters =
      lora_init(base, lora.lora.rank, lora.lora.alpha, {}, 505);
  bool equal_outputs = true;
  {
    const ModelState effective = lora_effective(base, adapters);
    for (const auto& w : testing::random_batch(rng, 4, 16, 128)) {
      equal_outputs = equal_outputs && forward(effective, w.token_ids).data ==
                                           forward(base, w.token_ids).data;
    }
  }

  // (b), (c) over 100 steps.
  OptimizerState opt = OptimizerState::zeros(adapters.num_params());
  const int r = lora.lora.rank;
  double worst_tail = 0.0;  // largest sigma_{r+1} / sigma_max seen
  bool rank_ok = true;
  for (int step = 0; step < 100; ++step) {
    const auto batch = testing::random_batch(rng, 2, 16, 48);
    lora_step(base, adapters, batch, lora, opt, 1e-2);
    if (step % 10 != 9) continue;
    for (const auto& target : adapters.targets) {
      const ParamEntry& e = base.layout.find(target);
      const std::vector<double> delta = adapters.delta(target);
      const Eigen::Map<const RowMat> m(delta.data(),
                                       static_cast<Eigen::Index>(e.shape[0]),
                                       static_cast<Eigen::Index>(e.shape[1]));
      const Eigen::VectorXd sv =
          Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
      if (sv(0) <= 0.0) continue;
      for (Eigen::Index i = r; i < sv.size(); ++i) {
        worst_tail = std::max(worst_tail, sv(i) / sv(0));
        rank_ok = rank_ok && sv(i) < 1e-10 * sv(0);
      }
    }
  }
  const bool frozen =
      std::memcmp(base.values.data(), snapshot.values.data(),
                  base.values.size() * sizeof(double)) == 0;
  return {equal_outputs && frozen && rank_ok,
          std::string("(a) outputs ") + (equal_outputs ? "identical" : "DIFFER") +
              ", (b) base " + (frozen ? "bitwise frozen" : "MODIFIED") +
              ", (c) max sigma_{r+1}/sigma_max " + fmt(worst_tail) +
              " over " + std::to_string(adapters.targets.size()) +
              " targets, r=" + std::to_string(r)};
}

// ---------------------------------------------------------------------------
// 9. Efficiency orderings and formulas.

Outcome efficiency_orderings(const LabData& data, const ModelState& base) {
  const ModelConfig config;
  const double n = static_cast<double>(model_layout(config).total_size());
  const TrainConfig lora = TrainConfig::defaults_for(Method::kLora);
  const double na = static_cast<double>(
      lora_init(base, lora.lora.rank, lora.lora.alpha, {}, 1).num_params());

  // One common batch for every method.
  const std::size_t b = 16;
  const std::span<const TokenBatch> batch(data.train.data(),
                                          std::min(b, data.train.size()));
  double tokens = 0.0;
  for (const auto& w : batch) tokens += static_cast<double>(w.num_targets());
  const double bsz = static_cast<double>(batch.size());

  const double a_fft = flops_per_method(Method::kFft, tokens, n, na, bsz).flops_per_step;
  const double a_dp = flops_per_method(Method::kDp, tokens, n, na, bsz).flops_per_step;
  const double a_lora = flops_per_method(Method::kLora, tokens, n, na, bsz).flops_per_step;
  const bool analytic_order = a_lora < a_fft && a_fft < a_dp;

  auto measured = [&](Method m) {
    TrainConfig c = TrainConfig::defaults_for(m);
    c.batch_size = static_cast<int>(batch.size());
    return static_cast<double>(measure_one_step(base, batch, c));
  };
  const double m_fft = measured(Method::kFft);
  const double m_dp = measured(Method::kDp);
  const double m_lora = measured(Method::kLora);
  const bool measured_order = m_lora < m_fft && m_fft < m_dp;

  // Adapter fractions up to 2%.
  double lo = kInf, hi = -kInf;
  for (double frac : {0.0005, 0.001, 0.005, 0.01, 0.02}) {
    const double big_n = 1e9;
    const double ratio =
        flops_per_method(Method::kLora, 1e6, big_n, frac * big_n, 8).flops_per_step /
        flops_per_method(Method::kFft, 1e6, big_n, frac * big_n, 8).flops_per_step;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  const bool window = lo >= 0.6 && hi <= 0.72;

  const bool six_dn = flops_fft(tokens, n) == 6.0 * tokens * n &&
                      flops_fft(12345.0, 678.0) == 6.0 * 12345.0 * 678.0;
  const bool four_n = memory_estimate(Method::kFft, n, na, bsz) == 4.0 * n;

  std::ostringstream d;
  d << "analytic lora/fft/dp " << fmt(a_lora / a_fft) << "/1/"
    << fmt(a_dp / a_fft) << ", measured " << fmt(m_lora / m_fft) << "/1/"
    << fmt(m_dp / m_fft) << " on " << batch.size()
    << " windows; lora/fft for Na/N<=0.02 in [" << fmt(lo) << ", " << fmt(hi)
    << "] (default config Na/N " << fmt(na / n) << " gives "
    << fmt(a_lora / a_fft) << "); 6DN " << (six_dn ? "exact" : "WRONG")
    << ", memory 4N " << (four_n ? "exact" : "WRONG");
  return {analytic_order && measured_order && window && six_dn && four_n,
          d.str()};
}

// ---------------------------------------------------------------------------
// 10. Extraction from a single overfit document.

Outcome recollection(const LabData& data) {
  const ModelConfig config;
  const AnnotatedDocument* doc = nullptr;
  for (const auto& d : data.corpus) {
    if (d.spans.size() >= 2) {
      doc = &d;
      break;
    }
  }
  if (doc == nullptr) return {false, "no document with PII spans"};
  const std::vector<AnnotatedDocument> docs{*doc};
  // The whole window before each span: the prompt the document was trained
  // under. Short prompts shift positions and are reported separately.
  const auto prefix = static_cast<std::size_t>(config.context_len);
  const ModelState untrained = init_params(config, 1010);
  const double before = recollection_probe(untrained, docs, prefix).exact_match_rate();

  const auto windows =
      encode_document(*doc, SplitTag::kTrain,
                      static_cast<std::size_t>(config.context_len));
  TrainConfig fft = TrainConfig::defaults_for(Method::kFft);
  fft.learning_rate = 1e-3;
  fft.epochs = 300;
  fft.warmup_steps = 10;
  fft.seed = 1010;
  TrainState state = make_train_state(untrained, fft, windows.size());
  double loss = 0.0;
  for (int e = 0; e < fft.epochs; ++e) loss = train_epoch(state, windows, fft).mean_loss;
  const ProbeReport after = recollection_probe(state.model, docs, prefix);
  const double short_rate =
      recollection_probe(state.model, docs, 32).exact_match_rate();
  return {before == 0.0 && after.exact_match_rate() == 1.0,
          "untrained rate " + fmt(before) + ", after " +
              std::to_string(fft.epochs) + " FFT epochs (final loss " +
              fmt(loss) + ") rate " + fmt(after.exact_match_rate()) + " over " +
              std::to_string(after.size()) + " spans of " + doc->doc_id +
              "; 32-byte prompts " + fmt(short_rate)};
}

// ---------------------------------------------------------------------------
// The default sweep.

struct SweepRun {
  ExperimentResult result;
  double pretrain_seconds = 0.0;
  double sweep_seconds = 0.0;
};

SweepRun default_sweep(const fs::path& dir) {
  fs::remove_all(dir);
  ExperimentPlan plan = ExperimentPlan::defaults(dir.string(), kSeed);
  const auto start = Clock::now();
  std::optional<Clock::time_point> pretrain_done;
  plan.log = [&](const std::string& line) {
    if (line.rfind("pretrain", 0) == 0) pretrain_done = Clock::now();
    std::cout << "  [" << dir.filename().string() << "] " << line << std::endl;
  };
  SweepRun run;
  run.result = run_experiment(plan);
  const auto mark = pretrain_done.value_or(start);
  run.pretrain_seconds = std::chrono::duration<double>(mark - start).count();
  run.sweep_seconds = seconds_since(mark);
  return run;
}

const RunResult& run_of(const ExperimentResult& r, Method m) {
  for (const auto& run : r.runs) {
    if (run.config.method == m) return run;
  }
  throw ConfigError("sweep lacks a method");
}

// 6. Recomputed from the written metrics.csv files.
Outcome decomposition(const ExperimentResult& r) {
  double worst = 0.0;
  std::size_t rows = 0;
  auto rel = [](double all, double s, std::size_t ns, double o,
                std::size_t no) {
    const double mixed = (static_cast<double>(ns) * s +
                          static_cast<double>(no) * o) /
                         static_cast<double>(ns + no);
    return std::fabs(all - mixed) / std::max(std::fabs(all), 1e-300);
  };
  for (const auto& run : r.runs) {
    for (const auto& e :
         load_metrics_csv((fs::path(run.directory) / "metrics.csv").string())) {
      ++rows;
      worst = std::max(worst, rel(*e.loss_train_all, *e.loss_train_sensitive,
                                  e.n_train_sensitive,
                                  *e.loss_train_nonsensitive,
                                  e.n_train_nonsensitive));
      worst = std::max(worst, rel(*e.loss_test_all, *e.loss_test_sensitive,
                                  e.n_test_sensitive, *e.loss_test_nonsensitive,
                                  e.n_test_nonsensitive));
    }
  }
  return {rows > 0 && worst <= 1e-9,
          std::to_string(rows) + " epoch reports, max relative gap " + fmt(worst)};
}

// 7. The base model before fine-tuning.
Outcome base_gap(const ExperimentResult& r, const LabData& data) {
  const ModelState base = load_model(r.base_model_path);
  std::vector<TokenBatch> all = data.train;
  all.insert(all.end(), data.test.begin(), data.test.end());
  const SplitLosses s = evaluate_split(base, all);
  const double gap = *s.sensitive() - *s.nonsensitive();
  return {gap >= 1.0, "sensitive " + fmt(*s.sensitive()) + " nats, non-sensitive " +
                          fmt(*s.nonsensitive()) + " nats, gap " + fmt(gap)};
}

// 8. Privacy ordering and drops at the final epoch.
Outcome comparison(const SweepRun& run) {
  const auto& fft = run_of(run.result, Method::kFft).reports;
  const auto& dp = run_of(run.result, Method::kDp).reports;
  const auto& lora = run_of(run.result, Method::kLora).reports;
  const double p_fft = *fft.back().loss_train_sensitive;
  const double p_dp = *dp.back().loss_train_sensitive;
  const double p_lora = *lora.back().loss_train_sensitive;
  const double fft_share = p_fft / *fft.front().loss_train_sensitive;
  const double dp_share = p_dp / *dp.front().loss_train_sensitive;
  const bool order = p_dp > p_lora && p_lora > p_fft;
  const bool drops = fft_share < 0.5 && dp_share > 0.8;
  const bool budget = run.sweep_seconds <= 600.0;
  std::ostringstream d;
  d << "epoch " << fft.back().epoch << " privacy dp " << fmt(p_dp) << ", lora "
    << fmt(p_lora) << ", fft " << fmt(p_fft) << "; fft at "
    << fmt(100 * fft_share) << "% of epoch 1, dp at " << fmt(100 * dp_share)
    << "%; sweep " << fmt(run.sweep_seconds) << " s (pretraining "
    << fmt(run.pretrain_seconds) << " s)";
  return {order && drops && budget, d.str()};
}

// 11. Byte equality of two runs.
Outcome determinism(const ExperimentResult& a, const ExperimentResult& b) {
  int same = 0;
  int total = 0;
  for (const auto& run : a.runs) {
    const fs::path name = fs::path(run.directory).filename();
    const fs::path pa = fs::path(a.output_dir) / name / "metrics.csv";
    const fs::path pb = fs::path(b.output_dir) / name / "metrics.csv";
    ++total;
    if (fs::exists(pa) && fs::exists(pb) && slurp(pa) == slurp(pb)) ++same;
  }
  return {total > 0 && same == total,
          std::to_string(same) + "/" + std::to_string(total) +
              " metrics.csv files byte-identical"};
}

}  // namespace
}  // namespace puelab

int main(int argc, char** argv) {
  using namespace puelab;
  CLI::App app{"Acceptance criteria runner"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for sweep runs");
  app.add_option("--only", only, "criteria to run (default: all)")
      ->delimiter(',')
      ->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected =
      only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}
                   : std::set<int>(only.begin(), only.end());

  std::map<int, Outcome> outcomes;
  auto run = [&](int id, const std::string& name,
                 const std::function<Outcome()>& body) {
    if (!selected.count(id)) return;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    outcomes[id] = o;
    std::cout << "criterion " << id << " " << name << ": "
              << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
              << std::endl;
  };

  try {
    fs::create_directories(workdir);
    run(1, "gradient-check", gradient_check);
    run(2, "clip-contract", clip_contract);
    run(3, "dp-degeneracy", dp_degeneracy);
    run(4, "noise-calibration", noise_calibration);
    run(5, "lora-invariants", lora_invariants);

    const bool need_data = selected.count(6) || selected.count(7) ||
                           selected.count(8) || selected.count(9) ||
                           selected.count(10) || selected.count(11);
    std::optional<LabData> data;
    if (need_data) {
      const ExperimentPlan plan = ExperimentPlan::defaults(workdir, kSeed);
      data = prepare_data(plan.corpus, plan.model, plan.seed);
    }
    run(9, "efficiency-orderings", [&] {
      return efficiency_orderings(*data, init_params(ModelConfig{}, 909));
    });
    run(10, "recollection-probe", [&] { return recollection(*data); });

    std::optional<SweepRun> sweep_a;
    if (selected.count(6) || selected.count(7) || selected.count(8) ||
        selected.count(11)) {
      sweep_a = default_sweep(fs::path(workdir) / "run_a");
    }
    run(6, "loss-decomposition", [&] { return decomposition(sweep_a->result); });
    run(7, "base-model-gap", [&] { return base_gap(sweep_a->result, *data); });
    run(8, "method-comparison", [&] { return comparison(*sweep_a); });
    run(11, "end-to-end-determinism", [&] {
      const SweepRun b = default_sweep(fs::path(workdir) / "run_b");
      return determinism(sweep_a->result, b.result);
    });
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }

  int failed = 0;
  for (const auto& [id, o] : outcomes) failed += o.pass ? 0 : 1;
  std::cout << outcomes.size() - failed << "/" << outcomes.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
