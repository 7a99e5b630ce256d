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

#include "puelab/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "puelab/error.h"
#include "text_file.h"

namespace puelab {
namespace {

std::optional<double> ratio(double sum, std::size_t count) {
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

bool close_relative(double a, double b, double tol) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) <= tol * scale;
}

void check_cell(const char* name, const std::optional<double>& all,
                const std::optional<double>& s, std::size_t n_s,
                const std::optional<double>& n, std::size_t n_n) {
  for (const auto* v : {&all, &s, &n}) {
    if (v->has_value() && !(**v >= 0.0)) {
      throw ConsistencyError(std::string(name) + ": negative or NaN loss");
    }
  }
  const std::size_t total = n_s + n_n;
  if (total == 0) {
    if (all.has_value()) {
      throw ConsistencyError(std::string(name) + ": loss without tokens");
    }
    return;
  }
  if (!all.has_value()) {
    throw ConsistencyError(std::string(name) + ": missing all-token loss");
  }
  if (s.has_value() != (n_s > 0) || n.has_value() != (n_n > 0)) {
    throw ConsistencyError(std::string(name) + ": loss/count mismatch");
  }
  const double weighted =
      ((n_s > 0 ? static_cast<double>(n_s) * *s : 0.0) +
       (n_n > 0 ? static_cast<double>(n_n) * *n : 0.0)) /
      static_cast<double>(total);
  if (!close_relative(*all, weighted, kDecompositionTolerance)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%s: all-token loss %.17g != weighted mean %.17g", name,
                  *all, weighted);
    throw ConsistencyError(buf);
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* col) {
  if (s.empty()) throw ConfigError(std::string("empty value in ") + col);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw ConfigError(std::string("bad number '") + s + "' in " + col);
  }
  return v;
}

std::optional<double> parse_opt(const std::string& s, const char* col) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, col);
}

long long parse_int(const std::string& s, const char* col) {
  if (s.empty()) throw ConfigError(std::string("empty value in ") + col);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) {
    throw ConfigError(std::string("bad integer '") + s + "' in " + col);
  }
  return v;
}

std::size_t parse_count(const std::string& s, const char* col) {
  const long long v = parse_int(s, col);
  if (v < 0) throw ConfigError(std::string("negative count in ") + col);
  return static_cast<std::size_t>(v);
}

}  // namespace

MaskedMean masked_mean_loss(std::span<const double> losses,
                            const std::vector<bool>& mask, Select select) {
  if (losses.size() != mask.size()) {
    throw ConfigError("losses and mask differ in length");
  }
  const bool want = select == Select::kSensitive;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (mask[i] == want) {
      sum += losses[i];
      ++count;
    }
  }
  return MaskedMean{ratio(sum, count), count};
}

std::optional<double> SplitLosses::sensitive() const {
  return ratio(sum_sensitive, n_sensitive);
}

std::optional<double> SplitLosses::nonsensitive() const {
  return ratio(sum_nonsensitive, n_nonsensitive);
}

std::optional<double> SplitLosses::all() const {
  return ratio(sum_all, n_all());
}

int evaluation_threads() {
  if (const char* env = std::getenv("PUELAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

SplitLosses evaluate_split(const ModelState& model,
                           std::span<const TokenBatch> split, int threads) {
  std::vector<SplitLosses> parts(split.size());
  auto score = [&](std::size_t w) {
    const TokenBatch& seq = split[w];
    const std::vector<double> losses = sequence_token_losses(model, seq);
    SplitLosses& p = parts[w];
    for (std::size_t i = 0; i < losses.size(); ++i) {
      p.sum_all += losses[i];
      if (seq.sensitivity_mask[i + 1]) {
        p.sum_sensitive += losses[i];
        ++p.n_sensitive;
      } else {
        p.sum_nonsensitive += losses[i];
        ++p.n_nonsensitive;
      }
    }
  };

  if (threads <= 0) threads = evaluation_threads();
  const auto n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(threads), std::max<std::size_t>(1, split.size()));
  if (n_workers <= 1) {
    for (std::size_t w = 0; w < split.size(); ++w) score(w);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t w = t; w < split.size(); w += n_workers) score(w);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SplitLosses total;
  for (const auto& p : parts) {
    total.sum_sensitive += p.sum_sensitive;
    total.sum_nonsensitive += p.sum_nonsensitive;
    total.sum_all += p.sum_all;
    total.n_sensitive += p.n_sensitive;
    total.n_nonsensitive += p.n_nonsensitive;
  }
  return total;
}

double privacy_score(const ModelState& model,
                     std::span<const TokenBatch> train) {
  const auto v = evaluate_split(model, train).sensitive();
  if (!v) throw ConfigError("train split has no sensitive tokens");
  return *v;
}

double utility_score(const ModelState& model, std::span<const TokenBatch> test) {
  const auto v = evaluate_split(model, test).nonsensitive();
  if (!v) throw ConfigError("test split has no non-sensitive tokens");
  return *v;
}

std::pair<double, double> legacy_scores(const ModelState& model,
                                        std::span<const TokenBatch> train,
                                        std::span<const TokenBatch> test) {
  const auto a = evaluate_split(model, train).all();
  const auto b = evaluate_split(model, test).all();
  if (!a || !b) throw ConfigError("legacy scores need non-empty splits");
  return {*a, *b};
}

void check_decomposition(const EpochReport& r) {
  check_cell("train", r.loss_train_all, r.loss_train_sensitive,
             r.n_train_sensitive, r.loss_train_nonsensitive,
             r.n_train_nonsensitive);
  check_cell("test", r.loss_test_all, r.loss_test_sensitive, r.n_test_sensitive,
             r.loss_test_nonsensitive, r.n_test_nonsensitive);
}

EpochReport epoch_report(const ModelState& model,
                         std::span<const TokenBatch> train,
                         std::span<const TokenBatch> test,
                         const TrainConfig& config, int epoch, double lr,
                         double flops_cumulative,
                         std::int64_t steps_cumulative) {
  if (train.empty() || test.empty()) {
    throw ConfigError("epoch report needs non-empty train and test splits");
  }
  const SplitLosses tr = evaluate_split(model, train);
  const SplitLosses te = evaluate_split(model, test);
  EpochReport r;
  r.epoch = epoch;
  r.method = std::string(to_string(config.method));
  if (config.method == Method::kDp) r.sigma = config.dp.noise_scale;
  if (config.method == Method::kLora) {
    r.rank = config.lora.rank;
    r.alpha = config.lora.alpha;
  }
  r.lr = lr;
  r.loss_train_sensitive = tr.sensitive();
  r.loss_train_nonsensitive = tr.nonsensitive();
  r.loss_train_all = tr.all();
  r.loss_test_sensitive = te.sensitive();
  r.loss_test_nonsensitive = te.nonsensitive();
  r.loss_test_all = te.all();
  r.n_train_sensitive = tr.n_sensitive;
  r.n_train_nonsensitive = tr.n_nonsensitive;
  r.n_test_sensitive = te.n_sensitive;
  r.n_test_nonsensitive = te.n_nonsensitive;
  r.flops_cumulative = flops_cumulative;
  r.steps_cumulative = steps_cumulative;
  check_decomposition(r);
  return r;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "epoch",
      "method",
      "sigma",
      "rank",
      "alpha",
      "lr",
      "loss_train_sensitive",
      "loss_train_nonsensitive",
      "loss_train_all",
      "loss_test_sensitive",
      "loss_test_nonsensitive",
      "loss_test_all",
      "n_train_sensitive",
      "n_train_nonsensitive",
      "n_test_sensitive",
      "n_test_nonsensitive",
      "flops_cumulative",
      "steps_cumulative"};
  return cols;
}

std::string metrics_header() {
  std::string out;
  for (const auto& c : metrics_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string format_metrics_row(const EpochReport& r) {
  const std::vector<std::string> fields = {
      std::to_string(r.epoch),
      r.method,
      fmt_opt(r.sigma),
      r.rank ? std::to_string(*r.rank) : std::string(),
      fmt_opt(r.alpha),
      fmt_double(r.lr),
      fmt_opt(r.loss_train_sensitive),
      fmt_opt(r.loss_train_nonsensitive),
      fmt_opt(r.loss_train_all),
      fmt_opt(r.loss_test_sensitive),
      fmt_opt(r.loss_test_nonsensitive),
      fmt_opt(r.loss_test_all),
      std::to_string(r.n_train_sensitive),
      std::to_string(r.n_train_nonsensitive),
      std::to_string(r.n_test_sensitive),
      std::to_string(r.n_test_nonsensitive),
      fmt_double(r.flops_cumulative),
      std::to_string(r.steps_cumulative)};
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += fields[i];
  }
  return out;
}

EpochReport parse_metrics_row(const std::string& line) {
  const auto f = split_csv(line);
  const auto& cols = metrics_columns();
  if (f.size() != cols.size()) {
    throw ConfigError("metrics row has " + std::to_string(f.size()) +
                      " fields, expected " + std::to_string(cols.size()));
  }
  EpochReport r;
  r.epoch = static_cast<int>(parse_int(f[0], "epoch"));
  r.method = f[1];
  r.sigma = parse_opt(f[2], "sigma");
  if (!f[3].empty()) r.rank = static_cast<int>(parse_int(f[3], "rank"));
  r.alpha = parse_opt(f[4], "alpha");
  r.lr = parse_double(f[5], "lr");
  r.loss_train_sensitive = parse_opt(f[6], "loss_train_sensitive");
  r.loss_train_nonsensitive = parse_opt(f[7], "loss_train_nonsensitive");
  r.loss_train_all = parse_opt(f[8], "loss_train_all");
  r.loss_test_sensitive = parse_opt(f[9], "loss_test_sensitive");
  r.loss_test_nonsensitive = parse_opt(f[10], "loss_test_nonsensitive");
  r.loss_test_all = parse_opt(f[11], "loss_test_all");
  r.n_train_sensitive = parse_count(f[12], "n_train_sensitive");
  r.n_train_nonsensitive = parse_count(f[13], "n_train_nonsensitive");
  r.n_test_sensitive = parse_count(f[14], "n_test_sensitive");
  r.n_test_nonsensitive = parse_count(f[15], "n_test_nonsensitive");
  r.flops_cumulative = parse_double(f[16], "flops_cumulative");
  r.steps_cumulative = parse_int(f[17], "steps_cumulative");
  return r;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochReport> reports) {
  out << metrics_header() << '\n';
  for (const auto& r : reports) out << format_metrics_row(r) << '\n';
}

std::vector<EpochReport> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_header()) throw ConfigError("unexpected metrics header");
  std::vector<EpochReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_metrics_row(line));
  }
  return out;
}

void save_metrics_csv(const std::string& path,
                      std::span<const EpochReport> reports) {
  std::ostringstream ss;
  write_metrics_csv(ss, reports);
  internal::write_text_atomic(path, ss.str());
}

std::vector<EpochReport> load_metrics_csv(const std::string& path) {
  std::istringstream in(internal::read_text(path));
  return read_metrics_csv(in);
}

}  // namespace puelab
