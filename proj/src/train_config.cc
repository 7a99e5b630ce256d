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

#include <cmath>
#include <cstdio>
#include <limits>

#include "puelab/error.h"
#include "puelab/finetune.h"

namespace puelab {
namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// JSON has no infinity; an unclipped threshold is spelled "inf".
nlohmann::json threshold_to_json(double t) {
  if (std::isinf(t)) return "inf";
  return t;
}

double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") {
      return std::numeric_limits<double>::infinity();
    }
    throw ConfigError("clip_threshold must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ConfigError("clip_threshold must be a number");
  return j.get<double>();
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kFft:
      return "fft";
    case Method::kDp:
      return "dp";
    case Method::kLora:
      return "lora";
  }
  return "fft";
}

Method method_from_string(std::string_view name) {
  if (name == "fft") return Method::kFft;
  if (name == "dp") return Method::kDp;
  if (name == "lora") return Method::kLora;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "plain";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "plain") return OptimizerKind::kPlain;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

TrainConfig TrainConfig::defaults_for(Method method) {
  TrainConfig c;
  c.method = method;
  switch (method) {
    case Method::kFft:
      c.learning_rate = 2.5e-4;
      c.batch_size = 16;
      break;
    case Method::kDp:
      c.learning_rate = 5e-5;
      c.batch_size = 8;
      break;
    case Method::kLora:
      c.learning_rate = 2.5e-4;
      c.batch_size = 32;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive and finite");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (!(dp.clip_threshold > 0)) {
    throw ConfigError("clip_threshold must be positive");
  }
  if (!(dp.noise_scale >= 0) || !std::isfinite(dp.noise_scale)) {
    throw ConfigError("noise_scale must be non-negative and finite");
  }
  if (lora.rank < 1) throw ConfigError("LoRA rank must be at least 1");
  if (!(lora.alpha > 0) || !std::isfinite(lora.alpha)) {
    throw ConfigError("LoRA alpha must be positive and finite");
  }
}

void TrainConfig::validate(const ModelConfig& model) const {
  validate();
  model.validate();
  if (method != Method::kLora) return;
  const ParamLayout layout = model_layout(model);
  const auto targets =
      lora.targets.empty() ? default_lora_targets(model) : lora.targets;
  for (const auto& t : targets) {
    if (!layout.contains(t)) throw ConfigError("unknown LoRA target " + t);
    const auto& e = layout.find(t);
    if (e.shape.size() != 2) {
      throw ConfigError("LoRA target " + t + " is not a weight matrix");
    }
    if (static_cast<std::size_t>(lora.rank) >
        std::min(e.shape[0], e.shape[1])) {
      throw ConfigError("LoRA rank exceeds min(d, k) for " + t);
    }
  }
}

std::string TrainConfig::label() const {
  switch (method) {
    case Method::kFft:
      return "fft";
    case Method::kDp:
      return "dp_sigma" + format_number(dp.noise_scale);
    case Method::kLora:
      return "lora_r" + std::to_string(lora.rank) + "_a" +
             format_number(lora.alpha);
  }
  return "run";
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(c.method));
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["warmup_steps"] = c.warmup_steps;
  j["seed"] = c.seed;
  j["optimizer"] = std::string(to_string(c.optimizer));
  j["dp"] = {{"noise_scale", c.dp.noise_scale},
             {"clip_threshold", threshold_to_json(c.dp.clip_threshold)}};
  j["lora"] = {{"rank", c.lora.rank},
               {"alpha", c.lora.alpha},
               {"targets", c.lora.targets}};
  return nlohmann::json(j);
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  if (j.contains("method")) {
    if (!j["method"].is_string()) throw ConfigError("method must be a string");
    base.method = method_from_string(j["method"].get<std::string>());
  }
  read_field(j, "learning_rate", base.learning_rate);
  read_field(j, "batch_size", base.batch_size);
  read_field(j, "epochs", base.epochs);
  read_field(j, "warmup_steps", base.warmup_steps);
  read_field(j, "seed", base.seed);
  if (j.contains("optimizer")) {
    if (!j["optimizer"].is_string()) {
      throw ConfigError("optimizer must be a string");
    }
    base.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
  }
  if (j.contains("dp")) {
    const auto& dp = j["dp"];
    if (!dp.is_object()) throw ConfigError("dp must be an object");
    read_field(dp, "noise_scale", base.dp.noise_scale);
    if (dp.contains("clip_threshold")) {
      base.dp.clip_threshold = threshold_from_json(dp["clip_threshold"]);
    }
  }
  if (j.contains("lora")) {
    const auto& lora = j["lora"];
    if (!lora.is_object()) throw ConfigError("lora must be an object");
    read_field(lora, "rank", base.lora.rank);
    read_field(lora, "alpha", base.lora.alpha);
    read_field(lora, "targets", base.lora.targets);
  }
  return base;
}

}  // namespace puelab
