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

#include "puelab/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "puelab/error.h"

namespace puelab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in host order");

constexpr char kMagic[8] = {'P', 'U', 'E', 'C', 'K', 'P', 'T', '1'};

// 64-bit FNV-1a over the value blob, stored in the manifest as hex.
std::string blob_digest(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  if (ckpt.layout.total_size() != ckpt.values.size()) {
    throw ConfigError("checkpoint layout does not match its values");
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = "puelab-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = "float64-le";
  manifest["meta"] = ckpt.meta;
  manifest["params"] = nlohmann::ordered_json::array();
  for (const auto& e : ckpt.layout.entries()) {
    manifest["params"].push_back(
        {{"name", e.name}, {"shape", e.shape}, {"offset", e.offset},
         {"size", e.size}});
  }
  manifest["total_values"] = ckpt.values.size();
  manifest["fnv1a64"] =
      blob_digest(reinterpret_cast<const char*>(ckpt.values.data()),
                  ckpt.values.size() * sizeof(double));
  const std::string text = manifest.dump();

  // Readers see either the previous file or the complete new one.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(ckpt.values.data()),
              static_cast<std::streamsize>(ckpt.values.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError(path + ": bad magic or truncated header");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if (len > bytes.size() - 16) {
    throw CheckpointError(path + ": manifest length exceeds file size");
  }
  Checkpoint ckpt;
  std::size_t total = 0;
  std::string digest;
  try {
    const auto manifest = nlohmann::json::parse(bytes.substr(16, len));
    if (manifest.at("format") != "puelab-checkpoint" ||
        manifest.at("version") != 1) {
      throw CheckpointError(path + ": unsupported checkpoint format");
    }
    ckpt.meta = manifest.at("meta");
    for (const auto& p : manifest.at("params")) {
      ckpt.layout.add(p.at("name").get<std::string>(),
                      p.at("shape").get<std::vector<std::size_t>>());
      const auto& e = ckpt.layout.entries().back();
      if (e.offset != p.at("offset").get<std::size_t>() ||
          e.size != p.at("size").get<std::size_t>()) {
        throw CheckpointError(path + ": inconsistent offsets for " + e.name);
      }
    }
    total = manifest.at("total_values").get<std::size_t>();
    digest = manifest.at("fnv1a64").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": malformed manifest: " + e.what());
  }
  if (total != ckpt.layout.total_size()) {
    throw CheckpointError(path + ": manifest total does not match shapes");
  }
  const std::size_t blob_bytes = bytes.size() - 16 - len;
  if (blob_bytes != total * sizeof(double)) {
    throw CheckpointError(path + ": blob holds " + std::to_string(blob_bytes) +
                          " bytes, expected " +
                          std::to_string(total * sizeof(double)));
  }
  if (blob_digest(bytes.data() + 16 + len, blob_bytes) != digest) {
    throw CheckpointError(path + ": value blob fails its checksum");
  }
  ckpt.values.resize(total);
  std::memcpy(ckpt.values.data(), bytes.data() + 16 + len, blob_bytes);
  for (double v : ckpt.values) {
    if (!std::isfinite(v)) throw CheckpointError(path + ": non-finite value");
  }
  return ckpt;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"context_len", c.context_len},
          {"d_model", c.d_model},       {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.context_len = j.value("context_len", c.context_len);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.validate();
  return c;
}

void save_model(const std::string& path, const ModelState& state,
                nlohmann::json meta) {
  meta["kind"] = "model";
  meta["model_config"] = model_config_to_json(state.config);
  save_checkpoint(path, Checkpoint{std::move(meta), state.layout, state.values});
}

ModelState load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  ModelConfig config;
  try {
    config = model_config_from_json(ckpt.meta.at("model_config"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": missing model_config: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
  ModelState state{config, model_layout(config), {}};
  if (!(state.layout == ckpt.layout)) {
    throw CheckpointError(path + ": parameter arrays do not match the config");
  }
  state.values = std::move(ckpt.values);
  return state;
}

}  // namespace puelab
