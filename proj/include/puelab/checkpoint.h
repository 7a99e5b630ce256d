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

#ifndef PUELAB_CHECKPOINT_H_
#define PUELAB_CHECKPOINT_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "puelab/model.h"

namespace puelab {

// On disk: 8-byte magic "PUECKPT1", u64 little-endian manifest length, the
// JSON manifest, then the blob of little-endian float64 values in manifest
// order. The manifest lists every array's name, shape, offset and size (in
// values) and carries free-form metadata under "meta".
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  ParamLayout layout;
  std::vector<double> values;
};

// Throws IoError on write failure.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws CheckpointError for a missing, truncated or inconsistent file.
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const ModelState& state,
                nlohmann::json meta = nlohmann::json::object());
// Rebuilds the model layout from meta.model_config and checks it against the
// stored manifest.
ModelState load_model(const std::string& path);

}  // namespace puelab

#endif  // PUELAB_CHECKPOINT_H_
