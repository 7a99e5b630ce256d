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

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include <unistd.h>

#include "puelab/error.h"
#include "test_util.h"

namespace puelab {
namespace {

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("puelab_ckpt_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return dir_ / name; }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  static void dump(const std::string& p, const std::string& bytes) {
    std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
  }

  fs::path dir_;
};

TEST_F(CheckpointTest, ModelRoundTripIsBitExact) {
  ModelState s = init_params(testing::small_config(), 3);
  // Values that do not survive a decimal round trip.
  s.values[0] = 0.1 + 0.2;
  s.values[1] = std::numeric_limits<double>::denorm_min();
  s.values[2] = -0.0;
  save_model(path("m.ckpt"), s, {{"note", "x"}});
  const ModelState back = load_model(path("m.ckpt"));
  EXPECT_EQ(back.config, s.config);
  EXPECT_EQ(back.layout, s.layout);
  ASSERT_EQ(back.values.size(), s.values.size());
  EXPECT_EQ(std::memcmp(back.values.data(), s.values.data(),
                        s.values.size() * sizeof(double)),
            0);
}

TEST_F(CheckpointTest, GenericCheckpointKeepsMeta) {
  Checkpoint c;
  c.layout.add("a", {2, 3});
  c.layout.add("b", {4});
  c.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  c.meta = {{"epoch", 4}, {"kind", "resume"}};
  save_checkpoint(path("c.ckpt"), c);
  const Checkpoint back = load_checkpoint(path("c.ckpt"));
  EXPECT_EQ(back.meta, c.meta);
  EXPECT_EQ(back.layout, c.layout);
  EXPECT_EQ(back.values, c.values);
}

TEST_F(CheckpointTest, LayoutMismatchOnSaveIsConfigError) {
  Checkpoint c;
  c.layout.add("a", {2});
  c.values = {1.0};
  EXPECT_THROW(save_checkpoint(path("bad.ckpt"), c), ConfigError);
}

TEST_F(CheckpointTest, MissingFile) {
  EXPECT_THROW(load_checkpoint(path("absent.ckpt")), CheckpointError);
}

TEST_F(CheckpointTest, UnwritableDirectoryIsIoError) {
  Checkpoint c;
  EXPECT_THROW(save_checkpoint(path("no/such/dir/c.ckpt"), c), IoError);
}

TEST_F(CheckpointTest, TruncationDetected) {
  save_model(path("m.ckpt"), init_params(testing::tiny_config(), 1));
  const std::string bytes = slurp(path("m.ckpt"));
  for (std::size_t keep : {std::size_t{0}, std::size_t{10}, bytes.size() / 2,
                           bytes.size() - 8}) {
    dump(path("t.ckpt"), bytes.substr(0, keep));
    EXPECT_THROW(load_checkpoint(path("t.ckpt")), CheckpointError) << keep;
  }
}

TEST_F(CheckpointTest, FlippedBlobByteDetected) {
  save_model(path("m.ckpt"), init_params(testing::tiny_config(), 1));
  std::string bytes = slurp(path("m.ckpt"));
  bytes[bytes.size() - 100] ^= 0x01;
  dump(path("f.ckpt"), bytes);
  EXPECT_THROW(load_checkpoint(path("f.ckpt")), CheckpointError);
}

TEST_F(CheckpointTest, GarbledManifestDetected) {
  save_model(path("m.ckpt"), init_params(testing::tiny_config(), 1));
  std::string bytes = slurp(path("m.ckpt"));
  bytes[20] = '#';
  dump(path("g.ckpt"), bytes);
  EXPECT_THROW(load_checkpoint(path("g.ckpt")), CheckpointError);
}

TEST_F(CheckpointTest, ConfigMismatchDetected) {
  Checkpoint c;
  c.layout.add("tok_emb", {2});
  c.values = {1, 2};
  c.meta = {{"model_config", model_config_to_json(ModelConfig{})}};
  save_checkpoint(path("x.ckpt"), c);
  EXPECT_THROW(load_model(path("x.ckpt")), CheckpointError);
}

TEST(ModelConfigJsonTest, RoundTrip) {
  const ModelConfig c = testing::small_config();
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
  EXPECT_THROW(model_config_from_json({{"n_heads", 3}}), ConfigError);
}

}  // namespace
}  // namespace puelab
