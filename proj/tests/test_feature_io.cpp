/* Copyright 2026 The wsad Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "test_util.hpp"
#include "wsad/errors.hpp"
#include "wsad/feature_map.hpp"
#include "wsad/manifest.hpp"
#include "wsad/synth.hpp"

using namespace wsad;
using wsad::testing::TempDir;

TEST_CASE("smallest map encodes to a 20-byte header plus one value") {
  FeatureMap map(1, 1, 1, 0.0f);
  const auto bytes = encode_feature_map(map);
  REQUIRE(bytes.size() == kWsfxHeaderBytes + 4);
  CHECK(bytes[0] == 0x57);
  CHECK(bytes[1] == 0x53);
  CHECK(bytes[2] == 0x46);
  CHECK(bytes[3] == 0x58);
  CHECK(bytes[4] == 1);  // version, little-endian
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0);  // dtype
  CHECK(bytes[7] == 0);  // reserved
  for (std::size_t i = kWsfxHeaderBytes; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("2x3x4 map has a 96-byte payload and width field 3") {
  const FeatureMap map = wsad::testing::random_map(2, 3, 4, 11);
  const auto bytes = encode_feature_map(map);
  CHECK(bytes.size() - kWsfxHeaderBytes == 2 * 3 * 4 * 4);
  // height @8, width @12, channels @16
  CHECK(bytes[8] == 2);
  CHECK(bytes[12] == 3);
  CHECK(bytes[13] == 0);
  CHECK(bytes[16] == 4);
  // first payload value is element (0, 0, 0), LE
  std::uint32_t bits;
  std::memcpy(&bits, &map.data[0], 4);
  CHECK(bytes[20] == (bits & 0xFF));
  CHECK(bytes[23] == (bits >> 24));
}

TEST_CASE("write then read is bitwise identity") {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto h = static_cast<std::uint32_t>(1 + rng.index(9));
    const auto w = static_cast<std::uint32_t>(1 + rng.index(9));
    const auto c = static_cast<std::uint32_t>(1 + rng.index(17));
    FeatureMap map = wsad::testing::random_map(h, w, c, seed + 100);
    map.data[0] = -0.0f;
    const auto path = dir / ("m" + std::to_string(seed) + ".wsfx");
    write_feature_map(map, path);
    const FeatureMap back = read_feature_map(path);
    CHECK(back.height == h);
    CHECK(back.width == w);
    CHECK(back.channels == c);
    REQUIRE(back.data.size() == map.data.size());
    CHECK(std::memcmp(back.data.data(), map.data.data(), map.data.size() * 4) == 0);
  }
}

TEST_CASE("reader rejects malformed files with distinct errors") {
  TempDir dir;
  auto bytes = encode_feature_map(FeatureMap(2, 2, 2, 1.0f));

  SUBCASE("bad magic") {
    auto bad = bytes;
    std::memcpy(bad.data(), "XXXX", 4);
    write_file_bytes(dir / "bad.wsfx", bad);
    CHECK_THROWS_AS(read_feature_map(dir / "bad.wsfx"), BadMagicError);
  }
  SUBCASE("bad version") {
    auto bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_feature_map(bad), VersionError);
  }
  SUBCASE("bad dtype") {
    auto bad = bytes;
    bad[6] = 1;
    CHECK_THROWS_AS(decode_feature_map(bad), DtypeError);
  }
  SUBCASE("declared 2x2x2 with 28 payload bytes") {
    auto bad = bytes;
    bad.resize(kWsfxHeaderBytes + 28);
    CHECK_THROWS_AS(decode_feature_map(bad), TruncatedError);
  }
  SUBCASE("truncated header") {
    auto bad = bytes;
    bad.resize(10);
    CHECK_THROWS_AS(decode_feature_map(bad), TruncatedError);
  }
  SUBCASE("missing file names the path") {
    try {
      read_feature_map(dir / "nope.wsfx");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("nope.wsfx") != std::string::npos);
    }
  }
}

TEST_CASE("manifest round-trips through JSON lines") {
  TempDir dir;
  DatasetManifest m;
  m.entries.push_back({"a", Split::kTrainNormal, 0, "features/a.wsfx", std::nullopt, {}, false});
  m.entries.push_back({"b", Split::kTrainAnomaly, 1, "features/b.wsfx", "masks/b.wsfx", {}, false});
  m.entries.push_back({"c", Split::kTest, 1, "", std::nullopt, {"l0.wsfx", "l1.wsfx"}, false});
  write_manifest(m, dir / "manifest.jsonl");
  const auto back = read_manifest(dir / "manifest.jsonl");
  CHECK(back.entries == m.entries);
  CHECK(back.root == dir.path());
  CHECK(back.normal_count() == 1);
  CHECK(back.anomaly_count() == 1);
}

TEST_CASE("manifest enforces split/label semantics") {
  DatasetManifest m;
  m.entries.push_back({"a", Split::kTrainNormal, 1, "a.wsfx", std::nullopt, {}, false});
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.entries[0] = {"a", Split::kTrainAnomaly, 0, "a.wsfx", std::nullopt, {}, false};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  // K >= N only warns.
  m.entries[0] = {"a", Split::kTrainAnomaly, 1, "a.wsfx", std::nullopt, {}, false};
  CHECK_NOTHROW(m.validate());
}

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.seed = 0;
  c.n_normal_train = 3;
  c.n_anomaly_train = 2;
  c.n_normal_test = 2;
  c.n_anomaly_test = 2;
  c.height = 16;
  c.width = 16;
  c.channels = 32;
  c.blob_height = 5;
  c.blob_width = 5;
  c.shift_magnitude = 3.0;
  c.noise_sigma = 0.5;
  return c;
}

}  // namespace

TEST_CASE("synthetic masks mark exactly blob-area patches") {
  TempDir dir;
  const auto manifest = generate_synthetic(small_config(), dir.path());
  int anomalies = 0;
  for (const auto& e : manifest.entries) {
    if (e.label == 0) {
      CHECK_FALSE(e.mask_path.has_value());
      continue;
    }
    ++anomalies;
    REQUIRE(e.mask_path.has_value());
    const FeatureMap mask = read_feature_map(manifest.resolve(*e.mask_path));
    int bits = 0;
    for (float v : mask.data) bits += v > 0.5f;
    CHECK(bits == 25);
  }
  CHECK(anomalies == 4);
}

TEST_CASE("synthetic generation is byte-deterministic") {
  TempDir a, b;
  generate_synthetic(small_config(), a.path());
  generate_synthetic(small_config(), b.path());
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    CHECK(read_file_bytes(entry.path()) == read_file_bytes(b.path() / rel));
  }
}

TEST_CASE("noise-free planted patches sit exactly shift_magnitude from the base") {
  TempDir dir;
  SynthConfig c = small_config();
  c.noise_sigma = 0.0;
  c.shift_magnitude = 2.75;
  const auto manifest = generate_synthetic(c, dir.path());
  const FeatureMap normal = read_feature_map(manifest.resolve(manifest.entries.front().feature_path));
  const auto base = normal.patch(0, 0);
  int checked = 0;
  for (const auto* e : manifest.select(Split::kTrainAnomaly)) {
    const FeatureMap map = read_feature_map(manifest.resolve(e->feature_path));
    const FeatureMap mask = read_feature_map(manifest.resolve(*e->mask_path));
    for (std::uint32_t h = 0; h < map.height; ++h) {
      for (std::uint32_t w = 0; w < map.width; ++w) {
        double d2 = 0.0;
        for (std::uint32_t k = 0; k < map.channels; ++k) {
          const double d = static_cast<double>(map.at(h, w, k)) - base[k];
          d2 += d * d;
        }
        const double expected = mask.at(h, w, 0) > 0.5f ? c.shift_magnitude : 0.0;
        CHECK(std::abs(std::sqrt(d2) - expected) <= 1e-5 * std::max(1.0, expected));
        ++checked;
      }
    }
  }
  CHECK(checked == 2 * 256);
}

TEST_CASE("synthetic config rejects a blob larger than the map") {
  SynthConfig c = small_config();
  c.blob_height = 17;
  TempDir dir;
  CHECK_THROWS_AS(generate_synthetic(c, dir.path()), ConfigError);
  c = small_config();
  c.shift_magnitude = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
