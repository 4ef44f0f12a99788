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

#include <algorithm>
#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "wsad/errors.hpp"
#include "wsad/inference.hpp"
#include "wsad/memory_bank.hpp"
#include "wsad/synth.hpp"

using namespace wsad;
using wsad::testing::TempDir;

namespace {

// Sequential scan with direct differences; independent of the screening path.
double brute_force_nearest(const std::vector<float>& rows, std::size_t cols, std::span<const float> q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size() / cols; ++i) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(rows[i * cols + c]) - q[c];
      d2 += d * d;
    }
    best = std::min(best, d2);
  }
  return std::sqrt(best);
}

NormalBank bank_from(std::vector<float> rows, std::size_t cols) {
  std::vector<PatchOrigin> origins(rows.size() / cols);
  for (std::size_t i = 0; i < origins.size(); ++i) origins[i] = {"img", 0, static_cast<std::uint32_t>(i)};
  return NormalBank(cols, std::move(rows), std::move(origins));
}

}  // namespace

TEST_CASE("3-4-5 triangle") {
  const NormalBank bank = bank_from({0.0f, 0.0f, 3.0f, 4.0f}, 2);
  const std::vector<float> q{6.0f, 8.0f};
  CHECK(bank.nearest_distance(q) == 5.0);
  const auto [d, idx] = bank.nearest(q);
  CHECK(d == 5.0);
  CHECK(idx == 1);
}

TEST_CASE("bank members are at distance exactly zero") {
  const auto rows = wsad::testing::random_rows(300, 48, 5, 10.0);
  const NormalBank bank = bank_from(rows, 48);
  for (std::size_t i = 0; i < bank.size(); ++i) CHECK(bank.nearest_distance(bank.row(i)) == 0.0);
}

TEST_CASE("nearest distance matches the brute-force oracle") {
  const auto rows = wsad::testing::random_rows(1000, 64, 1);
  const NormalBank bank = bank_from(rows, 64);
  const auto queries = wsad::testing::random_rows(100, 64, 2);
  const RowsView qv{queries, 64};
  for (std::size_t i = 0; i < qv.rows(); ++i) {
    const double got = bank.nearest_distance(qv.row(i));
    CHECK(wsad::testing::rel_err(got, brute_force_nearest(rows, 64, qv.row(i))) <= 1e-6);
  }
}

TEST_CASE("near-duplicate rows are resolved exactly") {
  // Rows differing in the last bit; the screen cannot separate them, the
  // direct pass must.
  std::vector<float> rows = wsad::testing::random_rows(4, 16, 9, 100.0);
  std::copy(rows.begin(), rows.begin() + 16, rows.begin() + 16);
  rows[16] = std::nextafter(rows[16], 1e9f);
  const NormalBank bank = bank_from(rows, 16);
  const std::span<const float> q(rows.data() + 16, 16);
  CHECK(bank.nearest_distance(q) == 0.0);
  CHECK(bank.nearest(q).second == 1);
}

TEST_CASE("S is non-negative and 1-Lipschitz") {
  const auto rows = wsad::testing::random_rows(500, 24, 3);
  const NormalBank bank = bank_from(rows, 24);
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> a(24), b(24);
    const double step = rng.uniform(0.0, 2.0);
    double d2 = 0.0;
    for (int c = 0; c < 24; ++c) {
      a[c] = static_cast<float>(rng.normal() * 2.0);
      b[c] = static_cast<float>(a[c] + step * rng.normal());
      const double d = static_cast<double>(a[c]) - b[c];
      d2 += d * d;
    }
    const double sa = bank.nearest_distance(a);
    const double sb = bank.nearest_distance(b);
    CHECK(sa >= 0.0);
    CHECK(std::abs(sa - sb) <= std::sqrt(d2) + 1e-5);
  }
}

TEST_CASE("parallel and sequential queries agree") {
  const auto rows = wsad::testing::random_rows(2000, 32, 4);
  const NormalBank bank = bank_from(rows, 32);
  const auto queries = wsad::testing::random_rows(1000, 32, 6);
  const auto seq = bank.nearest_distances(RowsView{queries, 32}, 1);
  for (unsigned threads : {2u, 3u, 8u}) {
    const auto par = bank.nearest_distances(RowsView{queries, 32}, threads);
    REQUIRE(par.size() == seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(wsad::testing::rel_err(par[i], seq[i]) <= 1e-6);
  }
}

TEST_CASE("dimension mismatch is an error") {
  const NormalBank bank = bank_from({1.0f, 2.0f, 3.0f}, 3);
  const std::vector<float> q{1.0f, 2.0f};
  CHECK_THROWS_AS(bank.nearest_distance(q), DimensionMismatch);
}

namespace {

SynthConfig tiny_synth(std::uint32_t normals) {
  SynthConfig c;
  c.n_normal_train = normals;
  c.n_anomaly_train = 1;
  c.n_normal_test = 1;
  c.n_anomaly_test = 1;
  c.height = 8;
  c.width = 8;
  c.channels = 8;
  c.blob_height = 3;
  c.blob_width = 3;
  c.shift_magnitude = 6.0;
  c.noise_sigma = 0.2;
  return c;
}

}  // namespace

TEST_CASE("build_bank row counts and order") {
  TempDir dir;
  const auto manifest = generate_synthetic(tiny_synth(3), dir.path());
  const NormalBank one = build_bank(std::vector<PatchSet>{aggregate(
      read_feature_map(manifest.resolve(manifest.entries[0].feature_path)), AggregationConfig{}, "x")});
  CHECK(one.size() == 64);

  const NormalBank bank = build_bank(manifest, AggregationConfig{});
  CHECK(bank.size() == 3 * 64);
  CHECK(bank.channels() == 8);
  CHECK(bank.origins()[0] == PatchOrigin{"train-normal-0000", 0, 0});
  CHECK(bank.origins()[9] == PatchOrigin{"train-normal-0000", 1, 1});
  CHECK(bank.origins()[64] == PatchOrigin{"train-normal-0001", 0, 0});

  const NormalBank again = build_bank(manifest, AggregationConfig{});
  CHECK(std::equal(bank.rows().values.begin(), bank.rows().values.end(), again.rows().values.begin()));
  CHECK(bank.origins() == again.origins());

  SUBCASE("save and load") {
    bank.save(dir / "bank");
    const NormalBank loaded = NormalBank::load(dir / "bank");
    CHECK(loaded.size() == bank.size());
    CHECK(loaded.origins() == bank.origins());
    CHECK(std::equal(bank.rows().values.begin(), bank.rows().values.end(), loaded.rows().values.begin()));
  }
  SUBCASE("subsampling keeps a seeded subset") {
    const NormalBank half = build_bank(manifest, AggregationConfig{}, BankOptions{0.5, 3});
    CHECK(half.size() > 0);
    CHECK(half.size() < bank.size());
    CHECK(build_bank(manifest, AggregationConfig{}, BankOptions{0.5, 3}).origins() == half.origins());
  }
}

TEST_CASE("bank arithmetic at full data scale") {
  // 1,349 normal images on an 8x8 patch grid.
  const std::size_t rows = std::size_t{1349} * 8 * 8;
  CHECK(rows == 86336);
}

TEST_CASE("zero normal images is an explicit error") {
  DatasetManifest m;
  m.entries.push_back({"a", Split::kTest, 0, "a.wsfx", std::nullopt, {}, false});
  CHECK_THROWS_AS(build_bank(m, AggregationConfig{}), ConfigError);
  CHECK_THROWS_AS(build_bank(std::vector<PatchSet>{}), ConfigError);
}

TEST_CASE("kNN scoring of a training image is all zeros") {
  TempDir dir;
  const auto manifest = generate_synthetic(tiny_synth(2), dir.path());
  const NormalBank bank = build_bank(manifest, AggregationConfig{});
  const PatchSet train = extract_patch_set(manifest.entries[0], manifest, AggregationConfig{});
  const auto [map, result] = knn_score_image(bank, train);
  for (float v : map.grid.data) CHECK(v == 0.0f);
  CHECK(result.score == 0.0);
}

TEST_CASE("kNN map peaks inside the planted blob when the shift dominates") {
  TempDir dir;
  SynthConfig c = tiny_synth(10);
  c.n_anomaly_test = 6;
  c.height = 12;
  c.width = 12;
  const auto manifest = generate_synthetic(c, dir.path());
  const NormalBank bank = build_bank(manifest, AggregationConfig{});
  for (const auto* e : manifest.select(Split::kTest)) {
    if (e->label != 1) continue;
    const auto [map, result] = knn_score_image(bank, extract_patch_set(*e, manifest, AggregationConfig{}));
    const auto argmax = std::max_element(map.grid.data.begin(), map.grid.data.end()) - map.grid.data.begin();
    const FeatureMap mask = read_feature_map(manifest.resolve(*e->mask_path));
    CHECK(mask.data[argmax] == 1.0f);
    CHECK(result.score == map.max_value());
  }
}
