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

#include "wsad/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "wsad/errors.hpp"
#include "wsad/feature_map.hpp"
#include "wsad/rng.hpp"

namespace wsad {

void SynthConfig::validate() const {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("synthetic map dims must be positive");
  if (blob_height == 0 || blob_width == 0) throw ConfigError("blob extents must be positive");
  if (blob_height > height || blob_width > width) {
    throw ConfigError("blob " + std::to_string(blob_height) + "x" + std::to_string(blob_width) +
                      " does not fit in a " + std::to_string(height) + "x" + std::to_string(width) + " map");
  }
  if (!(shift_magnitude >= 0.0)) throw ConfigError("shift_magnitude must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (n_normal_train == 0) throw ConfigError("need at least one normal training image");
}

namespace {

std::string make_id(const char* prefix, std::uint32_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%04u", prefix, i);
  return buf;
}

}  // namespace

DatasetManifest generate_synthetic(const SynthConfig& config, const std::filesystem::path& root) {
  config.validate();
  Rng rng(config.seed);
  const std::uint32_t c_dim = config.channels;

  std::vector<double> base(c_dim);
  for (auto& v : base) v = rng.normal();
  std::vector<double> direction(c_dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& v : direction) {
      v = rng.normal();
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv_norm = 1.0 / std::sqrt(norm2);
  for (auto& v : direction) v *= inv_norm;

  DatasetManifest manifest;
  manifest.root = root;

  auto emit = [&](const std::string& id, Split split, bool anomalous) {
    FeatureMap map(config.height, config.width, c_dim);
    FeatureMap mask;
    std::uint32_t top = 0, left = 0;
    if (anomalous) {
      top = static_cast<std::uint32_t>(rng.index(config.height - config.blob_height + 1));
      left = static_cast<std::uint32_t>(rng.index(config.width - config.blob_width + 1));
      mask = FeatureMap(config.height, config.width, 1);
    }
    for (std::uint32_t h = 0; h < config.height; ++h) {
      for (std::uint32_t w = 0; w < config.width; ++w) {
        const bool in_blob = anomalous && h >= top && h < top + config.blob_height && w >= left &&
                             w < left + config.blob_width;
        auto patch = map.patch(h, w);
        for (std::uint32_t c = 0; c < c_dim; ++c) {
          double v = base[c] + config.noise_sigma * rng.normal();
          if (in_blob) v += config.shift_magnitude * direction[c];
          patch[c] = static_cast<float>(v);
        }
        if (in_blob) mask.at(h, w, 0) = 1.0f;
      }
    }
    ManifestEntry entry;
    entry.id = id;
    entry.split = split;
    entry.label = anomalous ? 1 : 0;
    entry.feature_path = "features/" + id + ".wsfx";
    write_feature_map(map, root / entry.feature_path);
    if (anomalous) {
      entry.mask_path = "masks/" + id + ".wsfx";
      write_feature_map(mask, root / *entry.mask_path);
    }
    manifest.entries.push_back(std::move(entry));
  };

  for (std::uint32_t i = 0; i < config.n_normal_train; ++i) emit(make_id("train-normal", i), Split::kTrainNormal, false);
  for (std::uint32_t i = 0; i < config.n_anomaly_train; ++i) emit(make_id("train-anomaly", i), Split::kTrainAnomaly, true);
  for (std::uint32_t i = 0; i < config.n_normal_test; ++i) emit(make_id("test-normal", i), Split::kTest, false);
  for (std::uint32_t i = 0; i < config.n_anomaly_test; ++i) emit(make_id("test-anomaly", i), Split::kTest, true);

  write_manifest(manifest, root / "manifest.jsonl");
  return manifest;
}

}  // namespace wsad
