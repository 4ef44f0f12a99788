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

#include "wsad/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "wsad/errors.hpp"

namespace wsad {

void AggregationConfig::validate() const {
  if (patch_size == 0 || patch_size % 2 == 0) {
    throw ConfigError("patch size must be an odd positive integer, got " + std::to_string(patch_size));
  }
  if (layer_indices.empty()) throw ConfigError("layer selection is empty");
  if (target_hw && (target_hw->first == 0 || target_hw->second == 0)) {
    throw ConfigError("target resolution must be positive");
  }
}

namespace {

struct Tap {
  std::uint32_t lo;
  std::uint32_t hi;
  double weight;  // weight of hi
};

std::vector<Tap> bilinear_taps(std::uint32_t src, std::uint32_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (std::uint32_t i = 0; i < dst; ++i) {
    double x = (i + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::uint32_t>(std::floor(x));
    const std::uint32_t hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, x - lo};
  }
  return taps;
}

}  // namespace

FeatureMap resize_bilinear(const FeatureMap& map, std::uint32_t height, std::uint32_t width) {
  map.validate();
  if (map.height == 0 || map.width == 0 || map.channels == 0) throw ConfigError("cannot resize a zero-sized map");
  if (height == 0 || width == 0) throw ConfigError("resize target must be positive");
  if (map.height == height && map.width == width) return map;

  const auto rows = bilinear_taps(map.height, height);
  const auto cols = bilinear_taps(map.width, width);
  FeatureMap out(height, width, map.channels);
  for (std::uint32_t i = 0; i < height; ++i) {
    const Tap& ty = rows[i];
    for (std::uint32_t j = 0; j < width; ++j) {
      const Tap& tx = cols[j];
      const auto p00 = map.patch(ty.lo, tx.lo);
      const auto p01 = map.patch(ty.lo, tx.hi);
      const auto p10 = map.patch(ty.hi, tx.lo);
      const auto p11 = map.patch(ty.hi, tx.hi);
      auto dst = out.patch(i, j);
      for (std::uint32_t c = 0; c < map.channels; ++c) {
        const double top = (1.0 - tx.weight) * p00[c] + tx.weight * p01[c];
        const double bottom = (1.0 - tx.weight) * p10[c] + tx.weight * p11[c];
        dst[c] = static_cast<float>((1.0 - ty.weight) * top + ty.weight * bottom);
      }
    }
  }
  return out;
}

FeatureMap align_multiscale(const std::vector<FeatureMap>& layers, const AggregationConfig& config) {
  config.validate();
  if (layers.empty()) throw ConfigError("no feature layers supplied");
  std::vector<const FeatureMap*> selected;
  for (std::uint32_t idx : config.layer_indices) {
    if (idx >= layers.size()) {
      throw ConfigError("layer index " + std::to_string(idx) + " out of range (" + std::to_string(layers.size()) +
                        " layers)");
    }
    const FeatureMap& layer = layers[idx];
    layer.validate();
    if (layer.height == 0 || layer.width == 0 || layer.channels == 0) {
      throw ConfigError("layer " + std::to_string(idx) + " is zero-sized");
    }
    selected.push_back(&layer);
  }
  const std::uint32_t th = config.target_hw ? config.target_hw->first : selected.front()->height;
  const std::uint32_t tw = config.target_hw ? config.target_hw->second : selected.front()->width;

  if (selected.size() == 1) return resize_bilinear(*selected.front(), th, tw);

  std::uint32_t total_channels = 0;
  for (const auto* layer : selected) total_channels += layer->channels;
  FeatureMap out(th, tw, total_channels);
  std::uint32_t offset = 0;
  for (const auto* layer : selected) {
    const FeatureMap resized = resize_bilinear(*layer, th, tw);
    for (std::uint32_t h = 0; h < th; ++h) {
      for (std::uint32_t w = 0; w < tw; ++w) {
        const auto src = resized.patch(h, w);
        std::copy(src.begin(), src.end(), out.patch(h, w).begin() + offset);
      }
    }
    offset += layer->channels;
  }
  return out;
}

PatchSet aggregate(const FeatureMap& map, const AggregationConfig& config, std::string image_id) {
  config.validate();
  map.validate();
  if (map.height == 0 || map.width == 0 || map.channels == 0) throw ConfigError("cannot aggregate a zero-sized map");

  PatchSet out;
  out.image_id = std::move(image_id);
  if (config.patch_size == 1) {
    out.features = map;
    return out;
  }
  const std::int64_t radius = config.patch_size / 2;
  const std::int64_t height = map.height;
  const std::int64_t width = map.width;
  out.features = FeatureMap(map.height, map.width, map.channels);
  std::vector<double> acc(map.channels);
  for (std::int64_t h = 0; h < height; ++h) {
    const std::int64_t a0 = std::max<std::int64_t>(0, h - radius);
    const std::int64_t a1 = std::min(height - 1, h + radius);
    for (std::int64_t w = 0; w < width; ++w) {
      const std::int64_t b0 = std::max<std::int64_t>(0, w - radius);
      const std::int64_t b1 = std::min(width - 1, w + radius);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t a = a0; a <= a1; ++a) {
        for (std::int64_t b = b0; b <= b1; ++b) {
          const auto src = map.patch(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
          for (std::uint32_t c = 0; c < map.channels; ++c) acc[c] += src[c];
        }
      }
      const double count = static_cast<double>((a1 - a0 + 1) * (b1 - b0 + 1));
      auto dst = out.features.patch(static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w));
      for (std::uint32_t c = 0; c < map.channels; ++c) dst[c] = static_cast<float>(acc[c] / count);
    }
  }
  return out;
}

PatchSet extract_patch_set(const ManifestEntry& entry, const DatasetManifest& manifest,
                           const AggregationConfig& config) {
  if (entry.aggregated) {
    PatchSet out;
    out.image_id = entry.id;
    out.features = read_feature_map(manifest.resolve(entry.feature_path));
    return out;
  }
  std::vector<FeatureMap> layers;
  if (entry.layer_paths.empty()) {
    layers.push_back(read_feature_map(manifest.resolve(entry.feature_path)));
  } else {
    // Only the selected layers are read; the rest stay as empty placeholders.
    layers.resize(entry.layer_paths.size());
    for (std::uint32_t idx : config.layer_indices) {
      if (idx >= entry.layer_paths.size()) {
        throw ConfigError("entry " + entry.id + " has no layer " + std::to_string(idx));
      }
      layers[idx] = read_feature_map(manifest.resolve(entry.layer_paths[idx]));
    }
  }
  return aggregate(align_multiscale(layers, config), config, entry.id);
}

}  // namespace wsad
