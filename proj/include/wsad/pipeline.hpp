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

#ifndef WSAD_PIPELINE_HPP_
#define WSAD_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsad/feature_map.hpp"
#include "wsad/manifest.hpp"

namespace wsad {

struct AggregationConfig {
  // Neighborhood side length p (odd).
  std::uint32_t patch_size = 5;
  // Which layers of a multi-layer entry feed the aligned map.
  std::vector<std::uint32_t> layer_indices{0};
  // (H', W'); defaults to the first selected layer's dims.
  std::optional<std::pair<std::uint32_t, std::uint32_t>> target_hw;

  void validate() const;
};

// Aggregated patch features M(x) of one image, H' x W' x C'.
struct PatchSet {
  std::string image_id;
  FeatureMap features;

  std::size_t size() const { return features.patch_count(); }
  std::uint32_t channels() const { return features.channels; }
  std::span<const float> patch(std::uint32_t h, std::uint32_t w) const { return features.patch(h, w); }
  PatchOrigin origin(std::size_t index) const {
    return {image_id, static_cast<std::uint32_t>(index / features.width),
            static_cast<std::uint32_t>(index % features.width)};
  }
  RowsView rows() const { return map_as_rows(features); }
};

// Bilinear resize, half-pixel centers, edge-clamped. Identity (bitwise) when
// dims already match.
FeatureMap resize_bilinear(const FeatureMap& map, std::uint32_t height, std::uint32_t width);

// Resizes every selected layer to (H', W') and concatenates channels.
FeatureMap align_multiscale(const std::vector<FeatureMap>& layers, const AggregationConfig& config);

// Per-channel mean over the p x p neighborhood clipped to the map bounds.
PatchSet aggregate(const FeatureMap& map, const AggregationConfig& config, std::string image_id = {});

// Reads the entry's layer file(s), aligns, and aggregates. Entries marked
// `aggregated` are returned as stored.
PatchSet extract_patch_set(const ManifestEntry& entry, const DatasetManifest& manifest,
                           const AggregationConfig& config);

}  // namespace wsad

#endif  // WSAD_PIPELINE_HPP_
