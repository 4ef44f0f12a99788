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

#ifndef WSAD_INFERENCE_HPP_
#define WSAD_INFERENCE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsad/feature_map.hpp"
#include "wsad/pipeline.hpp"

namespace wsad {

class Discriminator;

// Raw H' x W' grid of patch scores for one image (stored as H' x W' x 1).
struct AnomalyMap {
  std::string image_id;
  FeatureMap grid;

  double max_value() const;
};

struct ImageResult {
  std::string image_id;
  double score = 0.0;
  std::optional<int> label;

  bool operator==(const ImageResult&) const = default;
};

// grid(h, w) = D(patch(h, w)); score = max over the grid.
std::pair<AnomalyMap, ImageResult> score_image(const Discriminator& model, const PatchSet& patches);

// Visualization: bilinear upsample to (height, width), optional Gaussian blur
// (sigma in output pixels, 0 disables), per-image min-max normalization to
// [0, 1]. Constant maps render as all zeros.
FeatureMap render_values(const AnomalyMap& map, std::uint32_t height, std::uint32_t width, double sigma);

// Binary PGM (P5, maxval 255) of render_values.
void render_map(const AnomalyMap& map, std::uint32_t height, std::uint32_t width, double sigma,
                const std::filesystem::path& path);

// Gaussian blur of a single-channel map, edge-clamped, separable.
FeatureMap gaussian_blur(const FeatureMap& map, double sigma);

void write_pgm(const FeatureMap& normalized, const std::filesystem::path& path);

// JSON-lines score files: {"id", "label", "score"} per line.
void write_scores(const std::vector<ImageResult>& results, const std::filesystem::path& path);
std::vector<ImageResult> read_scores(const std::filesystem::path& path);

}  // namespace wsad

#endif  // WSAD_INFERENCE_HPP_
