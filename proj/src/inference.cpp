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

#include "wsad/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "wsad/discriminator.hpp"
#include "wsad/errors.hpp"

namespace wsad {

double AnomalyMap::max_value() const {
  if (grid.data.empty()) throw ConfigError("anomaly map for " + image_id + " is empty");
  return static_cast<double>(*std::max_element(grid.data.begin(), grid.data.end()));
}

std::pair<AnomalyMap, ImageResult> score_image(const Discriminator& model, const PatchSet& patches) {
  if (patches.channels() != model.input_dim()) {
    throw DimensionMismatch("image " + patches.image_id + " has " + std::to_string(patches.channels()) +
                            " channels, model expects " + std::to_string(model.input_dim()));
  }
  AnomalyMap map;
  map.image_id = patches.image_id;
  map.grid = FeatureMap(patches.features.height, patches.features.width, 1);
  const RowsView rows = patches.rows();
  for (std::size_t i = 0; i < rows.rows(); ++i) map.grid.data[i] = static_cast<float>(model.forward(rows.row(i)));
  ImageResult result{patches.image_id, map.max_value(), std::nullopt};
  return {std::move(map), result};
}

FeatureMap gaussian_blur(const FeatureMap& map, double sigma) {
  if (map.channels != 1) throw DimensionMismatch("blur expects a single-channel map");
  if (!(sigma > 0.0)) return map;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (auto& k : kernel) k /= total;

  const int height = static_cast<int>(map.height);
  const int width = static_cast<int>(map.width);
  std::vector<double> tmp(map.data.size());
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int x = std::clamp(w + i, 0, width - 1);
        acc += kernel[i + radius] * map.data[static_cast<std::size_t>(h) * width + x];
      }
      tmp[static_cast<std::size_t>(h) * width + w] = acc;
    }
  }
  FeatureMap out(map.height, map.width, 1);
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int y = std::clamp(h + i, 0, height - 1);
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(y) * width + w];
      }
      out.data[static_cast<std::size_t>(h) * width + w] = static_cast<float>(acc);
    }
  }
  return out;
}

FeatureMap render_values(const AnomalyMap& map, std::uint32_t height, std::uint32_t width, double sigma) {
  if (height == 0 || width == 0) throw ConfigError("render target has zero area");
  if (height < map.grid.height || width < map.grid.width) {
    throw ConfigError("render target must be at least the grid size");
  }
  FeatureMap img = gaussian_blur(resize_bilinear(map.grid, height, width), sigma);
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double min_v = *lo;
  const double range = static_cast<double>(*hi) - min_v;
  for (auto& v : img.data) v = range > 0.0 ? static_cast<float>((v - min_v) / range) : 0.0f;
  return img;
}

void write_pgm(const FeatureMap& normalized, const std::filesystem::path& path) {
  if (normalized.channels != 1) throw DimensionMismatch("PGM output needs a single-channel map");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << normalized.width << ' ' << normalized.height << "\n255\n";
  std::vector<unsigned char> pixels(normalized.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(normalized.data[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

void render_map(const AnomalyMap& map, std::uint32_t height, std::uint32_t width, double sigma,
                const std::filesystem::path& path) {
  write_pgm(render_values(map, height, width, sigma), path);
}

void write_scores(const std::vector<ImageResult>& results, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : results) {
    nlohmann::json j{{"id", r.image_id}, {"label", r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr)},
                     {"score", r.score}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<ImageResult> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file " + path.string());
  std::vector<ImageResult> results;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ImageResult r;
    r.image_id = j.at("id").get<std::string>();
    r.score = j.at("score").get<double>();
    if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<int>();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace wsad
