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

#ifndef WSAD_FEATURE_MAP_HPP_
#define WSAD_FEATURE_MAP_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wsad {

// Dense height x width x channels array of 32-bit reals, (h, w, c) layout
// with c fastest. One patch feature is the contiguous channel vector at
// (h, w).
struct FeatureMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(std::uint32_t h, std::uint32_t w, std::uint32_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t element_count() const { return static_cast<std::size_t>(height) * width * channels; }
  std::size_t patch_count() const { return static_cast<std::size_t>(height) * width; }

  float& at(std::uint32_t h, std::uint32_t w, std::uint32_t c) {
    return data[(static_cast<std::size_t>(h) * width + w) * channels + c];
  }
  float at(std::uint32_t h, std::uint32_t w, std::uint32_t c) const {
    return data[(static_cast<std::size_t>(h) * width + w) * channels + c];
  }

  std::span<float> patch(std::uint32_t h, std::uint32_t w) {
    return {data.data() + (static_cast<std::size_t>(h) * width + w) * channels, channels};
  }
  std::span<const float> patch(std::uint32_t h, std::uint32_t w) const {
    return {data.data() + (static_cast<std::size_t>(h) * width + w) * channels, channels};
  }

  // Throws DimensionMismatch if data length disagrees with the dims.
  void validate() const;

  bool operator==(const FeatureMap&) const = default;
};

// Where a patch feature came from.
struct PatchOrigin {
  std::string image_id;
  std::uint32_t h = 0;
  std::uint32_t w = 0;

  bool operator==(const PatchOrigin&) const = default;
};

// Non-owning row-major matrix of patch features (rows x cols).
struct RowsView {
  std::span<const float> values;
  std::size_t cols = 0;

  std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
  std::span<const float> row(std::size_t i) const { return values.subspan(i * cols, cols); }
};

// WSFX file format, all integers little-endian:
//   "WSFX" | u16 version=1 | u8 dtype=0 (f32 LE) | u8 reserved=0 |
//   u32 height | u32 width | u32 channels | payload (h, w, c), c fastest.
inline constexpr std::size_t kWsfxHeaderBytes = 20;
inline constexpr std::uint16_t kWsfxVersion = 1;

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& map);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void write_feature_map(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap read_feature_map(const std::filesystem::path& path);

// Feature matrices are persisted as rows x 1 x cols maps.
FeatureMap rows_to_map(RowsView rows);
RowsView map_as_rows(const FeatureMap& map);

// Reads a whole file or throws IoError naming the path.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace wsad

#endif  // WSAD_FEATURE_MAP_HPP_
