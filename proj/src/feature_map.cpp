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

#include "wsad/feature_map.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wsad/errors.hpp"

namespace wsad {
namespace {

constexpr std::uint8_t kMagic[4] = {'W', 'S', 'F', 'X'};
constexpr std::uint8_t kDtypeF32 = 0;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void FeatureMap::validate() const {
  if (data.size() != element_count()) {
    throw DimensionMismatch("feature map holds " + std::to_string(data.size()) + " values but dims " +
                            std::to_string(height) + "x" + std::to_string(width) + "x" +
                            std::to_string(channels) + " require " + std::to_string(element_count()));
  }
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& map) {
  map.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kWsfxHeaderBytes + map.data.size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u16(out, kWsfxVersion);
  out.push_back(kDtypeF32);
  out.push_back(0);
  put_u32(out, map.height);
  put_u32(out, map.width);
  put_u32(out, map.channels);
  if constexpr (std::endian::native == std::endian::little) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(map.data.data());
    out.insert(out.end(), raw, raw + map.data.size() * sizeof(float));
  } else {
    for (float v : map.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError(source + ": not a WSFX file (bad magic)");
  }
  if (bytes.size() < kWsfxHeaderBytes) {
    throw TruncatedError(source + ": truncated WSFX header (" + std::to_string(bytes.size()) + " bytes)");
  }
  const std::uint16_t version = get_u16(bytes.data() + 4);
  if (version != kWsfxVersion) {
    throw VersionError(source + ": unsupported WSFX version " + std::to_string(version));
  }
  const std::uint8_t dtype = bytes[6];
  if (dtype != kDtypeF32) {
    throw DtypeError(source + ": unsupported WSFX dtype " + std::to_string(dtype));
  }
  FeatureMap map;
  map.height = get_u32(bytes.data() + 8);
  map.width = get_u32(bytes.data() + 12);
  map.channels = get_u32(bytes.data() + 16);
  const std::size_t expected = map.element_count() * 4;
  const std::size_t payload = bytes.size() - kWsfxHeaderBytes;
  if (payload < expected) {
    throw TruncatedError(source + ": truncated WSFX payload, expected " + std::to_string(expected) +
                         " bytes, found " + std::to_string(payload));
  }
  if (payload > expected) {
    throw FormatError(source + ": trailing bytes after WSFX payload (" + std::to_string(payload - expected) + ")");
  }
  map.data.resize(map.element_count());
  const std::uint8_t* p = bytes.data() + kWsfxHeaderBytes;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(map.data.data(), p, expected);
  } else {
    for (std::size_t i = 0; i < map.data.size(); ++i) map.data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
  for (float v : map.data) {
    if (!std::isfinite(v)) throw FormatError(source + ": non-finite value in WSFX payload");
  }
  return map;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

void write_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_feature_map(map));
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  return decode_feature_map(read_file_bytes(path), path.string());
}

FeatureMap rows_to_map(RowsView rows) {
  FeatureMap map;
  map.height = static_cast<std::uint32_t>(rows.rows());
  map.width = 1;
  map.channels = static_cast<std::uint32_t>(rows.cols);
  map.data.assign(rows.values.begin(), rows.values.end());
  return map;
}

RowsView map_as_rows(const FeatureMap& map) {
  return RowsView{std::span<const float>(map.data), map.channels};
}

}  // namespace wsad
