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

#include "wsad/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "wsad/errors.hpp"
#include "wsad/inference.hpp"
#include "wsad/rng.hpp"

namespace wsad {
namespace {

// Dot product with f64 accumulation in eight independent lanes. Float
// products are exact in double, so the only rounding is in the lane sums.
double dot_f64(const float* a, const float* b, std::size_t n) {
  double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t c = 0;
  for (; c + 8 <= n; c += 8) {
    for (int k = 0; k < 8; ++k) lanes[k] += static_cast<double>(a[c + k]) * static_cast<double>(b[c + k]);
  }
  for (; c < n; ++c) lanes[c % 8] += static_cast<double>(a[c]) * static_cast<double>(b[c]);
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

double squared_distance_f64(const float* a, const float* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
    sum += d * d;
  }
  return sum;
}

}  // namespace

NormalBank::NormalBank(std::size_t channels, std::vector<float> rows, std::vector<PatchOrigin> origins)
    : channels_(channels), rows_(std::move(rows)), origins_(std::move(origins)) {
  if (channels_ == 0) throw DimensionMismatch("bank channel count must be positive");
  if (rows_.size() % channels_ != 0 || rows_.size() / channels_ != origins_.size()) {
    throw DimensionMismatch("bank rows and origins disagree");
  }
  if (origins_.empty()) throw ConfigError("normal bank is empty");
  sq_norms_.resize(origins_.size());
  for (std::size_t i = 0; i < origins_.size(); ++i) {
    const float* r = rows_.data() + i * channels_;
    sq_norms_[i] = dot_f64(r, r, channels_);
    max_sq_norm_ = std::max(max_sq_norm_, sq_norms_[i]);
  }
}

std::pair<double, std::size_t> NormalBank::nearest(std::span<const float> query) const {
  if (query.size() != channels_) {
    throw DimensionMismatch("query has " + std::to_string(query.size()) + " channels, bank has " +
                            std::to_string(channels_));
  }
  const std::size_t n = size();
  const float* q = query.data();
  const double q_norm = dot_f64(q, q, channels_);

  // Screen with ||q||^2 + ||r||^2 - 2<q, r>, then settle every row within the
  // screen's rounding bound of the minimum by a direct difference sum.
  thread_local std::vector<double> screened;
  screened.resize(n);
  double best_screen = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = q_norm + sq_norms_[i] - 2.0 * dot_f64(q, rows_.data() + i * channels_, channels_);
    screened[i] = d2;
    best_screen = std::min(best_screen, d2);
  }
  const double slack = 16.0 * static_cast<double>(channels_ + 4) * std::numeric_limits<double>::epsilon() *
                       (q_norm + max_sq_norm_);
  const double cutoff = best_screen + slack;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (screened[i] > cutoff) continue;
    const double d2 = squared_distance_f64(q, rows_.data() + i * channels_, channels_);
    if (d2 < best) {
      best = d2;
      best_index = i;
    }
  }
  return {std::sqrt(std::max(best, 0.0)), best_index};
}

double NormalBank::nearest_distance(std::span<const float> query) const { return nearest(query).first; }

std::vector<double> NormalBank::nearest_distances(RowsView queries, unsigned threads) const {
  if (queries.cols != channels_) {
    throw DimensionMismatch("queries have " + std::to_string(queries.cols) + " channels, bank has " +
                            std::to_string(channels_));
  }
  const std::size_t n = queries.rows();
  std::vector<double> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = nearest_distance(queries.row(i));
    return out;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> failures(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) out[i] = nearest_distance(queries.row(i));
      } catch (...) {
        failures[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

std::filesystem::path bank_features_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".wsfx");
}

std::filesystem::path bank_origins_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".origins.jsonl");
}

void write_origins(const std::vector<PatchOrigin>& origins, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& o : origins) {
    out << nlohmann::json{{"image_id", o.image_id}, {"h", o.h}, {"w", o.w}}.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<PatchOrigin> read_origins(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PatchOrigin> origins;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    origins.push_back({j.at("image_id").get<std::string>(), j.at("h").get<std::uint32_t>(),
                       j.at("w").get<std::uint32_t>()});
  }
  return origins;
}

void NormalBank::save(const std::filesystem::path& stem) const {
  write_feature_map(rows_to_map(rows()), bank_features_path(stem));
  write_origins(origins_, bank_origins_path(stem));
}

NormalBank NormalBank::load(const std::filesystem::path& stem) {
  FeatureMap map = read_feature_map(bank_features_path(stem));
  if (map.width != 1) throw FormatError(bank_features_path(stem).string() + ": bank files must have width 1");
  auto origins = read_origins(bank_origins_path(stem));
  return NormalBank(map.channels, std::move(map.data), std::move(origins));
}

NormalBank build_bank(const std::vector<PatchSet>& normal_patches, const BankOptions& options) {
  if (normal_patches.empty()) throw ConfigError("cannot build a normal bank from zero normal images");
  if (!(options.subsample > 0.0 && options.subsample <= 1.0)) {
    throw ConfigError("bank subsample fraction must lie in (0, 1]");
  }
  const std::size_t channels = normal_patches.front().channels();
  std::vector<float> rows;
  std::vector<PatchOrigin> origins;
  Rng rng(options.subsample_seed);
  for (const auto& ps : normal_patches) {
    if (ps.channels() != channels) {
      throw DimensionMismatch("image " + ps.image_id + " has " + std::to_string(ps.channels()) +
                              " channels, expected " + std::to_string(channels));
    }
    const RowsView view = ps.rows();
    for (std::size_t i = 0; i < view.rows(); ++i) {
      if (options.subsample < 1.0 && rng.uniform() >= options.subsample) continue;
      const auto r = view.row(i);
      rows.insert(rows.end(), r.begin(), r.end());
      origins.push_back(ps.origin(i));
    }
  }
  if (origins.empty()) throw ConfigError("bank subsampling removed every row");
  return NormalBank(channels, std::move(rows), std::move(origins));
}

NormalBank build_bank(const DatasetManifest& manifest, const AggregationConfig& config, const BankOptions& options) {
  const auto normals = manifest.select(Split::kTrainNormal);
  if (normals.empty()) throw ConfigError("manifest has no train-normal images; cannot build a normal bank");
  std::vector<PatchSet> sets;
  sets.reserve(normals.size());
  for (const auto* e : normals) sets.push_back(extract_patch_set(*e, manifest, config));
  return build_bank(sets, options);
}

std::pair<AnomalyMap, ImageResult> knn_score_image(const NormalBank& bank, const PatchSet& patches,
                                                   unsigned threads) {
  const auto distances = bank.nearest_distances(patches.rows(), threads);
  AnomalyMap map;
  map.image_id = patches.image_id;
  map.grid = FeatureMap(patches.features.height, patches.features.width, 1);
  for (std::size_t i = 0; i < distances.size(); ++i) map.grid.data[i] = static_cast<float>(distances[i]);
  ImageResult result{patches.image_id, map.max_value(), std::nullopt};
  return {std::move(map), result};
}

}  // namespace wsad
