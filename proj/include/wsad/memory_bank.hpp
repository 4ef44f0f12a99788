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

#ifndef WSAD_MEMORY_BANK_HPP_
#define WSAD_MEMORY_BANK_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wsad/feature_map.hpp"
#include "wsad/manifest.hpp"
#include "wsad/pipeline.hpp"

namespace wsad {

struct AnomalyMap;
struct ImageResult;

// Normal patch features M_n with exact Euclidean nearest-neighbor queries.
// Immutable once built; queries are safe from any number of threads.
class NormalBank {
 public:
  NormalBank() = default;
  NormalBank(std::size_t channels, std::vector<float> rows, std::vector<PatchOrigin> origins);

  std::size_t size() const { return origins_.size(); }
  std::size_t channels() const { return channels_; }
  RowsView rows() const { return {std::span<const float>(rows_), channels_}; }
  std::span<const float> row(std::size_t i) const { return rows().row(i); }
  const std::vector<PatchOrigin>& origins() const { return origins_; }

  // S(m) = min over rows of ||row - m||_2.
  double nearest_distance(std::span<const float> query) const;
  // Same, also returning the index of the nearest row.
  std::pair<double, std::size_t> nearest(std::span<const float> query) const;

  // One distance per query row. Queries are partitioned across `threads`
  // workers; each query is evaluated identically regardless of partition.
  std::vector<double> nearest_distances(RowsView queries, unsigned threads = 1) const;

  void save(const std::filesystem::path& stem) const;
  static NormalBank load(const std::filesystem::path& stem);

 private:
  std::size_t channels_ = 0;
  std::vector<float> rows_;
  std::vector<double> sq_norms_;
  double max_sq_norm_ = 0.0;
  std::vector<PatchOrigin> origins_;
};

struct BankOptions {
  // Fraction of rows kept by uniform random subsampling; 1 keeps all.
  double subsample = 1.0;
  std::uint64_t subsample_seed = 0;
};

// Concatenates the patch sets of all train-normal images in manifest order,
// each in row-major (h, w) order.
NormalBank build_bank(const DatasetManifest& manifest, const AggregationConfig& config,
                      const BankOptions& options = {});
NormalBank build_bank(const std::vector<PatchSet>& normal_patches, const BankOptions& options = {});

// Unsupervised scoring: map(h, w) = S(patch), image score = max.
std::pair<AnomalyMap, ImageResult> knn_score_image(const NormalBank& bank, const PatchSet& patches,
                                                   unsigned threads = 1);

// Paths used by NormalBank::save / load.
std::filesystem::path bank_features_path(const std::filesystem::path& stem);
std::filesystem::path bank_origins_path(const std::filesystem::path& stem);

void write_origins(const std::vector<PatchOrigin>& origins, const std::filesystem::path& path);
std::vector<PatchOrigin> read_origins(const std::filesystem::path& path);

}  // namespace wsad

#endif  // WSAD_MEMORY_BANK_HPP_
