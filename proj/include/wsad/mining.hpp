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

#ifndef WSAD_MINING_HPP_
#define WSAD_MINING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "wsad/feature_map.hpp"
#include "wsad/memory_bank.hpp"
#include "wsad/pipeline.hpp"

namespace wsad {

// Retained anomaly-image features M'_a, sorted by score descending.
struct MinedAnomalySet {
  std::size_t channels = 0;
  std::vector<float> features;
  std::vector<double> scores;
  std::vector<PatchOrigin> origins;
  double retention_rate = 1.0;
  // |M_a|, the number of candidates scored.
  std::size_t candidate_count = 0;

  std::size_t size() const { return scores.size(); }
  RowsView rows() const { return {std::span<const float>(features), channels}; }
};

// floor(r * n), robust to decimal r such as 0.1 or 0.7 not being exact.
std::size_t retention_count(double r, std::size_t n);

// Indices of the retention_count(r, n) largest scores, ordered by score
// descending; equal scores keep candidate order (earlier first).
std::vector<std::size_t> select_retained(std::span<const double> scores, double r);

// Scores every anomaly-image patch by its nearest-normal distance and keeps
// the top fraction r. Candidate order is input order, then row-major (h, w).
MinedAnomalySet mine(const NormalBank& bank, const std::vector<PatchSet>& anomaly_patches, double r,
                     unsigned threads = 1);

struct MixPair {
  std::size_t anomaly_row = 0;
  // Absent for rows copied verbatim from the mined set.
  std::optional<std::size_t> normal_row;

  bool operator==(const MixPair&) const = default;
};

// M*_a: the mined rows verbatim (alpha = 1) followed by mixed rows
// alpha * m_a + (1 - alpha) * m_n.
struct AugmentedAnomalySet {
  std::size_t channels = 0;
  std::vector<float> features;
  std::vector<double> alphas;
  std::vector<MixPair> pairs;

  std::size_t size() const { return alphas.size(); }
  RowsView rows() const { return {std::span<const float>(features), channels}; }

  bool operator==(const AugmentedAnomalySet&) const = default;
};

// Fills up to target_size rows; pairs are drawn independently and uniformly
// with replacement, alpha ~ U[alpha_low, alpha_high].
AugmentedAnomalySet linear_mix(const MinedAnomalySet& mined, const NormalBank& bank, std::size_t target_size,
                               double alpha_low, double alpha_high, std::uint64_t seed);

// The mined rows alone, all alpha = 1 (mixing disabled).
AugmentedAnomalySet without_mixing(const MinedAnomalySet& mined);

// Persistence: <stem>.wsfx (rows x 1 x C) plus <stem>.jsonl, one record per row.
void save_mined(const MinedAnomalySet& mined, const std::filesystem::path& stem);
MinedAnomalySet load_mined(const std::filesystem::path& stem);
void save_augmented(const AugmentedAnomalySet& augmented, const std::filesystem::path& stem);
AugmentedAnomalySet load_augmented(const std::filesystem::path& stem);

}  // namespace wsad

#endif  // WSAD_MINING_HPP_
