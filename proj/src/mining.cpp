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

#include "wsad/mining.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "wsad/errors.hpp"
#include "wsad/rng.hpp"

namespace wsad {

std::size_t retention_count(double r, std::size_t n) {
  const double exact = r * static_cast<double>(n);
  // r is typically a short decimal; absorb the representation error so that
  // r = 0.7, n = 10 gives 7 and not 6.
  return static_cast<std::size_t>(std::floor(exact + 1e-9 * std::max(1.0, exact)));
}

std::vector<std::size_t> select_retained(std::span<const double> scores, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("retention rate must lie in (0, 1]");
  const std::size_t keep = retention_count(r, scores.size());
  if (keep == 0) {
    throw EmptyRetention("retention yields empty set: r=" + std::to_string(r) + " over " +
                         std::to_string(scores.size()) + " features");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(keep);
  return order;
}

MinedAnomalySet mine(const NormalBank& bank, const std::vector<PatchSet>& anomaly_patches, double r,
                     unsigned threads) {
  if (anomaly_patches.empty()) {
    throw NoAnomalyImages("no anomaly training images; use the kNN scorer instead");
  }
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("retention rate must lie in (0, 1]");
  const std::size_t channels = bank.channels();
  std::vector<float> candidates;
  std::vector<PatchOrigin> origins;
  for (const auto& ps : anomaly_patches) {
    if (ps.channels() != channels) {
      throw DimensionMismatch("anomaly image " + ps.image_id + " has " + std::to_string(ps.channels()) +
                              " channels, bank has " + std::to_string(channels));
    }
    candidates.insert(candidates.end(), ps.features.data.begin(), ps.features.data.end());
    for (std::size_t i = 0; i < ps.size(); ++i) origins.push_back(ps.origin(i));
  }
  const RowsView view{std::span<const float>(candidates), channels};
  const std::vector<double> scores = bank.nearest_distances(view, threads);
  const auto kept = select_retained(scores, r);

  MinedAnomalySet out;
  out.channels = channels;
  out.retention_rate = r;
  out.candidate_count = origins.size();
  out.features.reserve(kept.size() * channels);
  for (std::size_t idx : kept) {
    const auto row = view.row(idx);
    out.features.insert(out.features.end(), row.begin(), row.end());
    out.scores.push_back(scores[idx]);
    out.origins.push_back(origins[idx]);
  }
  return out;
}

AugmentedAnomalySet without_mixing(const MinedAnomalySet& mined) {
  AugmentedAnomalySet out;
  out.channels = mined.channels;
  out.features = mined.features;
  out.alphas.assign(mined.size(), 1.0);
  out.pairs.resize(mined.size());
  for (std::size_t i = 0; i < mined.size(); ++i) out.pairs[i].anomaly_row = i;
  return out;
}

AugmentedAnomalySet linear_mix(const MinedAnomalySet& mined, const NormalBank& bank, std::size_t target_size,
                               double alpha_low, double alpha_high, std::uint64_t seed) {
  if (mined.size() == 0) throw ConfigError("cannot mix an empty mined set");
  if (!(alpha_low > 0.0 && alpha_low <= alpha_high && alpha_high <= 1.0)) {
    throw ConfigError("alpha range must satisfy 0 < low <= high <= 1");
  }
  if (target_size < mined.size()) {
    throw ConfigError("mix target size " + std::to_string(target_size) + " is smaller than the mined set (" +
                      std::to_string(mined.size()) + "); mined features are never discarded");
  }
  if (bank.channels() != mined.channels) throw DimensionMismatch("mined set and bank differ in channel count");

  AugmentedAnomalySet out = without_mixing(mined);
  const std::size_t channels = mined.channels;
  const RowsView anomalies = mined.rows();
  Rng rng(seed);
  out.features.reserve(target_size * channels);
  for (std::size_t i = mined.size(); i < target_size; ++i) {
    const std::size_t a = rng.index(mined.size());
    const std::size_t n = rng.index(bank.size());
    const double alpha = rng.uniform(alpha_low, alpha_high);
    const auto ma = anomalies.row(a);
    const auto mn = bank.row(n);
    for (std::size_t c = 0; c < channels; ++c) {
      out.features.push_back(static_cast<float>(alpha * ma[c] + (1.0 - alpha) * mn[c]));
    }
    out.alphas.push_back(alpha);
    out.pairs.push_back({a, n});
  }
  return out;
}

namespace {

std::filesystem::path features_of(const std::filesystem::path& stem) { return stem.string() + ".wsfx"; }
std::filesystem::path sidecar_of(const std::filesystem::path& stem) { return stem.string() + ".jsonl"; }

std::ofstream open_sidecar(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<nlohmann::json> read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(nlohmann::json::parse(line));
  }
  return records;
}

}  // namespace

void save_mined(const MinedAnomalySet& mined, const std::filesystem::path& stem) {
  write_feature_map(rows_to_map(mined.rows()), features_of(stem));
  auto out = open_sidecar(sidecar_of(stem));
  for (std::size_t i = 0; i < mined.size(); ++i) {
    nlohmann::json j{{"score", mined.scores[i]},
                     {"image_id", mined.origins[i].image_id},
                     {"h", mined.origins[i].h},
                     {"w", mined.origins[i].w}};
    if (i == 0) {
      j["retention_rate"] = mined.retention_rate;
      j["candidate_count"] = mined.candidate_count;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + sidecar_of(stem).string());
}

MinedAnomalySet load_mined(const std::filesystem::path& stem) {
  FeatureMap map = read_feature_map(features_of(stem));
  const auto records = read_sidecar(sidecar_of(stem));
  if (records.size() != map.height) throw FormatError(sidecar_of(stem).string() + ": row count disagrees with features");
  MinedAnomalySet mined;
  mined.channels = map.channels;
  mined.features = std::move(map.data);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& j = records[i];
    mined.scores.push_back(j.at("score").get<double>());
    mined.origins.push_back({j.at("image_id").get<std::string>(), j.at("h").get<std::uint32_t>(),
                             j.at("w").get<std::uint32_t>()});
    if (i == 0) {
      mined.retention_rate = j.value("retention_rate", 1.0);
      mined.candidate_count = j.value("candidate_count", records.size());
    }
  }
  return mined;
}

void save_augmented(const AugmentedAnomalySet& augmented, const std::filesystem::path& stem) {
  write_feature_map(rows_to_map(augmented.rows()), features_of(stem));
  auto out = open_sidecar(sidecar_of(stem));
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const auto& p = augmented.pairs[i];
    nlohmann::json j{{"alpha", augmented.alphas[i]},
                     {"anomaly_row", p.anomaly_row},
                     {"normal_row", p.normal_row ? nlohmann::json(*p.normal_row) : nlohmann::json(nullptr)}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + sidecar_of(stem).string());
}

AugmentedAnomalySet load_augmented(const std::filesystem::path& stem) {
  FeatureMap map = read_feature_map(features_of(stem));
  const auto records = read_sidecar(sidecar_of(stem));
  if (records.size() != map.height) throw FormatError(sidecar_of(stem).string() + ": row count disagrees with features");
  AugmentedAnomalySet out;
  out.channels = map.channels;
  out.features = std::move(map.data);
  for (const auto& j : records) {
    out.alphas.push_back(j.at("alpha").get<double>());
    MixPair p;
    p.anomaly_row = j.at("anomaly_row").get<std::size_t>();
    if (!j.at("normal_row").is_null()) p.normal_row = j["normal_row"].get<std::size_t>();
    out.pairs.push_back(p);
  }
  return out;
}

}  // namespace wsad
