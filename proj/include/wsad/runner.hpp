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

#ifndef WSAD_RUNNER_HPP_
#define WSAD_RUNNER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wsad/discriminator.hpp"
#include "wsad/eval.hpp"
#include "wsad/inference.hpp"
#include "wsad/manifest.hpp"
#include "wsad/memory_bank.hpp"
#include "wsad/mining.hpp"
#include "wsad/pipeline.hpp"

namespace wsad {

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  AggregationConfig aggregation;
  double retention_rate = 0.2;
  double alpha_low = 0.1;
  double alpha_high = 1.0;
  TrainConfig train;
  // Run i uses seed train.seed + i for mixing and training.
  std::uint32_t repeat = 1;
  bool mining = true;
  bool mixing = true;
  unsigned threads = 1;
  double bank_subsample = 1.0;
  // Per-image WSFX maps and PGM renders.
  bool write_maps = false;
  bool render = false;
  std::uint32_t render_scale = 16;
  double render_sigma = 4.0;

  void validate() const;
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

struct RunOutcome {
  EvalReport report;
  // Empty when the run fell back to kNN scoring.
  std::optional<MinedAnomalySet> mined;
  std::vector<std::vector<ImageResult>> scores;  // per repeat
  bool knn_fallback = false;
};

// extract -> bank -> mine -> mix -> train -> score -> eval, persisting every
// stage under output_dir:
//   run.json, bank.{wsfx,origins.jsonl}, mined.{wsfx,jsonl},
//   run-<i>/{augmented.*, model.wsdm, train_log.jsonl, scores.jsonl,
//            report.json, maps/, renders/}, report.json, report.md
RunOutcome run_all(const RunConfig& config);

// Building blocks shared with the staged CLI.
std::vector<PatchSet> extract_split(const DatasetManifest& manifest, Split split, const AggregationConfig& config);
std::vector<ImageResult> score_split(const Discriminator& model, const DatasetManifest& manifest,
                                     const std::vector<PatchSet>& tests, const std::filesystem::path& maps_dir,
                                     const std::filesystem::path& render_dir, std::uint32_t render_scale,
                                     double render_sigma);
std::vector<ImageResult> knn_score_split(const NormalBank& bank, const DatasetManifest& manifest,
                                         const std::vector<PatchSet>& tests, unsigned threads);
AugmentedAnomalySet augment(const MinedAnomalySet& mined, const NormalBank& bank, bool mixing, double alpha_low,
                            double alpha_high, std::uint64_t seed);
void write_train_log(const std::vector<double>& epoch_losses, const std::filesystem::path& path);

// Fraction of mined origins whose ground-truth mask bit is set. Entries
// without masks count as outside.
double mask_precision(const MinedAnomalySet& mined, const DatasetManifest& manifest);

}  // namespace wsad

#endif  // WSAD_RUNNER_HPP_
