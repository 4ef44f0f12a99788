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

#ifndef WSAD_EVAL_HPP_
#define WSAD_EVAL_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsad/inference.hpp"

namespace wsad {

// Rank-based (Mann-Whitney) AUROC with average ranks for ties. Requires
// both labels present; unlabeled results are rejected.
double auroc(std::span<const ImageResult> results);

struct ThresholdChoice {
  double threshold = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Sweeps every distinct score t (anomaly iff score >= t) and keeps the
// F1-maximizing one, smaller t on ties.
ThresholdChoice threshold_and_classify(std::span<const ImageResult> results);

// Accuracy and F1 at a fixed threshold.
ThresholdChoice classify_at(std::span<const ImageResult> results, double threshold);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for a single run
};

struct EvalReport {
  double auroc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
  // Filled by aggregate_runs.
  std::vector<EvalReport> runs;
  MetricSummary auroc_summary;
  MetricSummary accuracy_summary;
  MetricSummary f1_summary;
};

EvalReport evaluate(std::span<const ImageResult> results);

// Mean and sample standard deviation per metric; the top-level metric
// fields hold the means.
EvalReport aggregate_runs(const std::vector<EvalReport>& reports);

std::string report_to_json(const EvalReport& report);
// Table with AUROC / ACC / F1 rows in percent, "mean±std".
std::string report_to_markdown(const EvalReport& report, const std::string& title = "wsad");
void write_report(const EvalReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& markdown_path = {});

}  // namespace wsad

#endif  // WSAD_EVAL_HPP_
