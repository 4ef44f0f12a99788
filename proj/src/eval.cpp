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

#include "wsad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "wsad/errors.hpp"

namespace wsad {
namespace {

struct Counts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

Counts count_labels(std::span<const ImageResult> results) {
  Counts c;
  for (const auto& r : results) {
    if (!r.label) throw UndefinedMetric("result " + r.image_id + " has no label");
    if (*r.label == 1) {
      ++c.positives;
    } else {
      ++c.negatives;
    }
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetric("metric needs both normal and anomaly results (got " + std::to_string(c.negatives) +
                          " normal, " + std::to_string(c.positives) + " anomaly)");
  }
  return c;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

nlohmann::json metrics_json(const EvalReport& r) {
  return {{"auroc", r.auroc},         {"accuracy", r.accuracy}, {"f1", r.f1},
          {"threshold", r.threshold}, {"n_normal", r.n_normal}, {"n_anomaly", r.n_anomaly}};
}

}  // namespace

double auroc(std::span<const ImageResult> results) {
  const Counts counts = count_labels(results);
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return results[a].score < results[b].score; });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && results[order[j + 1]].score == results[order[i]].score) ++j;
    // Ranks i+1 .. j+1 share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (*results[order[k]].label == 1) positive_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(counts.positives);
  const double nn = static_cast<double>(counts.negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

ThresholdChoice classify_at(std::span<const ImageResult> results, double threshold) {
  const Counts counts = count_labels(results);
  std::size_t tp = 0, fp = 0;
  for (const auto& r : results) {
    if (r.score >= threshold) {
      if (*r.label == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
  }
  const std::size_t fn = counts.positives - tp;
  const std::size_t tn = counts.negatives - fp;
  ThresholdChoice c;
  c.threshold = threshold;
  c.accuracy = static_cast<double>(tp + tn) / static_cast<double>(results.size());
  c.f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  return c;
}

ThresholdChoice threshold_and_classify(std::span<const ImageResult> results) {
  const Counts counts = count_labels(results);
  // Descending sweep: each distinct score admits one more group of results.
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return results[a].score > results[b].score; });
  std::size_t tp = 0, fp = 0;
  ThresholdChoice best;
  bool have_best = false;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = results[order[i]].score;
    while (i < order.size() && results[order[i]].score == t) {
      if (*results[order[i]].label == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const std::size_t fn = counts.positives - tp;
    const std::size_t tn = counts.negatives - fp;
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    // >= so that a later (smaller) threshold wins ties.
    if (!have_best || f1 >= best.f1) {
      best.threshold = t;
      best.f1 = f1;
      best.accuracy = static_cast<double>(tp + tn) / static_cast<double>(results.size());
      have_best = true;
    }
  }
  return best;
}

EvalReport evaluate(std::span<const ImageResult> results) {
  const Counts counts = count_labels(results);
  EvalReport report;
  report.auroc = auroc(results);
  const ThresholdChoice choice = threshold_and_classify(results);
  report.accuracy = choice.accuracy;
  report.f1 = choice.f1;
  report.threshold = choice.threshold;
  report.n_normal = counts.negatives;
  report.n_anomaly = counts.positives;
  report.auroc_summary = {report.auroc, 0.0};
  report.accuracy_summary = {report.accuracy, 0.0};
  report.f1_summary = {report.f1, 0.0};
  return report;
}

EvalReport aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to aggregate");
  std::vector<double> au, acc, f1, thr;
  for (const auto& r : reports) {
    au.push_back(r.auroc);
    acc.push_back(r.accuracy);
    f1.push_back(r.f1);
    thr.push_back(r.threshold);
  }
  EvalReport out;
  out.auroc_summary = summarize(au);
  out.accuracy_summary = summarize(acc);
  out.f1_summary = summarize(f1);
  out.auroc = out.auroc_summary.mean;
  out.accuracy = out.accuracy_summary.mean;
  out.f1 = out.f1_summary.mean;
  out.threshold = summarize(thr).mean;
  out.n_normal = reports.front().n_normal;
  out.n_anomaly = reports.front().n_anomaly;
  for (const auto& r : reports) {
    EvalReport run = r;
    run.runs.clear();
    out.runs.push_back(std::move(run));
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j = metrics_json(report);
  j["summary"] = {
      {"auroc", {{"mean", report.auroc_summary.mean}, {"std", report.auroc_summary.std}}},
      {"accuracy", {{"mean", report.accuracy_summary.mean}, {"std", report.accuracy_summary.std}}},
      {"f1", {{"mean", report.f1_summary.mean}, {"std", report.f1_summary.std}}},
  };
  j["runs"] = nlohmann::json::array();
  for (const auto& r : report.runs) j["runs"].push_back(metrics_json(r));
  j["threshold_rule"] = "max-F1 sweep over observed scores, anomaly iff score >= t, smaller t on ties";
  return j.dump(2);
}

std::string report_to_markdown(const EvalReport& report, const std::string& title) {
  auto cell = [](const MetricSummary& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f±%.1f", 100.0 * s.mean, 100.0 * s.std);
    return std::string(buf);
  };
  std::string md = "| | " + title + " |\n|---|---|\n";
  md += "| AUROC | " + cell(report.auroc_summary) + " |\n";
  md += "| ACC | " + cell(report.accuracy_summary) + " |\n";
  md += "| F1 | " + cell(report.f1_summary) + " |\n";
  return md;
}

void write_report(const EvalReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& markdown_path) {
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + json_path.string() + " for writing");
  out << report_to_json(report) << '\n';
  if (!markdown_path.empty()) {
    std::ofstream md(markdown_path, std::ios::trunc);
    if (!md) throw IoError("cannot open " + markdown_path.string() + " for writing");
    md << report_to_markdown(report);
  }
}

}  // namespace wsad
