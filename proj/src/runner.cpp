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

#include "wsad/runner.hpp"

#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "wsad/errors.hpp"

namespace wsad {

void RunConfig::validate() const {
  aggregation.validate();
  train.validate();
  if (!(retention_rate > 0.0 && retention_rate <= 1.0)) throw ConfigError("retention rate must lie in (0, 1]");
  if (!(alpha_low > 0.0 && alpha_low <= alpha_high && alpha_high <= 1.0)) {
    throw ConfigError("alpha range must satisfy 0 < low <= high <= 1");
  }
  if (repeat == 0) throw ConfigError("repeat must be >= 1");
  if (manifest.empty()) throw ConfigError("no manifest given");
  if (output_dir.empty()) throw ConfigError("no output directory given");
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["manifest"] = c.manifest.string();
  j["output_dir"] = c.output_dir.string();
  j["aggregation"] = {{"patch_size", c.aggregation.patch_size}, {"layers", c.aggregation.layer_indices}};
  if (c.aggregation.target_hw) {
    j["aggregation"]["target_hw"] = {c.aggregation.target_hw->first, c.aggregation.target_hw->second};
  } else {
    j["aggregation"]["target_hw"] = nullptr;
  }
  j["retention_rate"] = c.retention_rate;
  j["alpha"] = {c.alpha_low, c.alpha_high};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},
                {"seed", c.train.seed},
                {"hidden_dim", c.train.hidden_dim},
                {"threads", c.train.threads}};
  j["repeat"] = c.repeat;
  j["mining"] = c.mining;
  j["mixing"] = c.mixing;
  j["threads"] = c.threads;
  j["bank_subsample"] = c.bank_subsample;
  j["write_maps"] = c.write_maps;
  j["render"] = c.render;
  j["render_scale"] = c.render_scale;
  j["render_sigma"] = c.render_sigma;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  RunConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("invalid config JSON: ") + ex.what());
  }
  try {
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("aggregation")) {
      const auto& a = j["aggregation"];
      c.aggregation.patch_size = a.value("patch_size", c.aggregation.patch_size);
      if (a.contains("layers")) c.aggregation.layer_indices = a["layers"].get<std::vector<std::uint32_t>>();
      if (a.contains("target_hw") && !a["target_hw"].is_null()) {
        const auto hw = a["target_hw"].get<std::vector<std::uint32_t>>();
        if (hw.size() != 2) throw ConfigError("target_hw needs two values");
        c.aggregation.target_hw = std::make_pair(hw[0], hw[1]);
      }
    }
    c.retention_rate = j.value("retention_rate", c.retention_rate);
    if (j.contains("alpha")) {
      const auto a = j["alpha"].get<std::vector<double>>();
      if (a.size() != 2) throw ConfigError("alpha needs [low, high]");
      c.alpha_low = a[0];
      c.alpha_high = a[1];
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.beta1 = t.value("beta1", c.train.beta1);
      c.train.beta2 = t.value("beta2", c.train.beta2);
      c.train.epsilon = t.value("epsilon", c.train.epsilon);
      c.train.seed = t.value("seed", c.train.seed);
      c.train.hidden_dim = t.value("hidden_dim", c.train.hidden_dim);
      c.train.threads = t.value("threads", c.train.threads);
    }
    c.repeat = j.value("repeat", c.repeat);
    c.mining = j.value("mining", c.mining);
    c.mixing = j.value("mixing", c.mixing);
    c.threads = j.value("threads", c.threads);
    c.bank_subsample = j.value("bank_subsample", c.bank_subsample);
    c.write_maps = j.value("write_maps", c.write_maps);
    c.render = j.value("render", c.render);
    c.render_scale = j.value("render_scale", c.render_scale);
    c.render_sigma = j.value("render_sigma", c.render_sigma);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("invalid config field: ") + ex.what());
  }
  return c;
}

std::vector<PatchSet> extract_split(const DatasetManifest& manifest, Split split, const AggregationConfig& config) {
  std::vector<PatchSet> out;
  for (const auto* e : manifest.select(split)) out.push_back(extract_patch_set(*e, manifest, config));
  return out;
}

namespace {

std::map<std::string, int> labels_by_id(const DatasetManifest& manifest) {
  std::map<std::string, int> labels;
  for (const auto& e : manifest.entries) labels[e.id] = e.label;
  return labels;
}

[[noreturn]] void rethrow_in_stage(const std::string& stage, const std::exception& ex) {
  throw Error("stage '" + stage + "' failed: " + ex.what());
}

template <typename F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NoAnomalyImages&) {
    throw;
  } catch (const std::exception& ex) {
    rethrow_in_stage(stage, ex);
  }
}

}  // namespace

std::vector<ImageResult> score_split(const Discriminator& model, const DatasetManifest& manifest,
                                     const std::vector<PatchSet>& tests, const std::filesystem::path& maps_dir,
                                     const std::filesystem::path& render_dir, std::uint32_t render_scale,
                                     double render_sigma) {
  const auto labels = labels_by_id(manifest);
  std::vector<ImageResult> results;
  for (const auto& ps : tests) {
    auto [map, result] = score_image(model, ps);
    result.label = labels.at(ps.image_id);
    if (!maps_dir.empty()) write_feature_map(map.grid, maps_dir / (ps.image_id + ".wsfx"));
    if (!render_dir.empty()) {
      render_map(map, map.grid.height * render_scale, map.grid.width * render_scale, render_sigma,
                 render_dir / (ps.image_id + ".pgm"));
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<ImageResult> knn_score_split(const NormalBank& bank, const DatasetManifest& manifest,
                                         const std::vector<PatchSet>& tests, unsigned threads) {
  const auto labels = labels_by_id(manifest);
  std::vector<ImageResult> results;
  for (const auto& ps : tests) {
    auto scored = knn_score_image(bank, ps, threads);
    scored.second.label = labels.at(ps.image_id);
    results.push_back(std::move(scored.second));
  }
  return results;
}

AugmentedAnomalySet augment(const MinedAnomalySet& mined, const NormalBank& bank, bool mixing, double alpha_low,
                            double alpha_high, std::uint64_t seed) {
  if (!mixing) return without_mixing(mined);
  const std::size_t target = std::max(bank.size(), mined.size());
  return linear_mix(mined, bank, target, alpha_low, alpha_high, seed);
}

void write_train_log(const std::vector<double>& epoch_losses, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
    out << nlohmann::json{{"epoch", e}, {"loss", epoch_losses[e]}}.dump() << '\n';
  }
}

double mask_precision(const MinedAnomalySet& mined, const DatasetManifest& manifest) {
  if (mined.size() == 0) return 0.0;
  std::map<std::string, FeatureMap> masks;
  for (const auto& e : manifest.entries) {
    if (e.mask_path) masks.emplace(e.id, read_feature_map(manifest.resolve(*e.mask_path)));
  }
  std::size_t inside = 0;
  for (const auto& o : mined.origins) {
    const auto it = masks.find(o.image_id);
    if (it == masks.end()) continue;
    const FeatureMap& mask = it->second;
    if (o.h >= mask.height || o.w >= mask.width) {
      throw DimensionMismatch("mask for " + o.image_id + " is smaller than the patch grid");
    }
    if (mask.at(o.h, o.w, 0) > 0.5f) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(mined.size());
}

RunOutcome run_all(const RunConfig& config) {
  config.validate();
  const auto& out_dir = config.output_dir;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream rj(out_dir / "run.json", std::ios::trunc);
    if (!rj) throw IoError("cannot write " + (out_dir / "run.json").string());
    rj << run_config_to_json(config) << '\n';
  }

  const DatasetManifest manifest = in_stage("manifest", [&] { return read_manifest(config.manifest); });
  const auto normals = in_stage("extract", [&] { return extract_split(manifest, Split::kTrainNormal, config.aggregation); });
  const auto anomalies =
      in_stage("extract", [&] { return extract_split(manifest, Split::kTrainAnomaly, config.aggregation); });
  const auto tests = in_stage("extract", [&] { return extract_split(manifest, Split::kTest, config.aggregation); });

  const NormalBank bank = in_stage("bank", [&] {
    NormalBank b = build_bank(normals, BankOptions{config.bank_subsample, config.train.seed});
    b.save(out_dir / "bank");
    return b;
  });

  RunOutcome outcome;
  if (anomalies.empty()) {
    std::cerr << "warning: no anomaly training images (K=0); falling back to kNN scoring\n";
    outcome.knn_fallback = true;
    auto results = in_stage("score", [&] { return knn_score_split(bank, manifest, tests, config.threads); });
    write_scores(results, out_dir / "run-0" / "scores.jsonl");
    const EvalReport report = in_stage("eval", [&] { return evaluate(results); });
    outcome.report = aggregate_runs({report});
    outcome.scores.push_back(std::move(results));
    write_report(outcome.report, out_dir / "report.json", out_dir / "report.md");
    return outcome;
  }

  MinedAnomalySet mined = in_stage("mine", [&] {
    MinedAnomalySet m = mine(bank, anomalies, config.mining ? config.retention_rate : 1.0, config.threads);
    save_mined(m, out_dir / "mined");
    return m;
  });

  std::vector<EvalReport> reports;
  for (std::uint32_t i = 0; i < config.repeat; ++i) {
    const std::uint64_t seed = config.train.seed + i;
    const auto run_dir = out_dir / ("run-" + std::to_string(i));
    const AugmentedAnomalySet augmented = in_stage("mix", [&] {
      auto a = augment(mined, bank, config.mixing, config.alpha_low, config.alpha_high, seed);
      save_augmented(a, run_dir / "augmented");
      return a;
    });
    const Discriminator model = in_stage("train", [&] {
      TrainConfig tc = config.train;
      tc.seed = seed;
      TrainResult tr = train(bank.rows(), augmented.rows(), tc);
      tr.model.save(run_dir / "model.wsdm");
      write_train_log(tr.epoch_losses, run_dir / "train_log.jsonl");
      return tr.model;
    });
    auto results = in_stage("score", [&] {
      auto r = score_split(model, manifest, tests, config.write_maps ? run_dir / "maps" : std::filesystem::path{},
                           config.render ? run_dir / "renders" : std::filesystem::path{}, config.render_scale,
                           config.render_sigma);
      write_scores(r, run_dir / "scores.jsonl");
      return r;
    });
    EvalReport report = in_stage("eval", [&] { return evaluate(results); });
    write_report(report, run_dir / "report.json");
    reports.push_back(std::move(report));
    outcome.scores.push_back(std::move(results));
  }
  outcome.report = aggregate_runs(reports);
  write_report(outcome.report, out_dir / "report.json", out_dir / "report.md");
  outcome.mined = std::move(mined);
  return outcome;
}

}  // namespace wsad
