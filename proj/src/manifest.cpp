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

#include "wsad/manifest.hpp"

#include <fstream>
#include <iostream>

#include <json.hpp>

#include "wsad/errors.hpp"

namespace wsad {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrainNormal:
      return "train-normal";
    case Split::kTrainAnomaly:
      return "train-anomaly";
    case Split::kTest:
      return "test";
  }
  return "test";
}

Split parse_split(const std::string& text) {
  if (text == "train-normal") return Split::kTrainNormal;
  if (text == "train-anomaly") return Split::kTrainAnomaly;
  if (text == "test") return Split::kTest;
  throw ConfigError("unknown split '" + text + "'");
}

std::size_t DatasetManifest::normal_count() const { return select(Split::kTrainNormal).size(); }

std::size_t DatasetManifest::anomaly_count() const { return select(Split::kTrainAnomaly).size(); }

std::vector<const ManifestEntry*> DatasetManifest::select(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

void DatasetManifest::validate() const {
  for (const auto& e : entries) {
    if (e.label != 0 && e.label != 1) throw ConfigError("entry " + e.id + ": label must be 0 or 1");
    if (e.split == Split::kTrainNormal && e.label != 0) {
      throw ConfigError("entry " + e.id + ": train-normal entries must have label 0");
    }
    if (e.split == Split::kTrainAnomaly && e.label != 1) {
      throw ConfigError("entry " + e.id + ": train-anomaly entries must have label 1");
    }
  }
  const std::size_t n = normal_count();
  const std::size_t k = anomaly_count();
  if (k > 0 && k >= n) {
    std::cerr << "warning: manifest has K=" << k << " anomaly images and N=" << n
              << " normal images; weak supervision assumes K < N\n";
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.split = parse_split(j.at("split").get<std::string>());
      e.label = j.at("label").get<int>();
      e.feature_path = j.value("feature_path", std::string());
      if (j.contains("mask_path") && !j["mask_path"].is_null()) e.mask_path = j["mask_path"].get<std::string>();
      if (j.contains("layer_paths")) e.layer_paths = j["layer_paths"].get<std::vector<std::string>>();
      e.aggregated = j.value("aggregated", false);
      if (e.feature_path.empty() && e.layer_paths.empty()) {
        throw ConfigError("entry has neither feature_path nor layer_paths");
      }
      manifest.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    } catch (const ConfigError& ex) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  manifest.validate();
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest " + path.string() + " for writing");
  for (const auto& e : manifest.entries) {
    nlohmann::json j;
    j["id"] = e.id;
    j["split"] = to_string(e.split);
    j["label"] = e.label;
    j["feature_path"] = e.feature_path;
    j["mask_path"] = e.mask_path ? nlohmann::json(*e.mask_path) : nlohmann::json(nullptr);
    if (!e.layer_paths.empty()) j["layer_paths"] = e.layer_paths;
    if (e.aggregated) j["aggregated"] = true;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace wsad
