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

#ifndef WSAD_MANIFEST_HPP_
#define WSAD_MANIFEST_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wsad {

enum class Split { kTrainNormal, kTrainAnomaly, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::string id;
  Split split = Split::kTest;
  int label = 0;
  // Relative to the manifest root.
  std::string feature_path;
  std::optional<std::string> mask_path;
  // Optional multi-layer input; when non-empty, layer j is layer_paths[j]
  // and feature_path is ignored by the pipeline.
  std::vector<std::string> layer_paths;
  // Feature file already holds aligned, aggregated patch features.
  bool aggregated = false;

  bool operator==(const ManifestEntry&) const = default;
};

// JSON-lines index of a dataset. Paths inside entries are resolved against
// `root` (the manifest's directory unless set otherwise).
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;

  std::size_t normal_count() const;   // N
  std::size_t anomaly_count() const;  // K
  std::vector<const ManifestEntry*> select(Split split) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }

  // Enforces label/split consistency; warns on stderr when K >= N.
  void validate() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace wsad

#endif  // WSAD_MANIFEST_HPP_
