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

#ifndef WSAD_SYNTH_HPP_
#define WSAD_SYNTH_HPP_

#include <cstdint>
#include <filesystem>

#include "wsad/manifest.hpp"

namespace wsad {

// Desk-scale stand-in for a CXR feature dataset. Every patch of every image
// is base + N(0, noise_sigma^2 I); anomaly images additionally shift a
// blob_height x blob_width rectangle of patches by shift_magnitude along a
// fixed unit direction.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::uint32_t n_normal_train = 100;
  std::uint32_t n_anomaly_train = 8;
  std::uint32_t n_normal_test = 50;
  std::uint32_t n_anomaly_test = 50;
  std::uint32_t height = 16;
  std::uint32_t width = 16;
  std::uint32_t channels = 32;
  std::uint32_t blob_height = 5;
  std::uint32_t blob_width = 5;
  double shift_magnitude = 3.0;
  double noise_sigma = 0.5;

  void validate() const;
};

// Writes features/<id>.wsfx, masks/<id>.wsfx (height x width x 1, 0/1) for
// anomaly images, and manifest.jsonl under `root`. Byte-identical output for
// equal configs.
DatasetManifest generate_synthetic(const SynthConfig& config, const std::filesystem::path& root);

}  // namespace wsad

#endif  // WSAD_SYNTH_HPP_
