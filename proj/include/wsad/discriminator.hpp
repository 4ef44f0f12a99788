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

#ifndef WSAD_DISCRIMINATOR_HPP_
#define WSAD_DISCRIMINATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "wsad/feature_map.hpp"

namespace wsad {

inline constexpr double kLeakySlope = 0.1;

// Parameter (or gradient) tensors of the one-hidden-layer MLP.
struct MlpParameters {
  std::vector<double> w1;  // hidden x input, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  std::size_t count() const { return w1.size() + b1.size() + w2.size() + 1; }
  // Flat view in the order w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  bool operator==(const MlpParameters&) const = default;
};

// D(m) = w2 . lrelu(W1 m + b1) + b2, larger means more anomalous.
class Discriminator {
 public:
  Discriminator() = default;
  // Zero-initialized.
  Discriminator(std::size_t input_dim, std::size_t hidden_dim);

  // Parameters ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] from `seed`.
  static Discriminator initialized(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  const MlpParameters& parameters() const { return params_; }
  MlpParameters& parameters() { return params_; }

  double forward(std::span<const float> m) const;

  void save(const std::filesystem::path& path) const;
  static Discriminator load(const std::filesystem::path& path);

  bool operator==(const Discriminator&) const = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  MlpParameters params_;
};

// mean_n max(0, D(n)) + mean_a max(0, 1 - D(a)); equal to the normalized
// double sum over all (normal, anomaly) pairs.
double hinge_loss(const Discriminator& d, RowsView normals, RowsView anomalies);

struct LossAndGradients {
  double loss = 0.0;
  MlpParameters grad;
};

// Exact subgradients: 0 at a hinge kink, slope 0.1 at a lrelu input of 0.
// `threads` > 1 shards each sample set into fixed contiguous pieces and sums
// the partial gradients in shard order.
LossAndGradients loss_and_gradients(const Discriminator& d, RowsView normals, RowsView anomalies,
                                    unsigned threads = 1);
inline MlpParameters gradients(const Discriminator& d, RowsView normals, RowsView anomalies) {
  return loss_and_gradients(d, normals, anomalies).grad;
}

struct TrainConfig {
  std::uint32_t epochs = 40;
  // Half normal, half anomaly.
  std::uint32_t batch_size = 4096;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  // 0 selects hidden = input dim.
  std::size_t hidden_dim = 0;
  unsigned threads = 1;

  void validate() const;
};

struct TrainResult {
  Discriminator model;
  std::vector<double> epoch_losses;
};

// Adam on shuffled balanced batches. An epoch walks the larger sample set
// once; the smaller one is cycled. Deterministic given seed and threads.
TrainResult train(RowsView normals, RowsView anomalies, const TrainConfig& config,
                  const std::function<void(std::uint32_t epoch, double loss)>& on_epoch = {});

}  // namespace wsad

#endif  // WSAD_DISCRIMINATOR_HPP_
