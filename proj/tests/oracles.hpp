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

#ifndef WSAD_TESTS_ORACLES_HPP_
#define WSAD_TESTS_ORACLES_HPP_

// Independent reference computations used by unit and acceptance tests.
// None of these call the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "wsad/discriminator.hpp"
#include "wsad/inference.hpp"

namespace wsad::oracle {

// Sequential kNN scan with direct differences.
inline double nearest_distance(std::span<const float> rows, std::size_t cols, std::span<const float> q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size() / cols; ++i) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(rows[i * cols + c]) - static_cast<double>(q[c]);
      d2 += d * d;
    }
    best = std::min(best, d2);
  }
  return std::sqrt(best);
}

// Stable full sort by score descending, truncated to k.
inline std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
  idx.resize(k);
  return idx;
}

// MLP forward written out independently of the library.
inline double mlp(const MlpParameters& p, std::size_t in, std::span<const float> m) {
  const std::size_t hidden = p.b1.size();
  double out = p.b2;
  for (std::size_t k = 0; k < hidden; ++k) {
    double z = p.b1[k];
    for (std::size_t c = 0; c < in; ++c) z += p.w1[k * in + c] * static_cast<double>(m[c]);
    out += p.w2[k] * (z > 0 ? z : 0.1 * z);
  }
  return out;
}

// Normalized double sum over all (normal, anomaly) pairs.
inline double loss_double_sum(const MlpParameters& p, std::size_t in, RowsView normals, RowsView anomalies) {
  double total = 0.0;
  for (std::size_t i = 0; i < normals.rows(); ++i) {
    const double dn = mlp(p, in, normals.row(i));
    for (std::size_t j = 0; j < anomalies.rows(); ++j) {
      const double da = mlp(p, in, anomalies.row(j));
      total += std::max(0.0, dn) + std::max(0.0, 1.0 - da);
    }
  }
  return total / (static_cast<double>(normals.rows()) * static_cast<double>(anomalies.rows()));
}

// Decomposed loss via the oracle MLP (used for finite differences).
inline double loss_mean_form(const MlpParameters& p, std::size_t in, RowsView normals, RowsView anomalies) {
  double n = 0.0, a = 0.0;
  for (std::size_t i = 0; i < normals.rows(); ++i) n += std::max(0.0, mlp(p, in, normals.row(i)));
  for (std::size_t j = 0; j < anomalies.rows(); ++j) a += std::max(0.0, 1.0 - mlp(p, in, anomalies.row(j)));
  return n / static_cast<double>(normals.rows()) + a / static_cast<double>(anomalies.rows());
}

// Smallest distance of any sample to a kink: hidden pre-activation 0,
// D(normal) = 0, or D(anomaly) = 1.
inline double kink_distance(const MlpParameters& p, std::size_t in, RowsView normals, RowsView anomalies) {
  double nearest = std::numeric_limits<double>::infinity();
  auto visit = [&](RowsView rows, double hinge_at) {
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      const auto m = rows.row(i);
      for (std::size_t k = 0; k < p.b1.size(); ++k) {
        double z = p.b1[k];
        for (std::size_t c = 0; c < in; ++c) z += p.w1[k * in + c] * static_cast<double>(m[c]);
        nearest = std::min(nearest, std::abs(z));
      }
      nearest = std::min(nearest, std::abs(mlp(p, in, m) - hinge_at));
    }
  };
  visit(normals, 0.0);
  visit(anomalies, 1.0);
  return nearest;
}

// Central differences of loss_mean_form over every parameter.
inline std::vector<double> finite_difference_gradient(const MlpParameters& p, std::size_t in, RowsView normals,
                                                      RowsView anomalies, double h = 1e-5) {
  std::vector<double> flat = p.flatten();
  std::vector<double> grad(flat.size());
  MlpParameters probe = p;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + h;
    probe.assign(flat);
    const double up = loss_mean_form(probe, in, normals, anomalies);
    flat[i] = saved - h;
    probe.assign(flat);
    const double down = loss_mean_form(probe, in, normals, anomalies);
    flat[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_vector_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

// Pairwise AUROC: wins + half ties over all (positive, negative) pairs.
inline double pairwise_auroc(const std::vector<ImageResult>& results) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (const auto& pos : results) {
    if (*pos.label != 1) continue;
    for (const auto& neg : results) {
      if (*neg.label != 0) continue;
      ++pairs;
      if (pos.score > neg.score) {
        wins += 1.0;
      } else if (pos.score == neg.score) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace wsad::oracle

#endif  // WSAD_TESTS_ORACLES_HPP_
