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

#include "wsad/discriminator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <thread>

#include "wsad/errors.hpp"
#include "wsad/rng.hpp"

namespace wsad {
namespace {

constexpr std::uint8_t kModelMagic[4] = {'W', 'S', 'D', 'M'};
constexpr std::uint16_t kModelVersion = 1;
constexpr std::size_t kModelHeaderBytes = 16;

void check_dim(const Discriminator& d, std::size_t n) {
  if (n != d.input_dim()) {
    throw DimensionMismatch("feature has " + std::to_string(n) + " channels, discriminator expects " +
                            std::to_string(d.input_dim()));
  }
}

// Fills z with the hidden pre-activations and returns D(m).
double forward_into(const MlpParameters& p, std::size_t in, std::size_t hidden, const float* m, double* z) {
  double out = p.b2;
  for (std::size_t k = 0; k < hidden; ++k) {
    const double* row = p.w1.data() + k * in;
    double acc = p.b1[k];
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * static_cast<double>(m[c]);
    z[k] = acc;
    out += p.w2[k] * (acc > 0.0 ? acc : kLeakySlope * acc);
  }
  return out;
}

struct Partial {
  double normal_loss = 0.0;
  double anomaly_loss = 0.0;
  MlpParameters grad;
};

// Accumulates hinge losses and gradients over rows [lo, hi) of one set.
// `anomalous` selects the max(0, 1 - D) branch; `weight` is 1/|set|.
void accumulate(const Discriminator& d, RowsView rows, std::size_t lo, std::size_t hi, bool anomalous,
                double weight, Partial& part) {
  const std::size_t in = d.input_dim();
  const std::size_t hidden = d.hidden_dim();
  const MlpParameters& p = d.parameters();
  std::vector<double> z(hidden);
  for (std::size_t i = lo; i < hi; ++i) {
    const float* m = rows.values.data() + i * rows.cols;
    const double out = forward_into(p, in, hidden, m, z.data());
    double dout = 0.0;
    if (anomalous) {
      const double margin = 1.0 - out;
      if (margin > 0.0) {
        part.anomaly_loss += margin;
        dout = -weight;
      }
    } else if (out > 0.0) {
      part.normal_loss += out;
      dout = weight;
    }
    if (dout == 0.0) continue;
    part.grad.b2 += dout;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double zk = z[k];
      part.grad.w2[k] += dout * (zk > 0.0 ? zk : kLeakySlope * zk);
      const double dz = dout * p.w2[k] * (zk > 0.0 ? 1.0 : kLeakySlope);
      part.grad.b1[k] += dz;
      double* grow = part.grad.w1.data() + k * in;
      for (std::size_t c = 0; c < in; ++c) grow[c] += dz * static_cast<double>(m[c]);
    }
  }
}

MlpParameters zeros_like(const Discriminator& d) {
  MlpParameters g;
  g.w1.assign(d.input_dim() * d.hidden_dim(), 0.0);
  g.b1.assign(d.hidden_dim(), 0.0);
  g.w2.assign(d.hidden_dim(), 0.0);
  g.b2 = 0.0;
  return g;
}

void add_into(MlpParameters& acc, const MlpParameters& g) {
  for (std::size_t i = 0; i < acc.w1.size(); ++i) acc.w1[i] += g.w1[i];
  for (std::size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += g.b1[i];
  for (std::size_t i = 0; i < acc.w2.size(); ++i) acc.w2[i] += g.w2[i];
  acc.b2 += g.b2;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<double> MlpParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

void MlpParameters::assign(std::span<const double> flat) {
  if (flat.size() != count()) throw DimensionMismatch("parameter vector has the wrong length");
  auto it = flat.begin();
  std::copy_n(it, w1.size(), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy_n(it, b1.size(), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy_n(it, w2.size(), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

Discriminator::Discriminator(std::size_t input_dim, std::size_t hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("discriminator dims must be positive");
  params_.w1.assign(input_dim * hidden_dim, 0.0);
  params_.b1.assign(hidden_dim, 0.0);
  params_.w2.assign(hidden_dim, 0.0);
}

Discriminator Discriminator::initialized(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  Discriminator d(input_dim, hidden_dim);
  Rng rng(seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& v : d.params_.w1) v = rng.uniform(-bound1, bound1);
  for (auto& v : d.params_.b1) v = rng.uniform(-bound1, bound1);
  for (auto& v : d.params_.w2) v = rng.uniform(-bound2, bound2);
  d.params_.b2 = rng.uniform(-bound2, bound2);
  return d;
}

double Discriminator::forward(std::span<const float> m) const {
  check_dim(*this, m.size());
  std::vector<double> z(hidden_dim_);
  return forward_into(params_, input_dim_, hidden_dim_, m.data(), z.data());
}

double hinge_loss(const Discriminator& d, RowsView normals, RowsView anomalies) {
  if (normals.rows() == 0 || anomalies.rows() == 0) throw ConfigError("loss needs non-empty normal and anomaly batches");
  check_dim(d, normals.cols);
  check_dim(d, anomalies.cols);
  double normal_sum = 0.0;
  for (std::size_t i = 0; i < normals.rows(); ++i) normal_sum += std::max(0.0, d.forward(normals.row(i)));
  double anomaly_sum = 0.0;
  for (std::size_t i = 0; i < anomalies.rows(); ++i) anomaly_sum += std::max(0.0, 1.0 - d.forward(anomalies.row(i)));
  return normal_sum / static_cast<double>(normals.rows()) + anomaly_sum / static_cast<double>(anomalies.rows());
}

LossAndGradients loss_and_gradients(const Discriminator& d, RowsView normals, RowsView anomalies, unsigned threads) {
  if (normals.rows() == 0 || anomalies.rows() == 0) throw ConfigError("loss needs non-empty normal and anomaly batches");
  check_dim(d, normals.cols);
  check_dim(d, anomalies.cols);
  const std::size_t nn = normals.rows();
  const std::size_t na = anomalies.rows();
  const double wn = 1.0 / static_cast<double>(nn);
  const double wa = 1.0 / static_cast<double>(na);
  threads = std::max(1u, threads);

  std::vector<Partial> parts(threads);
  for (auto& part : parts) part.grad = zeros_like(d);
  auto run_shard = [&](unsigned t) {
    const std::size_t n_lo = nn * t / threads, n_hi = nn * (t + 1) / threads;
    const std::size_t a_lo = na * t / threads, a_hi = na * (t + 1) / threads;
    accumulate(d, normals, n_lo, n_hi, false, wn, parts[t]);
    accumulate(d, anomalies, a_lo, a_hi, true, wa, parts[t]);
  };
  if (threads == 1) {
    run_shard(0);
  } else {
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < threads; ++t) workers.emplace_back(run_shard, t);
    for (auto& w : workers) w.join();
  }

  LossAndGradients out;
  out.grad = zeros_like(d);
  double normal_loss = 0.0, anomaly_loss = 0.0;
  for (const auto& part : parts) {
    normal_loss += part.normal_loss;
    anomaly_loss += part.anomaly_loss;
    add_into(out.grad, part.grad);
  }
  out.loss = normal_loss * wn + anomaly_loss * wa;
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch size must be even and >= 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

TrainResult train(RowsView normals, RowsView anomalies, const TrainConfig& config,
                  const std::function<void(std::uint32_t, double)>& on_epoch) {
  config.validate();
  if (normals.rows() == 0 || anomalies.rows() == 0) throw ConfigError("training needs normal and anomaly features");
  if (normals.cols != anomalies.cols) throw DimensionMismatch("normal and anomaly features differ in width");
  const std::size_t in = normals.cols;
  const std::size_t hidden = config.hidden_dim == 0 ? in : config.hidden_dim;

  TrainResult result{Discriminator::initialized(in, hidden, config.seed), {}};
  Discriminator& model = result.model;
  const std::size_t n_params = model.parameters().count();
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
  std::uint64_t step = 0;

  const std::size_t nn = normals.rows();
  const std::size_t na = anomalies.rows();
  const std::size_t half = config.batch_size / 2;
  const std::size_t larger = std::max(nn, na);
  const std::size_t steps_per_epoch = (larger + half - 1) / half;

  std::vector<std::size_t> perm_n(nn), perm_a(na);
  std::vector<float> batch_n, batch_a;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, epoch);
    for (std::size_t i = 0; i < nn; ++i) perm_n[i] = i;
    for (std::size_t i = 0; i < na; ++i) perm_a[i] = i;
    rng.shuffle(perm_n);
    rng.shuffle(perm_a);

    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t offset = s * half;
      const std::size_t count = std::min(half, larger - offset);
      batch_n.resize(count * in);
      batch_a.resize(count * in);
      for (std::size_t j = 0; j < count; ++j) {
        const auto rn = normals.row(perm_n[(offset + j) % nn]);
        const auto ra = anomalies.row(perm_a[(offset + j) % na]);
        std::copy(rn.begin(), rn.end(), batch_n.begin() + static_cast<std::ptrdiff_t>(j * in));
        std::copy(ra.begin(), ra.end(), batch_a.begin() + static_cast<std::ptrdiff_t>(j * in));
      }
      const auto lg = loss_and_gradients(model, RowsView{batch_n, in}, RowsView{batch_a, in}, config.threads);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "training loss became non-finite at epoch " << epoch << ", step " << s
            << "; try a smaller learning rate (current " << config.learning_rate << ")";
        throw TrainingDiverged(msg.str());
      }
      loss_sum += lg.loss;

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      std::vector<double> params = model.parameters().flatten();
      const std::vector<double> grad = lg.grad.flatten();
      for (std::size_t i = 0; i < n_params; ++i) {
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * grad[i];
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        params[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.epsilon);
        if (!std::isfinite(params[i])) {
          throw TrainingDiverged("a parameter became non-finite; try a smaller learning rate");
        }
      }
      model.parameters().assign(params);
    }
    const double epoch_loss = loss_sum / static_cast<double>(steps_per_epoch);
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

void Discriminator::save(const std::filesystem::path& path) const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kModelMagic), std::end(kModelMagic));
  put_u16(out, kModelVersion);
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(input_dim_));
  put_u32(out, static_cast<std::uint32_t>(hidden_dim_));
  for (double v : params_.flatten()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
  }
  write_file_bytes(path, out);
}

Discriminator Discriminator::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string source = path.string();
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw BadMagicError(source + ": not a WSDM model file (bad magic)");
  }
  if (bytes.size() < kModelHeaderBytes) throw TruncatedError(source + ": truncated WSDM header");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelVersion) throw VersionError(source + ": unsupported WSDM version " + std::to_string(version));
  const std::uint32_t in = get_u32(bytes.data() + 8);
  const std::uint32_t hidden = get_u32(bytes.data() + 12);
  if (in == 0 || hidden == 0) throw FormatError(source + ": zero model dimension");
  Discriminator d(in, hidden);
  const std::size_t expected = d.params_.count() * 8;
  const std::size_t payload = bytes.size() - kModelHeaderBytes;
  if (payload < expected) {
    throw TruncatedError(source + ": truncated WSDM payload, expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(payload));
  }
  if (payload > expected) throw FormatError(source + ": trailing bytes after WSDM payload");
  std::vector<double> flat(d.params_.count());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[kModelHeaderBytes + i * 8 + b]) << (8 * b);
    flat[i] = std::bit_cast<double>(bits);
    if (!std::isfinite(flat[i])) throw FormatError(source + ": non-finite model parameter");
  }
  d.params_.assign(flat);
  return d;
}

}  // namespace wsad
