// Copyright 2026 The AUSDS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "ausds.hpp"

namespace ausds_test {

inline ausds::Dataset dense_dataset(const std::vector<std::vector<float>>& rows, const std::vector<int>& labels,
                                    std::uint32_t num_labels) {
  ausds::EmbeddingMatrix m;
  m.count = rows.size();
  m.dim = static_cast<std::uint32_t>(rows.empty() ? 0 : rows[0].size());
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  ausds::Dataset d;
  d.name = "toy";
  d.num_labels = num_labels;
  d.train.store = std::make_shared<const ausds::EmbeddingStore>(ausds::EmbeddingStore::from_dense(std::move(m)));
  for (int l : labels) d.train.gold.push_back({l});
  return d;
}

inline ausds::Dataset random_dataset(std::size_t n, std::size_t dim, std::uint32_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : rows[i]) v = nd(rng);
    labels[i] = static_cast<int>(i % classes);
  }
  return dense_dataset(rows, labels, classes);
}

inline ausds::Dataset blobs(std::size_t per_class, std::size_t dim, std::size_t classes, std::uint64_t seed,
                            double spread = 1.0, double noise = 0.0, std::size_t test_per_class = 0) {
  ausds::SyntheticSpec s;
  s.dim = dim;
  s.classes = classes;
  s.per_class = per_class;
  s.test_per_class = test_per_class;
  s.spread = spread;
  s.boundary_noise = noise;
  s.seed = seed;
  return ausds::to_dataset(ausds::generate_synthetic(s));
}

inline ausds::DecoderModel random_model(ausds::Architecture arch, std::size_t in, std::size_t out,
                                        std::size_t hidden, std::uint64_t seed, double bias_scale = 0.5) {
  auto m = ausds::DecoderModel::make(arch, in, out, hidden);
  auto rng = ausds::make_rng(seed, 99);
  m.init_random(rng, 1.0);
  std::uniform_real_distribution<double> u(-bias_scale, bias_scale);
  for (std::size_t layer = 0; layer < (arch == ausds::Architecture::linear ? 1u : 2u); ++layer) {
    for (auto& b : m.bias(layer)) b = u(rng);
  }
  return m;
}

// Forward pass written out from the parameter layout, independent of the
// library's implementation.
inline std::vector<double> oracle_logits(const ausds::DecoderModel& m, const std::vector<double>& x) {
  const auto& p = m.params;
  const std::size_t d = m.input_dim, c = m.output;
  std::vector<double> z(c);
  if (m.arch == ausds::Architecture::linear) {
    for (std::size_t k = 0; k < c; ++k) {
      double acc = p[c * d + k];
      for (std::size_t j = 0; j < d; ++j) acc += p[k * d + j] * x[j];
      z[k] = acc;
    }
    return z;
  }
  const std::size_t h = m.hidden;
  std::vector<double> a(h);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = p[h * d + i];
    for (std::size_t j = 0; j < d; ++j) acc += p[i * d + j] * x[j];
    a[i] = std::tanh(acc);
  }
  const std::size_t off = h * d + h;
  for (std::size_t k = 0; k < c; ++k) {
    double acc = p[off + c * h + k];
    for (std::size_t i = 0; i < h; ++i) acc += p[off + k * h + i] * a[i];
    z[k] = acc;
  }
  return z;
}

inline std::vector<double> oracle_softmax(std::vector<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) s += (v = std::exp(v - mx));
  for (auto& v : z) v /= s;
  return z;
}

inline double oracle_ce(const ausds::DecoderModel& m, const std::vector<double>& x, int y) {
  const auto z = oracle_logits(m, x);
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s) - z[y];
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace ausds_test
