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

// Synthetic corpora with analytically known boundaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ausds/dataset.hpp"
#include "ausds/error.hpp"
#include "ausds/formats.hpp"
#include "ausds/linalg.hpp"
#include "ausds/random.hpp"

namespace ausds {

enum class SyntheticKind { gaussian_blobs, ring_vs_disk };

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "gaussian_blobs" || s == "blobs") return SyntheticKind::gaussian_blobs;
  if (s == "ring_vs_disk") return SyntheticKind::ring_vs_disk;
  throw ConfigError("unknown synthetic kind '" + s + "'");
}

inline std::string to_string(SyntheticKind k) {
  return k == SyntheticKind::gaussian_blobs ? "gaussian_blobs" : "ring_vs_disk";
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_blobs;
  std::size_t dim = 16;
  std::size_t classes = 3;
  std::size_t per_class = 10000;
  std::size_t test_per_class = 0;
  double spread = 1.0;
  double separation = 2.0;     // std of the class-mean distribution (blobs)
  double boundary_noise = 0.0;  // fraction of samples placed between classes
  std::size_t intrinsic_dim = 0;  // 0 = dim; otherwise data lies on a random r-dim subspace
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  std::size_t rank() const { return intrinsic_dim == 0 ? dim : intrinsic_dim; }

  void validate() const {
    if (dim < 2) throw ConfigError("synthetic dim must be >= 2");
    if (classes < 2) throw ConfigError("synthetic classes must be >= 2");
    if (per_class < 1) throw ConfigError("synthetic per_class must be >= 1");
    if (!(spread > 0.0)) throw ConfigError("synthetic spread must be > 0");
    if (!(separation > 0.0)) throw ConfigError("synthetic separation must be > 0");
    if (!(boundary_noise >= 0.0 && boundary_noise <= 1.0)) throw ConfigError("boundary_noise must be in [0, 1]");
    if (intrinsic_dim > dim) throw ConfigError("intrinsic_dim must be <= dim");
    if (kind == SyntheticKind::ring_vs_disk && rank() < 2) throw ConfigError("ring_vs_disk needs rank >= 2");
  }
};

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"kind", to_string(s.kind)},   {"dim", s.dim},
          {"classes", s.classes},        {"per_class", s.per_class},
          {"test_per_class", s.test_per_class}, {"spread", s.spread},
          {"separation", s.separation},   {"boundary_noise", s.boundary_noise},
          {"intrinsic_dim", s.intrinsic_dim}, {"seed", s.seed},
          {"name", s.name}};
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  if (j.contains("kind")) s.kind = parse_synthetic_kind(j.at("kind").get<std::string>());
  s.dim = j.value("dim", s.dim);
  s.classes = j.value("classes", s.classes);
  s.per_class = j.value("per_class", s.per_class);
  s.test_per_class = j.value("test_per_class", s.test_per_class);
  s.spread = j.value("spread", s.spread);
  s.separation = j.value("separation", s.separation);
  s.boundary_noise = j.value("boundary_noise", s.boundary_noise);
  s.intrinsic_dim = j.value("intrinsic_dim", s.intrinsic_dim);
  s.seed = j.value("seed", s.seed);
  s.name = j.value("name", s.name);
  s.validate();
  return s;
}

// Generator geometry, shared by the train and test splits: class centers
// (blobs) in the r-dim coordinate space and a d x r orthonormal embedding.
struct SyntheticGeometry {
  std::size_t rank = 0;
  std::vector<Vector> centers;
  Matrix basis;  // d x r, orthonormal columns

  // Analytic label of a point given in subspace coordinates.
  std::int32_t analytic_label(const SyntheticSpec& spec, std::span<const double> z) const {
    if (spec.kind == SyntheticKind::gaussian_blobs) {
      std::int32_t best = 0;
      double best_d = squared_distance(z, centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = squared_distance(z, centers[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::int32_t>(c);
        }
      }
      return best;
    }
    const double r = std::sqrt(dot(z, z));
    const auto band = static_cast<std::int64_t>(std::floor(r / spec.separation));
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(band, 0, static_cast<std::int64_t>(spec.classes) - 1));
  }
};

inline SyntheticGeometry make_geometry(const SyntheticSpec& spec, Rng& rng) {
  SyntheticGeometry g;
  g.rank = spec.rank();
  std::normal_distribution<double> normal(0.0, 1.0);
  if (spec.kind == SyntheticKind::gaussian_blobs) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      Vector m(g.rank);
      for (auto& v : m) v = spec.separation * normal(rng);
      g.centers.push_back(std::move(m));
    }
  }
  // Gram-Schmidt on a random d x r Gaussian matrix
  g.basis = Matrix(spec.dim, g.rank);
  if (g.rank == spec.dim) {
    g.basis = Matrix::identity(spec.dim);
  } else {
    std::vector<Vector> cols;
    while (cols.size() < g.rank) {
      Vector v(spec.dim);
      for (auto& x : v) x = normal(rng);
      for (const auto& u : cols) axpy(-dot(v, u), u, v);
      const double n = norm2(v);
      if (n < 1e-8) continue;
      for (auto& x : v) x /= n;
      cols.push_back(std::move(v));
    }
    for (std::size_t c = 0; c < g.rank; ++c) {
      for (std::size_t r = 0; r < spec.dim; ++r) g.basis(r, c) = cols[c][r];
    }
  }
  return g;
}

struct SyntheticSplit {
  EmbeddingMatrix embeddings;
  std::vector<Label> labels;
};

struct SyntheticData {
  SyntheticSpec spec;
  SyntheticGeometry geometry;
  SyntheticSplit train;
  std::optional<SyntheticSplit> test;
};

namespace detail {

inline Vector random_direction(std::size_t r, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(r);
  double n = 0.0;
  while (n < 1e-12) {
    for (auto& x : v) x = normal(rng);
    n = norm2(v);
  }
  for (auto& x : v) x /= n;
  return v;
}

// One point in subspace coordinates plus its label.
inline std::pair<Vector, std::int32_t> draw_point(const SyntheticSpec& spec, const SyntheticGeometry& g,
                                                  std::size_t cls, bool boundary, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t r = g.rank;
  Vector z(r);
  if (spec.kind == SyntheticKind::gaussian_blobs) {
    if (!boundary) {
      for (std::size_t i = 0; i < r; ++i) z[i] = g.centers[cls][i] + spec.spread * normal(rng);
      return {z, static_cast<std::int32_t>(cls)};
    }
    auto other = uniform_index(spec.classes - 1, rng);
    if (other >= cls) ++other;
    const double t = 0.35 + 0.3 * unit(rng);
    for (std::size_t i = 0; i < r; ++i) {
      z[i] = (1.0 - t) * g.centers[cls][i] + t * g.centers[other][i] + 0.25 * spec.spread * normal(rng);
    }
    return {z, g.analytic_label(spec, z)};
  }
  // ring_vs_disk: class k occupies the radial band [k, k+1) * separation
  double radius;
  if (!boundary) {
    radius = (static_cast<double>(cls) + 0.5) * spec.separation + 0.25 * spec.spread * normal(rng);
    radius = std::abs(radius);
  } else {
    const double edge = static_cast<double>(cls + 1 < spec.classes ? cls + 1 : cls) * spec.separation;
    radius = std::abs(edge + 0.1 * spec.separation * (2.0 * unit(rng) - 1.0));
  }
  const auto dir = random_direction(r, rng);
  for (std::size_t i = 0; i < r; ++i) z[i] = radius * dir[i];
  return {z, boundary ? g.analytic_label(spec, z) : static_cast<std::int32_t>(cls)};
}

inline SyntheticSplit draw_split(const SyntheticSpec& spec, const SyntheticGeometry& g, std::size_t per_class,
                                 Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = per_class * spec.classes;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i % spec.classes;
  std::shuffle(order.begin(), order.end(), rng);

  SyntheticSplit s;
  s.embeddings.count = n;
  s.embeddings.dim = static_cast<std::uint32_t>(spec.dim);
  s.embeddings.values.resize(n * spec.dim);
  s.labels.reserve(n);
  Vector x(spec.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const bool boundary = spec.boundary_noise > 0.0 && unit(rng) < spec.boundary_noise;
    auto [z, label] = draw_point(spec, g, order[i], boundary, rng);
    for (std::size_t row = 0; row < spec.dim; ++row) {
      double acc = 0.0;
      for (std::size_t c = 0; c < g.rank; ++c) acc += g.basis(row, c) * z[c];
      x[row] = acc;
    }
    for (std::size_t row = 0; row < spec.dim; ++row) s.embeddings.values[i * spec.dim + row] = static_cast<float>(x[row]);
    s.labels.push_back({label});
  }
  return s;
}

inline Split to_split(const SyntheticSplit& s) {
  return {std::make_shared<const EmbeddingStore>(EmbeddingStore::from_dense(s.embeddings)), s.labels};
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, stream::synthetic);
  SyntheticData d;
  d.spec = spec;
  d.geometry = make_geometry(spec, rng);
  d.train = detail::draw_split(spec, d.geometry, spec.per_class, rng);
  if (spec.test_per_class > 0) d.test = detail::draw_split(spec, d.geometry, spec.test_per_class, rng);
  return d;
}

// In-memory dataset, identical to what write_synthetic + read_dataset yields.
inline Dataset to_dataset(const SyntheticData& s) {
  Dataset d;
  d.name = s.spec.name;
  d.task = TaskKind::classification;
  d.num_labels = static_cast<std::uint32_t>(s.spec.classes);
  d.train = detail::to_split(s.train);
  if (s.test) d.test = detail::to_split(*s.test);
  return d;
}

// Writes train (and test) AEMB + labels and a manifest into `dir`; returns the
// manifest path.
inline std::filesystem::path write_synthetic(const SyntheticData& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  DatasetManifest m;
  m.name = s.spec.name;
  m.task = TaskKind::classification;
  m.num_labels = static_cast<std::uint32_t>(s.spec.classes);
  m.dim = static_cast<std::uint32_t>(s.spec.dim);
  m.train = {dir / "train.aemb", {}, dir / "train.labels.tsv", s.train.embeddings.count};
  write_embeddings(m.train.embeddings, s.train.embeddings);
  write_labels(m.train.labels, s.train.labels);
  if (s.test) {
    m.test = SplitFiles{dir / "test.aemb", {}, dir / "test.labels.tsv", s.test->embeddings.count};
    write_embeddings(m.test->embeddings, s.test->embeddings);
    write_labels(m.test->labels, s.test->labels);
  }
  m.extra = {{"generator", to_json(s.spec)}};
  const auto path = dir / "manifest.json";
  write_manifest(path, m);
  return path;
}

}  // namespace ausds
