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

// The bijection between unlabeled sample ids and their latent points at one
// encoder version, plus exact KNN retrieval from latent space back to ids.

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ausds/encoder.hpp"
#include "ausds/error.hpp"
#include "ausds/exact_index.hpp"
#include "ausds/log.hpp"
#include "ausds/timer.hpp"

namespace ausds {

class LatentMapper {
 public:
  LatentMapper() = default;

  // Encodes every id at the stack's current version.
  static LatentMapper build(const EncoderStack& stack, std::span<const SampleId> ids,
                            IndexKind kind = IndexKind::ball_tree) {
    Stopwatch sw;
    LatentMapper m;
    m.version_ = stack.version();
    const std::size_t d = stack.dim();
    std::vector<float> vectors(ids.size() * d);
    Vector tmp(d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      stack.encode_into(ids[i], tmp);
      for (std::size_t c = 0; c < d; ++c) vectors[i * d + c] = static_cast<float>(tmp[c]);
    }
    m.inverse_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      m.inverse_[key_of(std::span<const float>(vectors.data() + i * d, d))].push_back(ids[i]);
    }
    m.index_ = ExactIndex(std::vector<SampleId>(ids.begin(), ids.end()), std::move(vectors), d, kind);
    m.build_us_ = sw.elapsed_us();
    return m;
  }

  std::size_t size() const { return index_.size(); }
  std::uint64_t encoder_version() const { return version_; }
  std::int64_t build_us() const { return build_us_; }
  IndexKind index_kind() const { return index_.kind(); }
  bool is_stale(const EncoderStack& stack) const { return version_ != stack.version(); }
  bool contains(SampleId id) const { return index_.contains(id); }
  std::vector<SampleId> ids() const { return index_.ids(); }

  // M(s): the indexed latent of an id.
  std::span<const float> forward(SampleId id) const { return index_.vector_of(id); }

  // M^-1(x): the id whose indexed latent has exactly these float32 bits.
  // When several indexed samples share a vector the smallest id wins.
  std::optional<SampleId> inverse(std::span<const float> x) const {
    auto it = inverse_.find(key_of(x));
    if (it == inverse_.end()) return std::nullopt;
    std::optional<SampleId> best;
    for (auto id : it->second) {
      if (!index_.contains(id)) continue;
      const auto v = index_.vector_of(id);
      if (!std::equal(v.begin(), v.end(), x.begin(), x.end(),
                      [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); })) {
        continue;
      }
      if (!best || id < *best) best = id;
    }
    return best;
  }

  // Removes ids; absent ids are skipped with a warning. Returns the number
  // actually removed.
  std::size_t remove(std::span<const SampleId> ids) {
    std::size_t removed = 0;
    for (auto id : ids) {
      if (index_.remove(id)) {
        ++removed;
      } else {
        log_warn("mapper: remove of absent id ", id, " ignored");
      }
    }
    return removed;
  }

  void require_fresh(std::uint64_t current_version) const {
    if (current_version != version_) {
      throw StalenessError("mapper built at encoder version " + std::to_string(version_) +
                           " queried at version " + std::to_string(current_version));
    }
  }

  // k nearest indexed ids per query point, ordered by (distance, id).
  std::vector<std::vector<Neighbor>> query(std::span<const Vector> points, std::size_t k,
                                           std::uint64_t current_version,
                                           std::size_t* distance_evals = nullptr) const {
    require_fresh(current_version);
    if (k < 1) throw ConfigError("k must be >= 1");
    std::vector<std::vector<Neighbor>> out;
    out.reserve(points.size());
    for (const auto& p : points) {
      if (index_.size() == 0) {
        out.emplace_back();
        continue;
      }
      out.push_back(index_.search(p, k, distance_evals));
    }
    return out;
  }

 private:
  static std::uint64_t key_of(std::span<const float> x) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float f : x) {
      h ^= std::bit_cast<std::uint32_t>(f);
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
    return h;
  }

  std::uint64_t version_ = 0;
  std::int64_t build_us_ = 0;
  ExactIndex index_;
  std::unordered_map<std::uint64_t, std::vector<SampleId>> inverse_;
};

}  // namespace ausds
