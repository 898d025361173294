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

// Dataset ingestion, labeled/unlabeled pool bookkeeping and the simulated
// oracle.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ausds/error.hpp"
#include "ausds/formats.hpp"
#include "ausds/log.hpp"
#include "ausds/random.hpp"
#include "ausds/store.hpp"

namespace ausds {

// Read-only view of one sample. `gold` is meant for the oracle and the
// evaluation code only; strategies never look at it.
struct SampleRecord {
  SampleId id = 0;
  TaskKind task = TaskKind::classification;
  const EmbeddingStore* store = nullptr;
  const Label* gold = nullptr;

  std::size_t length() const { return store->length(id); }
  std::span<const float> token(std::size_t t) const { return store->token(id, t); }
};

struct Split {
  std::shared_ptr<const EmbeddingStore> store;
  std::vector<Label> gold;

  std::size_t size() const { return gold.size(); }
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::classification;
  std::uint32_t num_labels = 0;
  Split train;
  std::optional<Split> test;

  std::size_t size() const { return train.size(); }
  std::size_t dim() const { return train.store->dim(); }

  SampleRecord record(SampleId id) const {
    train.store->check(id);
    return {id, task, train.store.get(), &train.gold[id]};
  }
};

namespace detail {

inline void validate_split(const Split& s, TaskKind task, std::uint32_t num_labels, const std::string& what) {
  if (!s.store) throw FormatError(what + ": missing embeddings");
  if (s.store->size() != s.gold.size()) {
    throw FormatError(what + ": " + std::to_string(s.store->size()) + " vectors but " + std::to_string(s.gold.size()) +
                      " labels");
  }
  for (std::size_t i = 0; i < s.gold.size(); ++i) {
    const auto& g = s.gold[i];
    const std::size_t expected = task == TaskKind::classification ? 1 : s.store->length(static_cast<SampleId>(i));
    if (g.size() != expected) {
      throw FormatError(what + ": sample " + std::to_string(i) + " has " + std::to_string(g.size()) +
                        " labels, expected " + std::to_string(expected));
    }
    for (auto l : g) {
      if (l < 0 || static_cast<std::uint32_t>(l) >= num_labels) {
        throw FormatError(what + ": sample " + std::to_string(i) + " label " + std::to_string(l) + " out of range");
      }
    }
  }
}

inline Split load_split(const DatasetManifest& m, const SplitFiles& f, const std::string& what) {
  Split s;
  if (m.task == TaskKind::classification) {
    if (f.embeddings.empty()) throw FormatError(what + ": classification manifest needs 'embeddings'");
    auto e = read_embeddings(f.embeddings);
    if (e.count != f.count || e.dim != m.dim) {
      throw FormatError(what + ": embedding header (count " + std::to_string(e.count) + ", dim " +
                        std::to_string(e.dim) + ") disagrees with manifest");
    }
    s.store = std::make_shared<const EmbeddingStore>(EmbeddingStore::from_dense(std::move(e)));
  } else {
    if (f.tokens.empty()) throw FormatError(what + ": labeling manifest needs 'tokens'");
    auto t = read_tokens(f.tokens);
    if (t.count != f.count || t.dim != m.dim) throw FormatError(what + ": token header disagrees with manifest");
    s.store = std::make_shared<const EmbeddingStore>(EmbeddingStore::from_tokens(std::move(t)));
  }
  s.gold = read_labels(f.labels);
  validate_split(s, m.task, m.num_labels, what);
  return s;
}

}  // namespace detail

inline Dataset read_dataset(const DatasetManifest& m) {
  if (m.num_labels < 2) throw FormatError("manifest num_labels must be >= 2");
  Dataset d;
  d.name = m.name;
  d.task = m.task;
  d.num_labels = m.num_labels;
  d.train = detail::load_split(m, m.train, m.name + "/train");
  if (m.test) d.test = detail::load_split(m, *m.test, m.name + "/test");
  return d;
}

// Set of ids with O(1) insert, erase, membership and uniform random access.
class IndexedIdSet {
 public:
  explicit IndexedIdSet(std::size_t universe = 0) : pos_(universe, kAbsent) {}

  bool contains(SampleId id) const { return id < pos_.size() && pos_[id] != kAbsent; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  SampleId at(std::size_t i) const { return items_[i]; }
  std::span<const SampleId> items() const { return items_; }

  void insert(SampleId id) {
    if (id >= pos_.size()) pos_.resize(id + 1, kAbsent);
    if (pos_[id] != kAbsent) return;
    pos_[id] = items_.size();
    items_.push_back(id);
  }

  bool erase(SampleId id) {
    if (!contains(id)) return false;
    const auto p = pos_[id];
    const auto last = items_.back();
    items_[p] = last;
    pos_[last] = p;
    items_.pop_back();
    pos_[id] = kAbsent;
    return true;
  }

  std::vector<SampleId> sorted() const {
    std::vector<SampleId> v(items_.begin(), items_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<SampleId> items_;
  std::vector<std::size_t> pos_;
};

struct LabeledSample {
  SampleId id = 0;
  Label label;

  bool operator==(const LabeledSample&) const = default;
};

// D_i (labeled, in labeling order) and T_i (unlabeled).
class PoolState {
 public:
  PoolState() = default;
  explicit PoolState(std::size_t total) : total_(total), unlabeled_(total), is_labeled_(total, 0) {
    for (std::size_t i = 0; i < total; ++i) unlabeled_.insert(static_cast<SampleId>(i));
  }

  std::size_t total() const { return total_; }
  std::size_t step() const { return step_; }
  void set_step(std::size_t s) { step_ = s; }

  std::span<const LabeledSample> labeled() const { return labeled_; }
  const IndexedIdSet& unlabeled() const { return unlabeled_; }

  bool is_labeled(SampleId id) const { return id < is_labeled_.size() && is_labeled_[id]; }
  bool is_unlabeled(SampleId id) const { return unlabeled_.contains(id); }

  // Moves one id from T to D. Callers go through commit_selection, which
  // validates the whole selection first.
  void move_to_labeled(SampleId id, Label label) {
    if (!unlabeled_.erase(id)) throw InvariantError("id " + std::to_string(id) + " is not unlabeled");
    is_labeled_[id] = 1;
    labeled_.push_back({id, std::move(label)});
  }

  // Disjointness and conservation; returns a description of the first
  // violation, or an empty string.
  std::string check_invariants() const {
    if (labeled_.size() + unlabeled_.size() != total_) return "pool conservation violated";
    for (const auto& s : labeled_) {
      if (unlabeled_.contains(s.id)) return "id " + std::to_string(s.id) + " both labeled and unlabeled";
    }
    return {};
  }

 private:
  std::size_t total_ = 0;
  std::size_t step_ = 0;
  std::vector<LabeledSample> labeled_;
  IndexedIdSet unlabeled_;
  std::vector<std::uint8_t> is_labeled_;
};

// Label source backed by gold labels; counts every query.
class Oracle {
 public:
  explicit Oracle(const Dataset& d) : dataset_(&d) {}

  Label label(SampleId id) {
    if (id >= dataset_->size()) throw LookupError("oracle: unknown id " + std::to_string(id));
    ++queries_;
    return dataset_->train.gold[id];
  }

  std::size_t queries() const { return queries_; }

 private:
  const Dataset* dataset_;
  std::size_t queries_ = 0;
};

inline constexpr double kDefaultSeedFraction = 0.001;

// Draws D_0 uniformly at random; everything else becomes T_0. D_0 labels come
// straight from the dataset and are not charged to the oracle.
inline PoolState make_initial_pool(const Dataset& d, std::uint64_t seed, double seed_fraction = kDefaultSeedFraction) {
  if (!(seed_fraction > 0.0 && seed_fraction < 1.0)) throw ConfigError("seed fraction must be in (0, 1)");
  const auto n = d.size();
  const auto seed_count = static_cast<std::size_t>(std::llround(seed_fraction * static_cast<double>(n)));
  if (seed_count < 2) {
    throw ConfigError("seed fraction " + std::to_string(seed_fraction) + " of " + std::to_string(n) +
                      " samples yields " + std::to_string(seed_count) + " (< 2) seed samples");
  }
  if (d.task == TaskKind::classification) {
    std::set<std::int32_t> present;
    for (const auto& g : d.train.gold) present.insert(g[0]);
    if (seed_count < present.size()) {
      throw ConfigError("seed set of " + std::to_string(seed_count) + " cannot cover the " +
                        std::to_string(present.size()) + " classes present");
    }
  }
  PoolState pool(n);
  auto rng = make_rng(seed, stream::seed_set);
  for (auto idx : sample_indices(n, seed_count, rng)) {
    const auto id = static_cast<SampleId>(idx);
    pool.move_to_labeled(id, d.train.gold[id]);
  }
  return pool;
}

struct LoadedDataset {
  Dataset dataset;
  PoolState pool;
};

inline LoadedDataset load_dataset(const DatasetManifest& manifest, std::uint64_t seed,
                                  double seed_fraction = kDefaultSeedFraction) {
  LoadedDataset out{read_dataset(manifest), {}};
  out.pool = make_initial_pool(out.dataset, seed, seed_fraction);
  return out;
}

// Labels `ids` through the oracle and moves them from T to D. Validation runs
// before any mutation, so a rejected selection leaves the pool untouched.
inline std::vector<LabeledSample> commit_selection(PoolState& pool, std::span<const SampleId> ids, Oracle& oracle) {
  std::unordered_set<SampleId> seen;
  for (auto id : ids) {
    if (id >= pool.total()) throw LookupError("commit: unknown id " + std::to_string(id));
    if (pool.is_labeled(id)) throw InvariantError("commit: id " + std::to_string(id) + " is already labeled");
    if (!seen.insert(id).second) throw InvariantError("commit: id " + std::to_string(id) + " selected twice");
  }
  std::vector<LabeledSample> q;
  q.reserve(ids.size());
  for (auto id : ids) {
    auto label = oracle.label(id);
    pool.move_to_labeled(id, label);
    q.push_back({id, std::move(label)});
  }
  return q;
}

}  // namespace ausds
