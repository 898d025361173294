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

// Query strategies: AUSDS (attack -> KNN -> random mix -> entropy top-k),
// full-scan uncertainty sampling, and random sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ausds/attacks.hpp"
#include "ausds/dataset.hpp"
#include "ausds/decoder.hpp"
#include "ausds/encoder.hpp"
#include "ausds/entropy.hpp"
#include "ausds/latent_mapper.hpp"
#include "ausds/log.hpp"
#include "ausds/random.hpp"
#include "ausds/timer.hpp"

namespace ausds {

enum class StrategyKind { ausds, us, rm };

enum class RankScope { mixed, adversarial_only };

inline std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::ausds:
      return "ausds";
    case StrategyKind::us:
      return "us";
    case StrategyKind::rm:
      return "rm";
  }
  return "?";
}

inline RankScope parse_rank_scope(const std::string& s) {
  if (s == "mixed") return RankScope::mixed;
  if (s == "adversarial_only") return RankScope::adversarial_only;
  throw ConfigError("unknown rank scope '" + s + "'");
}

inline std::string to_string(RankScope r) { return r == RankScope::mixed ? "mixed" : "adversarial_only"; }

struct SamplerConfig {
  StrategyKind strategy = StrategyKind::ausds;
  AttackConfig attack;
  double mix_ratio = 0.5;          // p: adversarial share of the candidate set
  std::size_t query_size = 32;     // |Q|
  double us_scan_interval = 0.02;  // labeled-fraction increment between US scans; 0 = every step
  std::size_t knn_k = 1;
  RankScope rank_scope = RankScope::mixed;
  IndexKind index = IndexKind::ball_tree;

  void validate() const {
    if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ConfigError("mix ratio p must be in [0, 1]");
    if (query_size < 1) throw ConfigError("|Q| must be >= 1");
    if (knn_k < 1) throw ConfigError("knn k must be >= 1");
    if (!(us_scan_interval >= 0.0)) throw ConfigError("US scan interval must be >= 0");
    attack.validate();
  }
};

struct CandidateScore {
  SampleId id = 0;
  double entropy = 0.0;
  std::optional<double> margin;  // classification only
  bool adversarial = false;
};

struct StageTimings {
  std::int64_t attack_us = 0;
  std::int64_t knn_us = 0;
  std::int64_t mix_us = 0;
  std::int64_t rank_us = 0;
  std::int64_t total_us = 0;
};

struct SelectionReport {
  std::vector<SampleId> chosen;             // S_add, in rank order
  std::vector<CandidateScore> chosen_scores;  // parallel to `chosen`
  std::vector<CandidateScore> candidates;   // every ranked candidate, rank order
  std::size_t n_adversarial = 0;            // |S_a|
  std::size_t n_random = 0;                 // |S_r|
  std::size_t attacks_succeeded = 0;
  std::size_t attacks_total = 0;
  std::size_t model_evals = 0;         // decoder evaluations spent on this selection
  std::size_t knn_distance_evals = 0;  // point distances evaluated by the index
  bool degraded = false;               // AUSDS fell back to random candidates
  bool full_scan = false;              // US recomputed its ranking
  StageTimings timings;
};

// Entropy (ME, or TTE for sequences) and margin of one sample at the current
// encoder version. Reuses buffers across calls.
class SampleScorer {
 public:
  SampleScorer(const DecoderModel& decoder, const EncoderStack& stack) : decoder_(decoder), stack_(stack) {}

  CandidateScore score(SampleId id, bool adversarial = false) {
    CandidateScore s;
    s.id = id;
    s.adversarial = adversarial;
    if (stack_.store().length(id) == 1) {
      latent_.resize(stack_.dim());
      stack_.encode_into(id, latent_);
      const auto probs = predict_proba(decoder_, latent_);
      s.entropy = entropy_me(probs);
      if (decoder_.output >= 2) s.margin = margin_of(probs);
    } else {
      const auto probs = predict_proba(decoder_, stack_.encode_tokens(id));
      s.entropy = entropy_tte(probs);
    }
    ++evals_;
    return s;
  }

  std::size_t evals() const { return evals_; }

 private:
  const DecoderModel& decoder_;
  const EncoderStack& stack_;
  Vector latent_;
  std::size_t evals_ = 0;
};

// Descending entropy, ties towards the smaller id.
inline void rank_by_entropy(std::vector<CandidateScore>& c) {
  std::sort(c.begin(), c.end(), [](const CandidateScore& a, const CandidateScore& b) {
    return a.entropy > b.entropy || (a.entropy == b.entropy && a.id < b.id);
  });
}

namespace detail {

inline void take_top(SelectionReport& r, std::size_t q) {
  const auto n = std::min(q, r.candidates.size());
  r.chosen_scores.assign(r.candidates.begin(), r.candidates.begin() + static_cast<std::ptrdiff_t>(n));
  r.chosen.clear();
  for (const auto& c : r.chosen_scores) r.chosen.push_back(c.id);
}

// `count` ids drawn uniformly without replacement from T_i minus `exclude`.
inline std::vector<SampleId> draw_unlabeled(const PoolState& pool, const std::unordered_set<SampleId>& exclude,
                                            std::size_t count, Rng& rng) {
  const auto& t = pool.unlabeled();
  std::size_t excluded_present = 0;
  for (auto id : exclude) excluded_present += t.contains(id) ? 1 : 0;
  const std::size_t available = t.size() - excluded_present;
  count = std::min(count, available);
  std::vector<SampleId> out;
  if (count == 0) return out;
  if (count * 2 > available) {
    // dense request: enumerate the complement and sample positions in it
    std::vector<SampleId> rest;
    rest.reserve(available);
    for (auto id : t.items()) {
      if (!exclude.count(id)) rest.push_back(id);
    }
    for (auto i : sample_indices(rest.size(), count, rng)) out.push_back(rest[i]);
    return out;
  }
  std::unordered_set<SampleId> taken;
  while (out.size() < count) {
    const auto id = t.at(uniform_index(t.size(), rng));
    if (exclude.count(id) || !taken.insert(id).second) continue;
    out.push_back(id);
  }
  return out;
}

}  // namespace detail

inline SelectionReport rm_select(const PoolState& pool, std::size_t query_size, Rng& rng) {
  Stopwatch sw;
  SelectionReport r;
  const auto& t = pool.unlabeled();
  for (auto i : sample_indices(t.size(), query_size, rng)) {
    r.chosen.push_back(t.at(i));
    r.chosen_scores.push_back({t.at(i), 0.0, std::nullopt, false});
  }
  r.n_random = r.chosen.size();
  r.timings.mix_us = r.timings.total_us = sw.elapsed_us();
  return r;
}

// Entropy of every unlabeled sample at the current encoder version, ranked.
inline std::vector<CandidateScore> us_rank(const DecoderModel& decoder, const EncoderStack& stack,
                                           const PoolState& pool, std::size_t* evals = nullptr) {
  SampleScorer scorer(decoder, stack);
  std::vector<CandidateScore> all;
  all.reserve(pool.unlabeled().size());
  for (auto id : pool.unlabeled().items()) all.push_back(scorer.score(id));
  rank_by_entropy(all);
  if (evals) *evals += scorer.evals();
  return all;
}

inline SelectionReport us_select(const DecoderModel& decoder, const EncoderStack& stack, const PoolState& pool,
                                 std::size_t query_size) {
  Stopwatch sw;
  SelectionReport r;
  r.full_scan = true;
  r.candidates = us_rank(decoder, stack, pool, &r.model_evals);
  detail::take_top(r, query_size);
  r.candidates.resize(r.chosen.size());
  r.timings.rank_us = r.timings.total_us = sw.elapsed_us();
  return r;
}

// Uncertainty sampling on a labeled-fraction schedule: rescans the pool once
// every `scan_interval` of the pool has been labeled and serves from the last
// ranking in between.
class UncertaintySampler {
 public:
  explicit UncertaintySampler(double scan_interval) : interval_(scan_interval) {}

  SelectionReport select(const DecoderModel& decoder, const EncoderStack& stack, const PoolState& pool,
                         std::size_t query_size) {
    const auto labeled = pool.labeled().size();
    const auto step = static_cast<std::size_t>(std::ceil(interval_ * static_cast<double>(pool.total())));
    const bool due = !scanned_ || interval_ == 0.0 || labeled >= last_scan_labeled_ + std::max<std::size_t>(step, 1);
    if (due) {
      Stopwatch sw;
      SelectionReport r;
      r.full_scan = true;
      ranking_ = us_rank(decoder, stack, pool, &r.model_evals);
      cursor_ = 0;
      scanned_ = true;
      last_scan_labeled_ = labeled;
      serve(pool, query_size, r);
      r.timings.rank_us = r.timings.total_us = sw.elapsed_us();
      return r;
    }
    Stopwatch sw;
    SelectionReport r;
    serve(pool, query_size, r);
    if (r.chosen.empty() && !pool.unlabeled().empty()) {
      // cached ranking exhausted before the next scheduled scan
      scanned_ = false;
      return select(decoder, stack, pool, query_size);
    }
    r.timings.rank_us = r.timings.total_us = sw.elapsed_us();
    return r;
  }

 private:
  void serve(const PoolState& pool, std::size_t query_size, SelectionReport& r) {
    while (cursor_ < ranking_.size() && r.candidates.size() < query_size) {
      const auto& c = ranking_[cursor_++];
      if (!pool.is_unlabeled(c.id)) continue;
      r.candidates.push_back(c);
    }
    detail::take_top(r, query_size);
  }

  double interval_;
  bool scanned_ = false;
  std::size_t last_scan_labeled_ = 0;
  std::vector<CandidateScore> ranking_;
  std::size_t cursor_ = 0;
};

// One AUSDS selection: attack the labeled batch, map successful adversarial
// points to unlabeled ids via KNN, mix in random unlabeled ids at p : 1-p,
// and keep the top-|Q| candidates by entropy.
inline SelectionReport ausds_select(const DecoderModel& decoder, const EncoderStack& stack,
                                    const LatentMapper& mapper, std::span<const LabeledSample> batch,
                                    const PoolState& pool, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  mapper.require_fresh(stack.version());
  Stopwatch total;
  SelectionReport r;

  Stopwatch sw;
  std::vector<AttackInput> inputs;
  inputs.reserve(batch.size());
  for (const auto& s : batch) inputs.push_back({s.id, stack.encode_tokens(s.id), s.label, stack.version()});
  const auto points = attack_batch(decoder, inputs, cfg.attack, stack.version());
  std::vector<Vector> queries;
  for (const auto& p : points) {
    r.model_evals += p.model_evals;
    if (p.success) queries.push_back(p.x_prime);
  }
  r.attacks_total = points.size();
  r.attacks_succeeded = queries.size();
  r.timings.attack_us = sw.elapsed_us();

  sw.reset();
  std::vector<SampleId> adversarial;
  std::unordered_set<SampleId> in_sa;
  if (cfg.mix_ratio > 0.0 && !queries.empty()) {
    for (const auto& hits : mapper.query(queries, cfg.knn_k, stack.version(), &r.knn_distance_evals)) {
      for (const auto& nb : hits) {
        if (!pool.is_unlabeled(nb.id)) throw InvariantError("mapper returned non-pool id " + std::to_string(nb.id));
        if (in_sa.insert(nb.id).second) adversarial.push_back(nb.id);
      }
    }
  }
  r.timings.knn_us = sw.elapsed_us();

  sw.reset();
  std::vector<SampleId> random_ids;
  if (adversarial.empty()) {
    if (cfg.mix_ratio > 0.0) {
      r.degraded = true;
      log_warn("ausds: no adversarial samples (", r.attacks_succeeded, "/", r.attacks_total,
               " attacks succeeded); falling back to random candidates");
    }
    random_ids = detail::draw_unlabeled(pool, in_sa, cfg.query_size, rng);
  } else if (cfg.mix_ratio < 1.0) {
    const auto want = static_cast<std::size_t>(
        std::llround(static_cast<double>(adversarial.size()) * (1.0 - cfg.mix_ratio) / cfg.mix_ratio));
    random_ids = detail::draw_unlabeled(pool, in_sa, want, rng);
  }
  r.n_adversarial = adversarial.size();
  r.n_random = random_ids.size();
  r.timings.mix_us = sw.elapsed_us();

  sw.reset();
  SampleScorer scorer(decoder, stack);
  if (cfg.rank_scope == RankScope::mixed) {
    for (auto id : adversarial) r.candidates.push_back(scorer.score(id, true));
    for (auto id : random_ids) r.candidates.push_back(scorer.score(id, false));
    rank_by_entropy(r.candidates);
    detail::take_top(r, cfg.query_size);
  } else {
    // rank S_a alone for its p share of |Q|; S_r fills the rest unranked
    for (auto id : adversarial) r.candidates.push_back(scorer.score(id, true));
    rank_by_entropy(r.candidates);
    const auto adv_slots = random_ids.empty() ? cfg.query_size
                                              : static_cast<std::size_t>(std::llround(cfg.mix_ratio * cfg.query_size));
    detail::take_top(r, std::min(adv_slots, cfg.query_size));
    for (auto id : random_ids) {
      if (r.chosen.size() >= cfg.query_size) break;
      auto s = scorer.score(id, false);
      r.candidates.push_back(s);
      r.chosen.push_back(id);
      r.chosen_scores.push_back(s);
    }
  }
  r.model_evals += scorer.evals();
  r.timings.rank_us = sw.elapsed_us();
  r.timings.total_us = total.elapsed_us();
  return r;
}

}  // namespace ausds
