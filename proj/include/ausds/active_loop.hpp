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

// The active learning loop: initialization, one decoder step per iteration,
// batch-level sampling, q-ratio batch composition and periodic fine-tuning
// with a mapper rebuild.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ausds/attacks.hpp"
#include "ausds/dataset.hpp"
#include "ausds/decoder.hpp"
#include "ausds/encoder.hpp"
#include "ausds/experiment_log.hpp"
#include "ausds/latent_mapper.hpp"
#include "ausds/log.hpp"
#include "ausds/random.hpp"
#include "ausds/sampler.hpp"
#include "ausds/timer.hpp"

namespace ausds {

enum class StopRule { pool_exhausted, budget_reached };

inline StopRule parse_stop_rule(const std::string& s) {
  if (s == "pool_exhausted") return StopRule::pool_exhausted;
  if (s == "budget_reached") return StopRule::budget_reached;
  throw ConfigError("unknown stop rule '" + s + "'");
}

inline std::string to_string(StopRule s) { return s == StopRule::pool_exhausted ? "pool_exhausted" : "budget_reached"; }

struct LoopConfig {
  std::size_t fine_tune_interval = 50;  // j
  std::size_t fine_tune_steps = 50;     // k; 0 disables fine-tuning
  double new_data_ratio = 0.3;          // q
  std::vector<double> checkpoints{0.02, 0.04, 0.06, 0.08, 0.10};
  StopRule stop_rule = StopRule::budget_reached;
  std::size_t max_steps = 0;  // 0 = no cap
  bool log_timings = true;
  // initialization: train on D_0 until the loss improves by less than
  // plateau_tolerance over plateau_window steps, at most init_max_steps
  double plateau_tolerance = 1e-4;
  std::size_t plateau_window = 20;
  std::size_t init_max_steps = 2000;

  void validate() const {
    if (fine_tune_interval < 1) throw ConfigError("fine-tune interval j must be >= 1");
    if (!(new_data_ratio >= 0.0 && new_data_ratio <= 1.0)) throw ConfigError("q must be in [0, 1]");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (!(checkpoints[i] > 0.0 && checkpoints[i] <= 1.0)) throw ConfigError("checkpoints must be in (0, 1]");
      if (i > 0 && !(checkpoints[i] > checkpoints[i - 1])) throw ConfigError("checkpoints must be strictly increasing");
    }
    if (stop_rule == StopRule::budget_reached && checkpoints.empty()) {
      throw ConfigError("budget_reached needs at least one checkpoint");
    }
    if (plateau_window < 1) throw ConfigError("plateau window must be >= 1");
  }
};

struct DecoderConfig {
  Architecture arch = Architecture::linear;
  std::size_t hidden = 32;
  double init_scale = 1.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  double seed_fraction = kDefaultSeedFraction;
  DecoderConfig decoder;
  TrainConfig train;
  TrainConfig fine_tune;
  SamplerConfig sampler;
  LoopConfig loop;

  void validate() const {
    train.validate();
    fine_tune.validate();
    sampler.validate();
    loop.validate();
  }
};

// Name used in logs and reports: "rm", "us", "ausds-fgv", ...
inline std::string strategy_label(const SamplerConfig& s) {
  if (s.strategy == StrategyKind::ausds) return "ausds-" + to_string(s.attack.method);
  return to_string(s.strategy);
}

struct Checkpoint {
  double fraction = 0.0;
  std::size_t step = 0;
  std::size_t oracle_queries = 0;
  std::vector<LabeledSample> snapshot;  // first ceil(fraction * pool) labeled samples, labeling order
};

inline std::size_t budget_target(double fraction, std::size_t pool) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool) - 1e-9));
}

// Trains `decoder` on fixed examples, full batch, until the loss plateaus.
// Returns the number of steps taken.
inline std::size_t train_to_plateau(DecoderModel& decoder, std::span<const LatentExample> examples,
                                    const TrainConfig& cfg, double tolerance, std::size_t window,
                                    std::size_t max_steps) {
  if (examples.empty()) return 0;
  OptimizerState state;
  std::vector<double> history;
  history.reserve(max_steps + 1);
  std::size_t steps = 0;
  for (; steps < max_steps; ++steps) {
    history.push_back(train_step(decoder, examples, cfg, state));
    if (history.size() > window && history[history.size() - 1 - window] - history.back() < tolerance) {
      ++steps;
      break;
    }
  }
  return steps;
}

class ActiveLearner {
 public:
  ActiveLearner(const Dataset& dataset, PoolState pool, ExperimentConfig cfg)
      : dataset_(dataset),
        cfg_(std::move(cfg)),
        pool_(std::move(pool)),
        oracle_(dataset),
        stack_(dataset.train.store),
        us_sampler_(cfg_.sampler.us_scan_interval),
        batch_rng_(make_rng(cfg_.seed, stream::batches)),
        sample_rng_(make_rng(cfg_.seed, stream::sampling)) {
    cfg_.validate();
    if (pool_.total() != dataset.size()) throw ConfigError("pool size does not match dataset");
    initial_labeled_ = pool_.labeled().size();
    cfg_.fine_tune.seed = cfg_.seed;
    next_checkpoint_ = 0;
  }

  // Optional JSON-lines sink; header is written by initialize().
  void set_log_stream(std::ostream* os) { log_ = os; }
  void set_header_config(nlohmann::json j) { header_config_ = std::move(j); }

  const ExperimentConfig& config() const { return cfg_; }
  const PoolState& pool() const { return pool_; }
  const DecoderModel& decoder() const { return decoder_; }
  const EncoderStack& stack() const { return stack_; }
  const LatentMapper* mapper() const { return mapper_ ? &*mapper_ : nullptr; }
  const Oracle& oracle() const { return oracle_; }
  std::size_t step() const { return step_; }
  std::size_t initial_labeled() const { return initial_labeled_; }
  std::span<const LabeledSample> batch() const { return batch_; }
  const std::vector<StepRecord>& records() const { return records_; }
  const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
  std::size_t init_steps() const { return init_steps_; }
  bool initialized() const { return initialized_; }
  std::string strategy_name() const { return strategy_label(cfg_.sampler); }

  RunHeader header() const {
    RunHeader h;
    h.strategy = strategy_name();
    h.dataset = dataset_.name;
    h.seed = cfg_.seed;
    h.pool_size = pool_.total();
    h.initial_labeled = initial_labeled_;
    h.dim = dataset_.dim();
    h.task = to_string(dataset_.task);
    h.config = header_config_;
    return h;
  }

  void initialize() {
    if (initialized_) throw InvariantError("learner already initialized");
    const auto& d0 = pool_.labeled();
    if (dataset_.task == TaskKind::classification) {
      std::set<std::int32_t> seen;
      for (const auto& s : d0) seen.insert(s.label[0]);
      if (seen.size() < dataset_.num_labels) {
        log_warn("initial labeled set covers ", seen.size(), " of ", dataset_.num_labels, " classes");
      }
    }
    decoder_ = DecoderModel::make(cfg_.decoder.arch, dataset_.dim(), dataset_.num_labels, cfg_.decoder.hidden);
    auto init_rng = make_rng(cfg_.seed, stream::decoder_init);
    decoder_.init_random(init_rng, cfg_.decoder.init_scale);
    std::vector<LatentExample> examples;
    examples.reserve(d0.size());
    for (const auto& s : d0) examples.push_back(make_example(stack_, s.id, s.label));
    init_steps_ = train_to_plateau(decoder_, examples, cfg_.train, cfg_.loop.plateau_tolerance,
                                   cfg_.loop.plateau_window, cfg_.loop.init_max_steps);
    if (uses_mapper()) rebuild_mapper();
    batch_ = sample_batch_from(d0, cfg_.train.batch_size);
    step_ = 0;
    initialized_ = true;
    if (log_) *log_ << to_json(header()).dump() << '\n';
    record_checkpoints();
  }

  bool done() const {
    if (pool_.unlabeled().empty()) return true;
    if (cfg_.loop.max_steps > 0 && step_ >= cfg_.loop.max_steps) return true;
    if (cfg_.loop.stop_rule == StopRule::budget_reached) {
      return pool_.labeled().size() >= budget_target(cfg_.loop.checkpoints.back(), pool_.total());
    }
    return false;
  }

  const StepRecord& run_step() {
    if (!initialized_) throw InvariantError("run_step before initialize");
    if (pool_.unlabeled().empty()) throw InvariantError("run_step on an exhausted pool");
    Stopwatch step_sw;
    StepTimings t;
    StepRecord rec;
    rec.step = step_;

    // train decoder on B_i with the encoder frozen
    Stopwatch sw;
    {
      std::vector<LatentExample> examples;
      examples.reserve(batch_.size());
      for (const auto& s : batch_) examples.push_back(make_example(stack_, s.id, s.label));
      rec.train_loss = train_step(decoder_, examples, cfg_.train, train_state_);
    }
    t.train_us = sw.elapsed_us();

    // select S_add
    rec.encoder_version = stack_.version();
    SelectionReport sel;
    switch (cfg_.sampler.strategy) {
      case StrategyKind::ausds:
        rec.mapper_used = true;
        rec.mapper_version = mapper_->encoder_version();
        sel = ausds_select(decoder_, stack_, *mapper_, batch_, pool_, cfg_.sampler, sample_rng_);
        break;
      case StrategyKind::us:
        sel = us_sampler_.select(decoder_, stack_, pool_, cfg_.sampler.query_size);
        break;
      case StrategyKind::rm:
        sel = rm_select(pool_, cfg_.sampler.query_size, sample_rng_);
        annotate(sel);
        break;
    }
    if (sel.chosen.empty()) throw InvariantError("strategy returned no samples on a non-empty pool");
    t.attack_us = sel.timings.attack_us;
    t.knn_us = sel.timings.knn_us;
    t.mix_us = sel.timings.mix_us;
    t.rank_us = sel.timings.rank_us;
    t.select_us = sel.timings.total_us;

    // label, commit, keep the mapper in sync with T
    const auto q = commit_selection(pool_, sel.chosen, oracle_);
    if (mapper_) mapper_->remove(sel.chosen);

    batch_ = compose_batch(q);

    if (cfg_.loop.fine_tune_steps > 0 && step_ % cfg_.loop.fine_tune_interval == 0) {
      sw.reset();
      fine_tune(stack_, decoder_, pool_.labeled(), cfg_.loop.fine_tune_steps, cfg_.fine_tune);
      t.fine_tune_us = sw.elapsed_us();
      rec.fine_tuned = true;
      if (uses_mapper()) {
        rebuild_mapper();
        t.mapper_build_us = mapper_->build_us();
      }
    }

    rec.selected = sel.chosen;
    for (const auto& c : sel.chosen_scores) {
      rec.entropies.push_back(c.entropy);
      rec.margins.push_back(c.margin);
    }
    rec.n_adversarial = sel.n_adversarial;
    rec.n_random = sel.n_random;
    rec.attacks_succeeded = sel.attacks_succeeded;
    rec.attacks_total = sel.attacks_total;
    rec.degraded = sel.degraded;
    rec.full_scan = sel.full_scan;
    rec.labeled = pool_.labeled().size();
    rec.unlabeled = pool_.unlabeled().size();
    rec.oracle_queries = oracle_.queries();
    rec.model_evals = sel.model_evals;
    rec.knn_distance_evals = sel.knn_distance_evals;
    t.step_us = step_sw.elapsed_us();
    if (cfg_.loop.log_timings) rec.timings = t;

    ++step_;
    pool_.set_step(step_);
    records_.push_back(std::move(rec));
    if (log_) *log_ << to_json(records_.back()).dump() << '\n';
    record_checkpoints();
    return records_.back();
  }

  void run() {
    if (!initialized_) initialize();
    while (!done()) run_step();
  }

  // Checks pool, oracle, mapper and checkpoint invariants; returns one line
  // per violation.
  std::vector<std::string> verify_invariants() const {
    std::vector<std::string> out;
    if (auto e = pool_.check_invariants(); !e.empty()) out.push_back(e);
    if (oracle_.queries() != pool_.labeled().size() - initial_labeled_) {
      out.push_back("oracle queries " + std::to_string(oracle_.queries()) + " != |D| - |D_0|");
    }
    if (mapper_) {
      if (mapper_->encoder_version() != stack_.version()) out.push_back("mapper is stale after step");
      if (mapper_->size() != pool_.unlabeled().size()) out.push_back("mapper size != |T|");
      else if (mapper_->ids() != pool_.unlabeled().sorted()) out.push_back("mapper ids != T");
    }
    for (const auto& r : records_) {
      if (r.mapper_used && r.mapper_version != r.encoder_version) {
        out.push_back("step " + std::to_string(r.step) + " selected with a stale mapper");
      }
    }
    for (std::size_t i = 1; i < checkpoints_.size(); ++i) {
      const auto& a = checkpoints_[i - 1].snapshot;
      const auto& b = checkpoints_[i].snapshot;
      if (a.size() > b.size() || !std::equal(a.begin(), a.end(), b.begin())) {
        out.push_back("checkpoint " + std::to_string(i) + " does not contain its predecessor");
      }
    }
    return out;
  }

 private:
  bool uses_mapper() const { return cfg_.sampler.strategy == StrategyKind::ausds; }

  void rebuild_mapper() {
    const auto ids = pool_.unlabeled().sorted();
    mapper_ = LatentMapper::build(stack_, ids, cfg_.sampler.index);
  }

  void annotate(SelectionReport& sel) {
    SampleScorer scorer(decoder_, stack_);
    for (auto& c : sel.chosen_scores) c = scorer.score(c.id);
  }

  std::vector<LabeledSample> sample_batch_from(std::span<const LabeledSample> from, std::size_t count) {
    std::vector<LabeledSample> out;
    if (from.empty() || count == 0) return out;
    if (from.size() >= count) {
      for (auto i : sample_indices(from.size(), count, batch_rng_)) out.push_back(from[i]);
    } else {
      // fewer labeled samples than the batch size: draw with replacement
      for (std::size_t i = 0; i < count; ++i) out.push_back(from[uniform_index(from.size(), batch_rng_)]);
    }
    return out;
  }

  // B_{i+1}: round(q * batch) from Q, the rest from D_{i+1}.
  std::vector<LabeledSample> compose_batch(std::span<const LabeledSample> q) {
    const auto bs = cfg_.train.batch_size;
    const auto from_q = std::min(q.size(), static_cast<std::size_t>(std::llround(cfg_.loop.new_data_ratio * bs)));
    auto out = sample_batch_from(q, from_q);
    auto rest = sample_batch_from(pool_.labeled(), bs - out.size());
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  void record_checkpoints() {
    const auto& cps = cfg_.loop.checkpoints;
    while (next_checkpoint_ < cps.size()) {
      const auto target = budget_target(cps[next_checkpoint_], pool_.total());
      if (pool_.labeled().size() < target) break;
      Checkpoint c;
      c.fraction = cps[next_checkpoint_];
      c.step = step_;
      c.oracle_queries = oracle_.queries();
      c.snapshot.assign(pool_.labeled().begin(), pool_.labeled().begin() + static_cast<std::ptrdiff_t>(target));
      checkpoints_.push_back(std::move(c));
      if (log_) {
        CheckpointRecord r{checkpoints_.back().fraction, step_, target, oracle_.queries(), {}};
        *log_ << to_json(r).dump() << '\n';
      }
      ++next_checkpoint_;
    }
  }

  const Dataset& dataset_;
  ExperimentConfig cfg_;
  PoolState pool_;
  Oracle oracle_;
  EncoderStack stack_;
  DecoderModel decoder_;
  OptimizerState train_state_;
  std::optional<LatentMapper> mapper_;
  UncertaintySampler us_sampler_;
  Rng batch_rng_;
  Rng sample_rng_;
  std::vector<LabeledSample> batch_;
  std::vector<StepRecord> records_;
  std::vector<Checkpoint> checkpoints_;
  std::size_t next_checkpoint_ = 0;
  std::size_t step_ = 0;
  std::size_t initial_labeled_ = 0;
  std::size_t init_steps_ = 0;
  bool initialized_ = false;
  std::ostream* log_ = nullptr;
  nlohmann::json header_config_ = nlohmann::json::object();
};

}  // namespace ausds
