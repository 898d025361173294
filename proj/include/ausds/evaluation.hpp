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

// From-scratch evaluation of labeled snapshots and the checkpoint TSV files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ausds/active_loop.hpp"
#include "ausds/dataset.hpp"
#include "ausds/decoder.hpp"
#include "ausds/encoder.hpp"
#include "ausds/error.hpp"
#include "ausds/formats.hpp"
#include "ausds/log.hpp"
#include "ausds/random.hpp"

namespace ausds {

// "id<TAB>label" lines in labeling order.
inline void write_snapshot(const std::filesystem::path& path, std::span<const LabeledSample> snapshot) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& s : snapshot) os << s.id << '\t' << format_label(s.label) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

inline std::vector<LabeledSample> read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<LabeledSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto where = path.string() + ":" + std::to_string(n);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(where + ": missing tab");
    const auto id = parse_label(line.substr(0, tab), where);
    if (id.size() != 1) throw FormatError(where + ": bad id");
    out.push_back({static_cast<SampleId>(id[0]), parse_label(line.substr(tab + 1), where)});
  }
  return out;
}

struct EvalConfig {
  DecoderConfig decoder;
  TrainConfig train{OptimizerKind::adam, 1e-2};
  double plateau_tolerance = 1e-4;
  std::size_t plateau_window = 20;
  std::size_t max_steps = 2000;
  bool train_adapter = false;
  std::size_t adapter_steps = 100;
};

struct EvalRow {
  std::string strategy;
  std::uint64_t seed = 0;
  double fraction = 0.0;
  std::size_t labeled = 0;
  std::string metric;  // "accuracy" or "token_micro_f1"
  double value = 0.0;
};

// Fraction of correct predictions (classification) or token micro-F1 with
// label 0 as the outside class (labeling).
inline double evaluate(const DecoderModel& decoder, const EncoderStack& stack, const Split& split, TaskKind task) {
  if (split.size() == 0) throw ConfigError("evaluation split is empty");
  if (task == TaskKind::classification) {
    std::size_t correct = 0;
    Vector z(stack.dim());
    for (std::size_t i = 0; i < split.size(); ++i) {
      stack.encode_into(static_cast<SampleId>(i), z);
      if (predict(decoder, z) == split.gold[i][0]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto pred = predict(decoder, stack.encode_tokens(static_cast<SampleId>(i)));
    const auto& gold = split.gold[i];
    for (std::size_t t = 0; t < gold.size(); ++t) {
      if (pred[t] == gold[t]) {
        if (gold[t] != 0) ++tp;
      } else {
        if (pred[t] != 0) ++fp;
        if (gold[t] != 0) ++fn;
      }
    }
  }
  const auto denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

inline std::string metric_name(TaskKind task) { return task == TaskKind::classification ? "accuracy" : "token_micro_f1"; }

// Trains a fresh decoder (and optionally a fresh adapter) on `snapshot` only
// and scores it on the test split.
inline double train_and_score(const Dataset& dataset, std::span<const LabeledSample> snapshot, const EvalConfig& cfg,
                              std::uint64_t seed) {
  if (!dataset.test) throw ConfigError("dataset '" + dataset.name + "' has no test split");
  auto decoder = DecoderModel::make(cfg.decoder.arch, dataset.dim(), dataset.num_labels, cfg.decoder.hidden);
  auto rng = make_rng(seed, stream::evaluation);
  decoder.init_random(rng, cfg.decoder.init_scale);
  EncoderStack stack(dataset.train.store);
  std::vector<LatentExample> examples;
  examples.reserve(snapshot.size());
  for (const auto& s : snapshot) examples.push_back(make_example(stack, s.id, s.label));
  auto train = cfg.train;
  train.seed = seed;
  train_to_plateau(decoder, examples, train, cfg.plateau_tolerance, cfg.plateau_window, cfg.max_steps);
  EncoderStack test_stack(dataset.test->store);
  if (cfg.train_adapter) {
    fine_tune(stack, decoder, snapshot, cfg.adapter_steps, train);
    test_stack.set_adapter(stack.adapter(), stack.bias());
  }
  return evaluate(decoder, test_stack, *dataset.test, dataset.task);
}

struct SnapshotRef {
  std::string strategy;
  std::uint64_t seed = 0;
  double fraction = 0.0;
  std::vector<LabeledSample> snapshot;
};

inline std::vector<EvalRow> eval_from_scratch(std::span<const SnapshotRef> snapshots, const Dataset& dataset,
                                              const EvalConfig& cfg) {
  std::vector<EvalRow> rows;
  for (const auto& s : snapshots) {
    if (s.snapshot.empty()) {
      log_warn("eval: empty snapshot for ", s.strategy, " seed ", s.seed, " at ", s.fraction, "; skipped");
      continue;
    }
    for (const auto& l : s.snapshot) dataset.train.store->check(l.id);
    rows.push_back({s.strategy, s.seed, s.fraction, s.snapshot.size(), metric_name(dataset.task),
                    train_and_score(dataset, s.snapshot, cfg, s.seed)});
  }
  return rows;
}

// strategy,seed,fraction,labeled,metric,value
inline void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows) {
  for (const auto& r : rows) {
    if (r.metric == "token_micro_f1") {
      os << "# token-level micro-F1, label 0 treated as outside; not span F1\n";
      break;
    }
  }
  os << "strategy,seed,fraction,labeled,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%zu,%s,%.6f", r.fraction, r.labeled, r.metric.c_str(), r.value);
    os << r.strategy << ',' << r.seed << ',' << buf << '\n';
  }
}

}  // namespace ausds
