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

// Runs one (strategy, seed) experiment and writes its log and checkpoints.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ausds/active_loop.hpp"
#include "ausds/config.hpp"
#include "ausds/dataset.hpp"
#include "ausds/error.hpp"
#include "ausds/evaluation.hpp"

namespace ausds {

struct RunOutput {
  std::filesystem::path log_path;
  std::vector<SnapshotRef> snapshots;
  nlohmann::json checkpoint_entries = nlohmann::json::array();
};

inline std::string checkpoint_file_name(const std::string& strategy, std::uint64_t seed, double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", fraction * 100.0);
  return strategy + "_seed" + std::to_string(seed) + "_" + buf + "pct.tsv";
}

// Runs `strategy` with `seed` on `dataset` and writes
//   out/logs/<strategy>_seed<seed>.jsonl
//   out/checkpoints/<strategy>_seed<seed>_<pct>pct.tsv
inline RunOutput run_experiment(const Dataset& dataset, ExperimentConfig cfg, const std::string& strategy,
                                std::uint64_t seed, const std::filesystem::path& out) {
  RunConfig::apply_strategy(cfg.sampler, strategy);
  cfg.seed = seed;
  cfg.validate();
  std::filesystem::create_directories(out / "logs");
  std::filesystem::create_directories(out / "checkpoints");
  RunOutput r;
  r.log_path = out / "logs" / (strategy + "_seed" + std::to_string(seed) + ".jsonl");
  std::ofstream log(r.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + r.log_path.string());

  ActiveLearner learner(dataset, make_initial_pool(dataset, seed, cfg.seed_fraction), cfg);
  learner.set_log_stream(&log);
  learner.set_header_config(experiment_json(cfg));
  learner.run();
  if (const auto v = learner.verify_invariants(); !v.empty()) throw InvariantError(v.front());

  for (const auto& c : learner.checkpoints()) {
    const auto name = checkpoint_file_name(strategy, seed, c.fraction);
    write_snapshot(out / "checkpoints" / name, c.snapshot);
    r.checkpoint_entries.push_back({{"strategy", strategy},
                                    {"seed", seed},
                                    {"fraction", c.fraction},
                                    {"step", c.step},
                                    {"labeled", c.snapshot.size()},
                                    {"path", name}});
    r.snapshots.push_back({strategy, seed, c.fraction, c.snapshot});
  }
  if (!log) throw IoError("write failed: " + r.log_path.string());
  return r;
}

// out/checkpoints/index.json
inline void write_checkpoint_index(const std::filesystem::path& out, const nlohmann::json& entries) {
  const auto path = out / "checkpoints" / "index.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << entries.dump(2) << '\n';
}

inline std::vector<SnapshotRef> read_checkpoint_index(const std::filesystem::path& index) {
  std::ifstream is(index);
  if (!is) throw IoError("cannot open " + index.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(index.string() + ": " + e.what());
  }
  std::vector<SnapshotRef> out;
  for (const auto& e : j) {
    SnapshotRef s;
    s.strategy = e.at("strategy").get<std::string>();
    s.seed = e.at("seed").get<std::uint64_t>();
    s.fraction = e.at("fraction").get<double>();
    s.snapshot = read_snapshot(index.parent_path() / e.at("path").get<std::string>());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ausds
