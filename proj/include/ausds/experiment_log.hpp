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

// Per-step experiment records and their JSON-lines encoding. The log is the
// only input the reports need.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ausds/dataset.hpp"
#include "ausds/error.hpp"

namespace ausds {

struct RunHeader {
  std::string strategy;
  std::string dataset;
  std::uint64_t seed = 0;
  std::size_t pool_size = 0;        // |D_0| + |T_0|
  std::size_t initial_labeled = 0;  // |D_0|
  std::size_t dim = 0;
  std::string task;
  nlohmann::json config = nlohmann::json::object();
};

struct StepTimings {
  std::int64_t train_us = 0;
  std::int64_t attack_us = 0;
  std::int64_t knn_us = 0;
  std::int64_t mix_us = 0;
  std::int64_t rank_us = 0;
  std::int64_t select_us = 0;
  std::int64_t fine_tune_us = 0;
  std::int64_t mapper_build_us = 0;
  std::int64_t step_us = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::vector<SampleId> selected;
  std::vector<double> entropies;
  std::vector<std::optional<double>> margins;
  std::size_t n_adversarial = 0;
  std::size_t n_random = 0;
  std::size_t attacks_succeeded = 0;
  std::size_t attacks_total = 0;
  bool degraded = false;
  bool full_scan = false;
  bool fine_tuned = false;
  std::size_t labeled = 0;    // |D_{i+1}|
  std::size_t unlabeled = 0;  // |T_{i+1}|
  std::size_t oracle_queries = 0;
  std::uint64_t encoder_version = 0;  // at selection time
  std::uint64_t mapper_version = 0;   // at selection time (== encoder_version when fresh)
  bool mapper_used = false;
  double train_loss = 0.0;
  std::size_t model_evals = 0;
  std::size_t knn_distance_evals = 0;
  std::optional<StepTimings> timings;
};

struct CheckpointRecord {
  double fraction = 0.0;
  std::size_t step = 0;
  std::size_t labeled = 0;
  std::size_t oracle_queries = 0;
  std::string path;  // snapshot TSV, if written
};

inline nlohmann::json to_json(const RunHeader& h) {
  return {{"type", "header"}, {"strategy", h.strategy}, {"dataset", h.dataset},       {"seed", h.seed},
          {"pool_size", h.pool_size}, {"initial_labeled", h.initial_labeled}, {"dim", h.dim}, {"task", h.task},
          {"config", h.config}};
}

inline nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json margins = nlohmann::json::array();
  for (const auto& m : r.margins) margins.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
  nlohmann::json j = {{"type", "step"},
                      {"step", r.step},
                      {"selected", r.selected},
                      {"entropies", r.entropies},
                      {"margins", margins},
                      {"n_adversarial", r.n_adversarial},
                      {"n_random", r.n_random},
                      {"attacks_succeeded", r.attacks_succeeded},
                      {"attacks_total", r.attacks_total},
                      {"degraded", r.degraded},
                      {"full_scan", r.full_scan},
                      {"fine_tuned", r.fine_tuned},
                      {"labeled", r.labeled},
                      {"unlabeled", r.unlabeled},
                      {"oracle_queries", r.oracle_queries},
                      {"encoder_version", r.encoder_version},
                      {"mapper_version", r.mapper_version},
                      {"mapper_used", r.mapper_used},
                      {"train_loss", r.train_loss},
                      {"model_evals", r.model_evals},
                      {"knn_distance_evals", r.knn_distance_evals}};
  if (r.timings) {
    const auto& t = *r.timings;
    j["timings_us"] = {{"train", t.train_us},         {"attack", t.attack_us},
                       {"knn", t.knn_us},             {"mix", t.mix_us},
                       {"rank", t.rank_us},           {"select", t.select_us},
                       {"fine_tune", t.fine_tune_us}, {"mapper_build", t.mapper_build_us},
                       {"step", t.step_us}};
  }
  return j;
}

inline nlohmann::json to_json(const CheckpointRecord& c) {
  return {{"type", "checkpoint"}, {"fraction", c.fraction},         {"step", c.step},
          {"labeled", c.labeled}, {"oracle_queries", c.oracle_queries}, {"path", c.path}};
}

inline StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.selected = j.at("selected").get<std::vector<SampleId>>();
  r.entropies = j.at("entropies").get<std::vector<double>>();
  for (const auto& m : j.at("margins")) r.margins.push_back(m.is_null() ? std::nullopt : std::optional(m.get<double>()));
  r.n_adversarial = j.value("n_adversarial", std::size_t{0});
  r.n_random = j.value("n_random", std::size_t{0});
  r.attacks_succeeded = j.value("attacks_succeeded", std::size_t{0});
  r.attacks_total = j.value("attacks_total", std::size_t{0});
  r.degraded = j.value("degraded", false);
  r.full_scan = j.value("full_scan", false);
  r.fine_tuned = j.value("fine_tuned", false);
  r.labeled = j.value("labeled", std::size_t{0});
  r.unlabeled = j.value("unlabeled", std::size_t{0});
  r.oracle_queries = j.value("oracle_queries", std::size_t{0});
  r.encoder_version = j.value("encoder_version", std::uint64_t{0});
  r.mapper_version = j.value("mapper_version", std::uint64_t{0});
  r.mapper_used = j.value("mapper_used", false);
  r.train_loss = j.value("train_loss", 0.0);
  r.model_evals = j.value("model_evals", std::size_t{0});
  r.knn_distance_evals = j.value("knn_distance_evals", std::size_t{0});
  if (j.contains("timings_us")) {
    const auto& t = j.at("timings_us");
    StepTimings s;
    s.train_us = t.value("train", std::int64_t{0});
    s.attack_us = t.value("attack", std::int64_t{0});
    s.knn_us = t.value("knn", std::int64_t{0});
    s.mix_us = t.value("mix", std::int64_t{0});
    s.rank_us = t.value("rank", std::int64_t{0});
    s.select_us = t.value("select", std::int64_t{0});
    s.fine_tune_us = t.value("fine_tune", std::int64_t{0});
    s.mapper_build_us = t.value("mapper_build", std::int64_t{0});
    s.step_us = t.value("step", std::int64_t{0});
    r.timings = s;
  }
  return r;
}

struct ExperimentLog {
  RunHeader header;
  std::vector<StepRecord> steps;
  std::vector<CheckpointRecord> checkpoints;
};

inline ExperimentLog parse_log(std::istream& is, const std::string& name = "log") {
  ExperimentLog log;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        log.header.strategy = j.at("strategy").get<std::string>();
        log.header.dataset = j.value("dataset", std::string{});
        log.header.seed = j.at("seed").get<std::uint64_t>();
        log.header.pool_size = j.at("pool_size").get<std::size_t>();
        log.header.initial_labeled = j.value("initial_labeled", std::size_t{0});
        log.header.dim = j.value("dim", std::size_t{0});
        log.header.task = j.value("task", std::string{});
        if (j.contains("config")) log.header.config = j.at("config");
        have_header = true;
      } else if (type == "step") {
        log.steps.push_back(step_from_json(j));
      } else if (type == "checkpoint") {
        CheckpointRecord c;
        c.fraction = j.at("fraction").get<double>();
        c.step = j.at("step").get<std::size_t>();
        c.labeled = j.at("labeled").get<std::size_t>();
        c.oracle_queries = j.value("oracle_queries", std::size_t{0});
        c.path = j.value("path", std::string{});
        log.checkpoints.push_back(c);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError(name + ": missing header line");
  return log;
}

}  // namespace ausds
