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

// Run configuration: one JSON document mirroring every config struct. Every
// key is optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ausds/active_loop.hpp"
#include "ausds/error.hpp"
#include "ausds/evaluation.hpp"
#include "ausds/reports.hpp"
#include "ausds/synthetic.hpp"

namespace ausds {

struct RunConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<SyntheticSpec> synthetic;
  std::vector<std::string> strategies{"rm", "us", "ausds-fgv"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path out = "ausds_out";
  ExperimentConfig experiment;
  EvalConfig eval;
  MarginWindow margin_window;

  void validate() const {
    if (strategies.empty()) throw ConfigError("at least one strategy is required");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (manifest.has_value() == synthetic.has_value()) {
      throw ConfigError("exactly one of 'manifest' and 'synthetic' must be given");
    }
    for (const auto& s : strategies) {
      auto e = experiment;
      apply_strategy(e.sampler, s);
    }
    experiment.validate();
  }

  // "rm", "us", "ausds-fgv", "ausds-deepfool", "ausds-cw"
  static void apply_strategy(SamplerConfig& s, const std::string& name) {
    if (name == "rm") {
      s.strategy = StrategyKind::rm;
    } else if (name == "us") {
      s.strategy = StrategyKind::us;
    } else if (name.rfind("ausds-", 0) == 0) {
      s.strategy = StrategyKind::ausds;
      s.attack.method = parse_attack_method(name.substr(6));
    } else {
      throw ConfigError("unknown strategy '" + name + "'");
    }
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_train(const nlohmann::json& j, const std::string& where, TrainConfig& t) {
  check_keys(j, where, {"optimizer", "learning_rate", "batch_size", "beta1", "beta2", "epsilon"});
  if (j.contains("optimizer")) t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  read_into(j, "learning_rate", t.learning_rate);
  read_into(j, "batch_size", t.batch_size);
  read_into(j, "beta1", t.beta1);
  read_into(j, "beta2", t.beta2);
  read_into(j, "epsilon", t.epsilon);
}

inline nlohmann::json train_json(const TrainConfig& t) {
  return {{"optimizer", to_string(t.optimizer)}, {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"beta1", t.beta1},  {"beta2", t.beta2}, {"epsilon", t.epsilon}};
}

inline void read_decoder(const nlohmann::json& j, DecoderConfig& d) {
  check_keys(j, "decoder", {"arch", "hidden", "init_scale"});
  if (j.contains("arch")) d.arch = parse_architecture(j.at("arch").get<std::string>());
  read_into(j, "hidden", d.hidden);
  read_into(j, "init_scale", d.init_scale);
}

inline nlohmann::json decoder_json(const DecoderConfig& d) {
  return {{"arch", to_string(d.arch)}, {"hidden", d.hidden}, {"init_scale", d.init_scale}};
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::read_into;
  RunConfig c;
  try {
    check_keys(j, "config", {"manifest", "synthetic", "strategies", "seeds", "out", "seed_fraction", "decoder", "train",
                             "fine_tune", "sampler", "attack", "loop", "eval", "margin_window"});
    if (j.contains("manifest")) c.manifest = std::filesystem::path(j.at("manifest").get<std::string>());
    if (j.contains("synthetic")) {
      check_keys(j.at("synthetic"), "synthetic",
                 {"kind", "dim", "classes", "per_class", "test_per_class", "spread", "separation", "boundary_noise",
                  "intrinsic_dim", "seed", "name"});
      c.synthetic = synthetic_from_json(j.at("synthetic"));
    }
    read_into(j, "strategies", c.strategies);
    read_into(j, "seeds", c.seeds);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    auto& e = c.experiment;
    read_into(j, "seed_fraction", e.seed_fraction);
    if (j.contains("decoder")) detail::read_decoder(j.at("decoder"), e.decoder);
    if (j.contains("train")) detail::read_train(j.at("train"), "train", e.train);
    if (j.contains("fine_tune")) detail::read_train(j.at("fine_tune"), "fine_tune", e.fine_tune);
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      check_keys(s, "sampler", {"mix_ratio", "query_size", "us_scan_interval", "knn_k", "rank_scope", "index"});
      read_into(s, "mix_ratio", e.sampler.mix_ratio);
      read_into(s, "query_size", e.sampler.query_size);
      read_into(s, "us_scan_interval", e.sampler.us_scan_interval);
      read_into(s, "knn_k", e.sampler.knn_k);
      if (s.contains("rank_scope")) e.sampler.rank_scope = parse_rank_scope(s.at("rank_scope").get<std::string>());
      if (s.contains("index")) e.sampler.index = parse_index_kind(s.at("index").get<std::string>());
    }
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      check_keys(a, "attack", {"lambda", "line_search", "line_search_lambdas", "max_iter", "overshoot", "cw_c",
                               "cw_steps", "cw_step_size"});
      auto& at = e.sampler.attack;
      read_into(a, "lambda", at.lambda);
      read_into(a, "line_search", at.line_search);
      read_into(a, "line_search_lambdas", at.line_search_lambdas);
      read_into(a, "max_iter", at.max_iter);
      read_into(a, "overshoot", at.overshoot);
      read_into(a, "cw_c", at.cw_c);
      read_into(a, "cw_steps", at.cw_steps);
      read_into(a, "cw_step_size", at.cw_step_size);
    }
    if (j.contains("loop")) {
      const auto& l = j.at("loop");
      check_keys(l, "loop", {"fine_tune_interval", "fine_tune_steps", "new_data_ratio", "checkpoints", "stop_rule",
                             "max_steps", "log_timings", "plateau_tolerance", "plateau_window", "init_max_steps"});
      auto& lp = e.loop;
      read_into(l, "fine_tune_interval", lp.fine_tune_interval);
      read_into(l, "fine_tune_steps", lp.fine_tune_steps);
      read_into(l, "new_data_ratio", lp.new_data_ratio);
      read_into(l, "checkpoints", lp.checkpoints);
      if (l.contains("stop_rule")) lp.stop_rule = parse_stop_rule(l.at("stop_rule").get<std::string>());
      read_into(l, "max_steps", lp.max_steps);
      read_into(l, "log_timings", lp.log_timings);
      read_into(l, "plateau_tolerance", lp.plateau_tolerance);
      read_into(l, "plateau_window", lp.plateau_window);
      read_into(l, "init_max_steps", lp.init_max_steps);
    }
    if (j.contains("eval")) {
      const auto& v = j.at("eval");
      check_keys(v, "eval", {"decoder", "train", "plateau_tolerance", "plateau_window", "max_steps", "train_adapter",
                             "adapter_steps"});
      if (v.contains("decoder")) detail::read_decoder(v.at("decoder"), c.eval.decoder);
      if (v.contains("train")) detail::read_train(v.at("train"), "eval.train", c.eval.train);
      read_into(v, "plateau_tolerance", c.eval.plateau_tolerance);
      read_into(v, "plateau_window", c.eval.plateau_window);
      read_into(v, "max_steps", c.eval.max_steps);
      read_into(v, "train_adapter", c.eval.train_adapter);
      read_into(v, "adapter_steps", c.eval.adapter_steps);
    } else {
      c.eval.decoder = e.decoder;
    }
    if (j.contains("margin_window")) {
      const auto& m = j.at("margin_window");
      check_keys(m, "margin_window", {"begin", "end", "last_fraction"});
      if (m.contains("begin")) c.margin_window.begin = m.at("begin").get<std::size_t>();
      if (m.contains("end")) c.margin_window.end = m.at("end").get<std::size_t>();
      read_into(m, "last_fraction", c.margin_window.last_fraction);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
  auto c = run_config_from_json(j);
  if (c.manifest && c.manifest->is_relative()) c.manifest = path.parent_path() / *c.manifest;
  return c;
}

// Effective experiment config, recorded in each log header.
inline nlohmann::json experiment_json(const ExperimentConfig& e) {
  const auto& a = e.sampler.attack;
  const auto& l = e.loop;
  return {{"seed_fraction", e.seed_fraction},
          {"decoder", detail::decoder_json(e.decoder)},
          {"train", detail::train_json(e.train)},
          {"fine_tune", detail::train_json(e.fine_tune)},
          {"sampler",
           {{"mix_ratio", e.sampler.mix_ratio},
            {"query_size", e.sampler.query_size},
            {"us_scan_interval", e.sampler.us_scan_interval},
            {"knn_k", e.sampler.knn_k},
            {"rank_scope", to_string(e.sampler.rank_scope)},
            {"index", to_string(e.sampler.index)}}},
          {"attack",
           {{"method", to_string(a.method)},
            {"lambda", a.lambda},
            {"line_search", a.line_search},
            {"line_search_lambdas", a.line_search_lambdas},
            {"max_iter", a.max_iter},
            {"overshoot", a.overshoot},
            {"cw_c", a.cw_c},
            {"cw_steps", a.cw_steps},
            {"cw_step_size", a.cw_step_size}}},
          {"loop",
           {{"fine_tune_interval", l.fine_tune_interval},
            {"fine_tune_steps", l.fine_tune_steps},
            {"new_data_ratio", l.new_data_ratio},
            {"checkpoints", l.checkpoints},
            {"stop_rule", to_string(l.stop_rule)},
            {"max_steps", l.max_steps},
            {"log_timings", l.log_timings},
            {"plateau_tolerance", l.plateau_tolerance},
            {"plateau_window", l.plateau_window},
            {"init_max_steps", l.init_max_steps}}}};
}

}  // namespace ausds
