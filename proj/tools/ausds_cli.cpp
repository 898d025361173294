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


// ausds: command-line harness.
//
//   ausds gen --out data/blobs --classes 3 --dim 16 --per-class 10000
//   ausds run --config run.json [--seed 3] [--strategy us] [--out dir]
//   ausds eval-scratch --config run.json [--checkpoints dir/checkpoints/index.json]
//   ausds report-speed dir/logs/*.jsonl
//   ausds report-margin dir/logs/*.jsonl

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ausds.hpp"

namespace fs = std::filesystem;
using namespace ausds;

namespace {

Dataset load_run_dataset(const RunConfig& c) {
  if (c.manifest) return read_dataset(read_manifest(*c.manifest));
  return to_dataset(generate_synthetic(*c.synthetic));
}

std::vector<ExperimentLog> read_logs(const std::vector<std::string>& paths) {
  std::vector<ExperimentLog> logs;
  for (const auto& p : paths) {
    std::ifstream is(p);
    if (!is) throw IoError("cannot open " + p);
    logs.push_back(parse_log(is, p));
  }
  return logs;
}

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial uncertainty sampling for pool-based active learning"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "info-level logging");

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset (AEMB + labels + manifest)");
  SyntheticSpec spec;
  std::string kind = "gaussian_blobs";
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--kind", kind, "gaussian_blobs | ring_vs_disk");
  gen->add_option("--dim", spec.dim);
  gen->add_option("--classes", spec.classes);
  gen->add_option("--per-class", spec.per_class);
  gen->add_option("--test-per-class", spec.test_per_class);
  gen->add_option("--spread", spec.spread);
  gen->add_option("--separation", spec.separation);
  gen->add_option("--boundary-noise", spec.boundary_noise);
  gen->add_option("--intrinsic-dim", spec.intrinsic_dim);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--name", spec.name);

  // run
  auto* run = app.add_subcommand("run", "run strategies x seeds from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> strategies;
  bool run_eval = false;
  run->add_option("--config", config_path, "JSON run config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "run a single seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--strategy", strategies, "rm | us | ausds-fgv | ausds-deepfool | ausds-cw");
  run->add_flag("--eval", run_eval, "also evaluate checkpoints from scratch");

  // eval-scratch
  auto* ev = app.add_subcommand("eval-scratch", "retrain on checkpoint snapshots and score the test split");
  std::string ev_config, ev_index, ev_out;
  ev->add_option("--config", ev_config, "JSON run config")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoints", ev_index, "checkpoint index.json (default <out>/checkpoints/index.json)");
  ev->add_option("--out", ev_out, "CSV path (default <out>/eval.csv)");

  // report-speed
  auto* rs = app.add_subcommand("report-speed", "mean per-step selection time, normalized to US");
  std::vector<std::string> rs_logs;
  std::string rs_out;
  std::size_t warmup = kWarmupSteps;
  rs->add_option("logs", rs_logs, "JSON-lines logs")->required()->check(CLI::ExistingFile);
  rs->add_option("--out", rs_out, "CSV path (default stdout)");
  rs->add_option("--warmup", warmup, "steps excluded at the start of each run");

  // report-margin
  auto* rmg = app.add_subcommand("report-margin", "per-step mean margin and windowed histograms");
  std::vector<std::string> rm_logs;
  std::string rm_prefix = "margin";
  MarginWindow window;
  rmg->add_option("logs", rm_logs, "JSON-lines logs")->required()->check(CLI::ExistingFile);
  rmg->add_option("--out-prefix", rm_prefix, "writes <prefix>_series.csv and <prefix>_hist.csv");
  rmg->add_option("--window-begin", window.begin, "first step of the histogram window");
  rmg->add_option("--window-end", window.end, "one past the last step of the window");
  rmg->add_option("--last-fraction", window.last_fraction, "window = last fraction of steps (default 0.2)");

  CLI11_PARSE(app, argc, argv);
  set_log_level(verbose ? LogLevel::info : LogLevel::warn);

  try {
    if (*gen) {
      spec.kind = parse_synthetic_kind(kind);
      const auto path = write_synthetic(generate_synthetic(spec), gen_out);
      std::cout << path.string() << '\n';
    } else if (*run) {
      auto c = read_run_config(config_path);
      if (seed) c.seeds = {*seed};
      if (out) c.out = *out;
      if (!strategies.empty()) c.strategies = strategies;
      c.validate();
      const auto dataset = load_run_dataset(c);
      nlohmann::json index = nlohmann::json::array();
      std::vector<SnapshotRef> snapshots;
      for (const auto& s : c.strategies) {
        for (auto sd : c.seeds) {
          log_info("run ", s, " seed ", sd);
          auto r = run_experiment(dataset, c.experiment, s, sd, c.out);
          for (auto& e : r.checkpoint_entries) index.push_back(e);
          for (auto& snap : r.snapshots) snapshots.push_back(std::move(snap));
          std::cout << r.log_path.string() << '\n';
        }
      }
      write_checkpoint_index(c.out, index);
      if (run_eval) {
        const auto rows = eval_from_scratch(snapshots, dataset, c.eval);
        auto os = open_csv(c.out / "eval.csv");
        write_eval_csv(os, rows);
      }
    } else if (*ev) {
      const auto c = read_run_config(ev_config);
      const auto dataset = load_run_dataset(c);
      const fs::path index = ev_index.empty() ? c.out / "checkpoints" / "index.json" : fs::path(ev_index);
      const auto rows = eval_from_scratch(read_checkpoint_index(index), dataset, c.eval);
      auto os = open_csv(ev_out.empty() ? c.out / "eval.csv" : fs::path(ev_out));
      write_eval_csv(os, rows);
    } else if (*rs) {
      const auto rows = speed_report(read_logs(rs_logs), warmup);
      if (rs_out.empty()) {
        write_speed_csv(std::cout, rows);
      } else {
        auto os = open_csv(rs_out);
        write_speed_csv(os, rows);
      }
    } else if (*rmg) {
      const auto rep = margin_report(read_logs(rm_logs), window);
      auto series = open_csv(rm_prefix + "_series.csv");
      write_margin_series_csv(series, rep);
      auto hist = open_csv(rm_prefix + "_hist.csv");
      write_margin_histogram_csv(hist, rep);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
