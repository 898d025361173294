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

// Speed and margin reports. Both are pure functions of parsed logs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ausds/error.hpp"
#include "ausds/experiment_log.hpp"
#include "ausds/log.hpp"

namespace ausds {

inline constexpr std::size_t kWarmupSteps = 5;
inline constexpr std::size_t kHistogramBins = 30;

namespace detail {

inline std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

struct SpeedRow {
  std::string strategy;
  std::size_t pool_size = 0;
  std::size_t runs = 0;
  std::size_t steps = 0;  // measured steps, warm-up excluded
  double mean_select_us = 0.0;
  double mean_step_us = 0.0;
  double mean_model_evals = 0.0;
  double mean_knn_distance_evals = 0.0;
  std::optional<double> speedup;  // US select time / this select time, same pool size
};

// Mean per-selection-step wall-clock per (strategy, pool size), first
// `warmup` steps of each run excluded.
inline std::vector<SpeedRow> speed_report(std::span<const ExperimentLog> logs, std::size_t warmup = kWarmupSteps) {
  struct Acc {
    std::size_t runs = 0, steps = 0;
    double select = 0, step = 0, evals = 0, knn = 0;
  };
  std::map<std::pair<std::size_t, std::string>, Acc> acc;
  for (const auto& log : logs) {
    auto& a = acc[{log.header.pool_size, log.header.strategy}];
    ++a.runs;
    for (std::size_t i = warmup; i < log.steps.size(); ++i) {
      const auto& s = log.steps[i];
      if (!s.timings) throw FormatError("speed report: log for " + log.header.strategy + " has no stage timings");
      ++a.steps;
      a.select += static_cast<double>(s.timings->select_us);
      a.step += static_cast<double>(s.timings->step_us);
      a.evals += static_cast<double>(s.model_evals);
      a.knn += static_cast<double>(s.knn_distance_evals);
    }
  }
  std::vector<SpeedRow> rows;
  std::map<std::size_t, double> us_time;
  for (const auto& [key, a] : acc) {
    SpeedRow r;
    r.pool_size = key.first;
    r.strategy = key.second;
    r.runs = a.runs;
    r.steps = a.steps;
    if (a.steps == 0) {
      log_warn("speed report: ", r.strategy, " at |T|=", r.pool_size, " has no steps after warm-up");
    } else {
      const double n = static_cast<double>(a.steps);
      r.mean_select_us = a.select / n;
      r.mean_step_us = a.step / n;
      r.mean_model_evals = a.evals / n;
      r.mean_knn_distance_evals = a.knn / n;
      if (r.strategy == "us") us_time[r.pool_size] = r.mean_select_us;
    }
    rows.push_back(r);
  }
  bool missing_us = false;
  for (auto& r : rows) {
    auto it = us_time.find(r.pool_size);
    if (it == us_time.end()) {
      missing_us = true;
      continue;
    }
    if (r.steps > 0 && r.mean_select_us > 0.0) r.speedup = it->second / r.mean_select_us;
  }
  if (missing_us) log_warn("speed report: no US log for some pool sizes; ratios omitted there");
  return rows;
}

inline void write_speed_csv(std::ostream& os, std::span<const SpeedRow> rows) {
  os << "strategy,pool_size,runs,steps,mean_select_us,mean_step_us,mean_model_evals,mean_knn_distance_evals,"
        "speedup_vs_us\n";
  for (const auto& r : rows) {
    os << r.strategy << ',' << r.pool_size << ',' << r.runs << ',' << r.steps << ',' << detail::fmt(r.mean_select_us)
       << ',' << detail::fmt(r.mean_step_us) << ',' << detail::fmt(r.mean_model_evals) << ','
       << detail::fmt(r.mean_knn_distance_evals) << ',' << (r.speedup ? detail::fmt(*r.speedup) : std::string()) << '\n';
  }
}

struct MarginWindow {
  std::optional<std::size_t> begin;  // first step in the window
  std::optional<std::size_t> end;    // one past the last step
  double last_fraction = 0.2;        // used when begin is not set
};

struct MarginPoint {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double mean_margin = 0.0;
  std::size_t count = 0;
};

struct MarginHistogram {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> counts = std::vector<std::size_t>(kHistogramBins, 0);
  double sum = 0.0;
  std::size_t total = 0;

  double mean() const { return total ? sum / static_cast<double>(total) : 0.0; }
};

struct MarginReport {
  std::vector<MarginPoint> series;
  std::vector<MarginHistogram> histograms;  // one per log
};

inline std::size_t margin_bin(double m) {
  const auto b = static_cast<std::size_t>(std::clamp(m, 0.0, 1.0) * static_cast<double>(kHistogramBins));
  return std::min(b, kHistogramBins - 1);
}

inline MarginReport margin_report(std::span<const ExperimentLog> logs, const MarginWindow& window = {}) {
  MarginReport rep;
  for (const auto& log : logs) {
    const std::size_t n = log.steps.size();
    for (const auto& s : log.steps) {
      MarginPoint p{log.header.strategy, log.header.seed, s.step, 0.0, 0};
      for (const auto& m : s.margins) {
        if (!m) continue;
        p.mean_margin += *m;
        ++p.count;
      }
      if (p.count == 0) continue;
      p.mean_margin /= static_cast<double>(p.count);
      rep.series.push_back(p);
    }
    std::size_t begin = window.begin.value_or(
        n - static_cast<std::size_t>(std::llround(window.last_fraction * static_cast<double>(n))));
    std::size_t end = window.end.value_or(n);
    if (end > n || begin > end) {
      log_warn("margin report: window [", begin, ", ", end, ") exceeds the ", n, " logged steps of ",
               log.header.strategy, " seed ", log.header.seed, "; clamped");
      end = std::min(end, n);
      begin = std::min(begin, end);
    }
    MarginHistogram h;
    h.strategy = log.header.strategy;
    h.seed = log.header.seed;
    h.begin = begin;
    h.end = end;
    for (std::size_t i = begin; i < end; ++i) {
      for (const auto& m : log.steps[i].margins) {
        if (!m) continue;
        ++h.counts[margin_bin(*m)];
        h.sum += *m;
        ++h.total;
      }
    }
    rep.histograms.push_back(std::move(h));
  }
  return rep;
}

// step,strategy,seed,mean_margin,count
inline void write_margin_series_csv(std::ostream& os, const MarginReport& r) {
  os << "step,strategy,seed,mean_margin,count\n";
  for (const auto& p : r.series) {
    os << p.step << ',' << p.strategy << ',' << p.seed << ',' << detail::fmt(p.mean_margin, "%.9g") << ',' << p.count
       << '\n';
  }
}

// strategy,seed,window_begin,window_end,bin_lo,bin_hi,count
inline void write_margin_histogram_csv(std::ostream& os, const MarginReport& r) {
  os << "strategy,seed,window_begin,window_end,bin_lo,bin_hi,count\n";
  for (const auto& h : r.histograms) {
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      os << h.strategy << ',' << h.seed << ',' << h.begin << ',' << h.end << ','
         << detail::fmt(static_cast<double>(b) / kHistogramBins) << ','
         << detail::fmt(static_cast<double>(b + 1) / kHistogramBins) << ',' << h.counts[b] << '\n';
    }
  }
}

}  // namespace ausds
