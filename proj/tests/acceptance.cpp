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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ausds.hpp"
#include "fixtures.hpp"

using namespace ausds;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double norm_of(const Vector& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// 1. cross-entropy gradients against central differences
Outcome gradient_soundness() {
  constexpr std::size_t kTriples = 25, kIn = 6, kOut = 4, kHidden = 5;
  constexpr double h = 1e-5;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  std::size_t triples = 0;
  for (auto arch : {Architecture::linear, Architecture::hidden_tanh}) {
    for (std::size_t t = 0; t < kTriples; ++t, ++triples) {
      auto m = ausds_test::random_model(arch, kIn, kOut, kHidden, 1000 + triples);
      const auto x = random_vec(kIn, rng);
      const int y = static_cast<int>(rng() % kOut);
      const auto lg = loss_and_input_grad(m, x, y);
      for (std::size_t i = 0; i < kIn; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (ausds_test::oracle_ce(m, xp, y) - ausds_test::oracle_ce(m, xm, y)) / (2 * h);
        worst = std::max(worst, ausds_test::rel_err(lg.input_grad[i], fd));
      }
      Matrix tokens(1, kIn);
      std::copy(x.begin(), x.end(), tokens.data.begin());
      Vector grad(m.params.size(), 0.0);
      accumulate_param_grad(m, tokens, Label{y}, grad);
      for (std::size_t i = 0; i < m.params.size(); ++i) {
        const double keep = m.params[i];
        m.params[i] = keep + h;
        const double up = ausds_test::oracle_ce(m, x, y);
        m.params[i] = keep - h;
        const double down = ausds_test::oracle_ce(m, x, y);
        m.params[i] = keep;
        worst = std::max(worst, ausds_test::rel_err(grad[i], (up - down) / (2 * h)));
      }
    }
  }
  return {worst < 1e-4, fmt("%zu triples, max relative error %.2e", triples, worst)};
}

DecoderModel binary_affine(const Vector& w, double b) {
  auto m = DecoderModel::make(Architecture::linear, w.size(), 2);
  for (std::size_t c = 0; c < w.size(); ++c) m.weights(0)[w.size() + c] = w[c];
  m.bias(0)[1] = b;
  return m;
}

double brute_force_min_perturbation(const DecoderModel& m, const Vector& x, int rays = 7200) {
  const auto k0 = predict(m, x);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rays; ++i) {
    const double th = 2.0 * std::numbers::pi * i / rays;
    const Vector dir{std::cos(th), std::sin(th)};
    auto at = [&](double r) { return Vector{x[0] + r * dir[0], x[1] + r * dir[1]}; };
    double hi = 1e-3;
    while (hi < 1e4 && predict(m, at(hi)) == k0) hi *= 2.0;
    if (hi >= 1e4) continue;
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (predict(m, at(mid)) == k0 ? lo : hi) = mid;
    }
    best = std::min(best, hi);
  }
  return best;
}

// 2. DeepFool against the affine projection and a 2-D brute force
Outcome deepfool_exactness() {
  std::mt19937_64 rng(22);
  double worst_binary = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto w = random_vec(4, rng);
    const double b = std::normal_distribution<double>()(rng);
    const auto m = binary_affine(w, b);
    const auto x = random_vec(4, rng, 2.0);
    const auto p = deepfool(m, x, 50, 0.02);
    const double f = std::inner_product(w.begin(), w.end(), x.begin(), 0.0) + b;
    const double wn2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    Vector err(4), expect(4);
    for (std::size_t i = 0; i < 4; ++i) {
      expect[i] = -f * w[i] / wn2;
      err[i] = (p.boundary_point[i] - x[i]) - expect[i];
    }
    worst_binary = std::max(worst_binary, norm_of(err) / norm_of(expect));
  }
  double worst_multi = 0.0;
  std::size_t failed = 0;
  for (int t = 0; t < 20; ++t) {
    const auto m = ausds_test::random_model(Architecture::linear, 2, 3, 0, 2000 + t, 1.0);
    const auto x = random_vec(2, rng);
    const auto p = deepfool(m, x, 50, 0.02);
    if (!p.success) {
      ++failed;
      continue;
    }
    const Vector delta{p.boundary_point[0] - x[0], p.boundary_point[1] - x[1]};
    const double oracle = brute_force_min_perturbation(m, x);
    worst_multi = std::max(worst_multi, std::abs(norm_of(delta) - oracle) / oracle);
  }
  return {worst_binary < 1e-3 && worst_multi <= 0.1 && failed == 0,
          fmt("binary max rel %.2e over 100, multiclass max rel %.3f over 20, %zu no-flip", worst_binary, worst_multi,
              failed)};
}

// 3. ball tree against an independent scan
Outcome knn_exactness() {
  constexpr std::size_t n = 10000, dim = 32, k = 10;
  std::mt19937_64 rng(33);
  std::normal_distribution<float> nd;
  std::vector<std::vector<float>> centers(8, std::vector<float>(dim));
  for (auto& c : centers)
    for (auto& v : c) v = 4.0f * nd(rng);
  std::vector<SampleId> ids;
  std::vector<float> v;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(static_cast<SampleId>(7 * i + 3));
    for (std::size_t j = 0; j < dim; ++j) v.push_back(centers[i % 8][j] + nd(rng));
  }
  const ExactIndex idx(ids, v, dim);
  std::size_t agree = 0;
  for (std::size_t qi = 0; qi < 1000; ++qi) {
    Vector q(dim);
    if (qi % 2 == 0) {
      const std::size_t anchor = rng() % n;
      for (std::size_t j = 0; j < dim; ++j) q[j] = v[anchor * dim + j] + 0.1 * nd(rng);
    } else {
      q = random_vec(dim, rng, 4.0);
    }
    std::vector<std::pair<double, SampleId>> all;
    all.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double t = static_cast<double>(v[i * dim + j]) - q[j];
        d2 += t * t;
      }
      all.emplace_back(d2, ids[i]);
    }
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    const auto got = idx.search(q, k);
    bool same = got.size() == k;
    for (std::size_t r = 0; same && r < k; ++r) {
      same = got[r].id == all[r].second && got[r].distance2 == all[r].first;
    }
    agree += same;
  }
  return {agree == 1000, fmt("%zu/1000 queries identical (k=%zu, n=%zu, d=%zu)", agree, k, n, dim)};
}

// 4. entropy analytics
Outcome entropy_analytics() {
  double worst_uniform = 0.0;
  for (std::size_t c = 2; c <= 10; ++c) {
    const Vector p(c, 1.0 / static_cast<double>(c));
    worst_uniform = std::max(worst_uniform, std::abs(entropy_me(p) - std::log(static_cast<double>(c))));
  }
  const double one_hot = entropy_me(Vector{0.0, 1.0, 0.0});
  std::mt19937_64 rng(44);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  double worst_tte = 0.0;
  for (int s = 0; s < 100; ++s) {
    const std::size_t len = 1 + rng() % 30, c = 2 + rng() % 9;
    std::vector<Vector> seq(len, Vector(c));
    double expect = 0.0;
    for (auto& p : seq) {
      double sum = 0.0;
      for (auto& x : p) sum += x = gamma(rng);
      for (auto& x : p) {
        x /= sum;
        if (x > 0.0) expect -= x * std::log(x);
      }
    }
    worst_tte = std::max(worst_tte, std::abs(entropy_tte(seq) - expect));
  }
  return {worst_uniform < 1e-9 && one_hot == 0.0 && worst_tte < 1e-9,
          fmt("uniform max err %.1e, one-hot %.1e, sequence max err %.1e", worst_uniform, one_hot, worst_tte)};
}

SyntheticSpec blob_spec(std::uint64_t seed, double noise, std::size_t test_per_class) {
  SyntheticSpec s;
  s.dim = 16;
  s.classes = 3;
  s.per_class = 10000;
  s.separation = 1.0;
  s.boundary_noise = noise;
  s.test_per_class = test_per_class;
  s.seed = seed;
  return s;
}

ExperimentConfig strategy_config(const std::string& strategy, std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  RunConfig::apply_strategy(c.sampler, strategy);
  c.sampler.attack.line_search = true;
  return c;
}

double windowed_margin(const std::vector<StepRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = records.size() / 5; i < records.size(); ++i) {
    for (const auto& m : records[i].margins) {
      if (m) {
        sum += *m;
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

// 5. AUSDS selections sit closer to the boundary than random ones
Outcome margin_property() {
  constexpr std::size_t kSeeds = 5;
  std::vector<double> diff;
  std::string per_seed;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const auto d = to_dataset(generate_synthetic(blob_spec(100 + s, 0.0, 0)));
    double m[2];
    int k = 0;
    for (const char* strat : {"rm", "ausds-fgv"}) {
      ActiveLearner a(d, make_initial_pool(d, s, kDefaultSeedFraction), strategy_config(strat, s));
      a.run();
      m[k++] = windowed_margin(a.records());
    }
    diff.push_back(m[0] - m[1]);
    per_seed += fmt(" %.3f/%.3f", m[1], m[0]);
  }
  std::mt19937_64 rng(55);
  std::vector<double> means;
  for (int b = 0; b < 10000; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kSeeds; ++i) sum += diff[rng() % kSeeds];
    means.push_back(sum / kSeeds);
  }
  std::sort(means.begin(), means.end());
  const double lower = means[static_cast<std::size_t>(0.025 * static_cast<double>(means.size()))];
  return {lower > 0.0, fmt("ausds/rm margin per seed%s; bootstrap 2.5%% of rm-ausds %.4f", per_seed.c_str(), lower)};
}

// 6. from-scratch accuracy of AUSDS vs RM at each budget
Outcome sampling_effectiveness() {
  constexpr std::size_t kSeeds = 5;
  std::map<std::string, std::vector<double>> acc;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const auto d = to_dataset(generate_synthetic(blob_spec(200 + s, 0.1, 1000)));
    for (const char* strat : {"rm", "ausds-fgv"}) {
      ActiveLearner a(d, make_initial_pool(d, s, kDefaultSeedFraction), strategy_config(strat, s));
      a.run();
      auto& row = acc[strat];
      row.resize(a.checkpoints().size(), 0.0);
      for (std::size_t i = 0; i < a.checkpoints().size(); ++i) {
        row[i] += train_and_score(d, a.checkpoints()[i].snapshot, EvalConfig{}, s) / kSeeds;
      }
    }
  }
  const auto& rm = acc["rm"];
  const auto& au = acc["ausds-fgv"];
  std::size_t wins = 0;
  std::string detail = "ausds/rm mean accuracy";
  for (std::size_t i = 0; i < rm.size(); ++i) {
    wins += au[i] >= rm[i];
    detail += fmt(" %.4f/%.4f", au[i], rm[i]);
  }
  detail += fmt("; ausds >= rm at %zu/%zu budgets", wins, rm.size());
  return {rm.size() == 5 && wins >= 4, detail};
}

// 7. selection cost of AUSDS vs full-scan US at two pool sizes
Outcome speed_contract() {
  constexpr std::size_t kSteps = 30;
  std::vector<ExperimentLog> logs;
  std::map<std::pair<std::string, std::size_t>, const ExperimentLog*> by_run;
  std::vector<std::size_t> sizes{10000, 100000};
  for (std::size_t n : sizes) {
    SyntheticSpec s;
    s.dim = 64;
    s.classes = 3;
    s.per_class = (n + 2) / 3;
    s.intrinsic_dim = 4;
    s.separation = 1.0;
    s.seed = 5;
    const auto d = to_dataset(generate_synthetic(s));
    for (const char* strat : {"us", "ausds-fgv"}) {
      auto c = strategy_config(strat, 0);
      c.sampler.us_scan_interval = 0;
      c.loop.max_steps = kSteps;
      ActiveLearner a(d, make_initial_pool(d, 0, c.seed_fraction), c);
      std::ostringstream os;
      a.set_log_stream(&os);
      a.run();
      std::istringstream is(os.str());
      logs.push_back(parse_log(is));
    }
  }
  std::map<std::pair<std::string, std::size_t>, SpeedRow> rows;
  for (const auto& r : speed_report(logs)) rows[{r.strategy, r.pool_size}] = r;
  std::vector<std::size_t> pools;
  for (const auto& [key, r] : rows) {
    if (std::find(pools.begin(), pools.end(), key.second) == pools.end()) pools.push_back(key.second);
  }
  std::sort(pools.begin(), pools.end());
  if (pools.size() != 2) return {false, "expected two pool sizes in the speed report"};
  const auto& au_small = rows[{"ausds-fgv", pools[0]}];
  const auto& au_large = rows[{"ausds-fgv", pools[1]}];
  const auto& us_small = rows[{"us", pools[0]}];
  const auto& us_large = rows[{"us", pools[1]}];
  const double speedup = au_large.speedup.value_or(0.0);
  const double au_growth = au_large.mean_select_us / au_small.mean_select_us;
  const double us_growth = us_large.mean_select_us / us_small.mean_select_us;
  const double eval_growth = au_large.mean_model_evals / au_small.mean_model_evals;

  const SamplerConfig sc = strategy_config("ausds-fgv", 0).sampler;
  const std::size_t attack_evals = 2 + sc.attack.line_search_lambdas.size();
  std::size_t au_over = 0, us_mismatch = 0, us_steps = 0;
  for (const auto& log : logs) {
    for (std::size_t i = kWarmupSteps; i < log.steps.size(); ++i) {
      const auto& st = log.steps[i];
      const std::size_t batch = st.attacks_total;
      if (log.header.strategy == "us") {
        ++us_steps;
        us_mismatch += !st.full_scan || st.model_evals != st.unlabeled + st.selected.size();
      } else {
        au_over += st.model_evals > attack_evals * batch + batch * (sc.knn_k + 1);
      }
    }
  }
  const bool pass = speedup >= 10.0 && au_growth <= 3.0 && us_growth >= 5.0 && us_growth <= 20.0 &&
                    eval_growth <= 1.5 && au_over == 0 && us_mismatch == 0 && us_steps > 0;
  return {pass, fmt("speedup %.1fx at %zu; ausds growth %.2fx, us growth %.2fx; ausds evals %.0f -> %.0f, "
                    "%zu steps over bound; us evals != |T| on %zu/%zu steps",
                    speedup, pools[1], au_growth, us_growth, au_small.mean_model_evals, au_large.mean_model_evals,
                    au_over, us_mismatch, us_steps)};
}

// 8. loop invariants and replay over 500 steps
Outcome loop_invariants() {
  constexpr std::size_t kSteps = 500;
  const auto d = to_dataset(generate_synthetic(blob_spec(300, 0.1, 0)));
  std::size_t violations = 0, mismatched = 0, short_runs = 0;
  std::string first;
  for (const char* strat : {"rm", "us", "ausds-fgv", "ausds-deepfool"}) {
    std::string bytes[2];
    for (int rep = 0; rep < 2; ++rep) {
      auto c = strategy_config(strat, 7);
      c.loop.max_steps = kSteps;
      c.loop.checkpoints = {0.02, 0.04, 0.06, 0.08, 0.10, 0.9};
      c.loop.log_timings = false;
      ActiveLearner a(d, make_initial_pool(d, 7, c.seed_fraction), c);
      std::ostringstream os;
      a.set_log_stream(&os);
      a.initialize();
      while (!a.done()) {
        a.run_step();
        if (rep == 0) {
          for (const auto& v : a.verify_invariants()) {
            if (violations++ == 0) first = std::string(strat) + ": " + v;
          }
        }
      }
      short_runs += a.records().size() != kSteps;
      bytes[rep] = os.str();
    }
    mismatched += bytes[0] != bytes[1] || bytes[0].empty();
  }
  return {violations == 0 && mismatched == 0 && short_runs == 0,
          fmt("4 strategies x %zu steps: %zu violations%s%s, %zu replay mismatches, %zu short runs", kSteps,
              violations, first.empty() ? "" : ", first: ", first.c_str(), mismatched, short_runs)};
}

}  // namespace

int main() {
  set_log_level(LogLevel::error);
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient soundness", 10, gradient_soundness},
      {2, "deepfool exactness", 30, deepfool_exactness},
      {3, "knn exactness", 30, knn_exactness},
      {4, "entropy analytics", 10, entropy_analytics},
      {5, "margin property", 300, margin_property},
      {6, "sampling effectiveness", 600, sampling_effectiveness},
      {7, "speed contract", 600, speed_contract},
      {8, "loop invariants", 3600, loop_invariants},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Stopwatch sw;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = static_cast<double>(sw.elapsed_us()) / 1e6;
    const bool ok = o.pass && secs < c.limit_s;
    failed += !ok;
    std::printf("%s %d %s (%.1f s, limit %.0f s): %s\n", ok ? "PASS" : "FAIL", c.id, c.name, secs, c.limit_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
