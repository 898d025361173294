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

// Adversarial attacks in latent space. Each attack takes a labeled latent and
// returns a point near (ideally just across) the decoder's decision boundary.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ausds/decoder.hpp"
#include "ausds/error.hpp"
#include "ausds/linalg.hpp"
#include "ausds/store.hpp"

namespace ausds {

enum class AttackMethod { fgv, deepfool, cw };

inline std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::fgv:
      return "fgv";
    case AttackMethod::deepfool:
      return "deepfool";
    case AttackMethod::cw:
      return "cw";
  }
  return "?";
}

inline AttackMethod parse_attack_method(const std::string& s) {
  if (s == "fgv") return AttackMethod::fgv;
  if (s == "deepfool") return AttackMethod::deepfool;
  if (s == "cw") return AttackMethod::cw;
  throw ConfigError("unknown attack method '" + s + "'");
}

struct AttackConfig {
  AttackMethod method = AttackMethod::fgv;
  // FGV
  double lambda = 0.5;
  bool line_search = false;
  std::vector<double> line_search_lambdas{0.25, 0.5, 1.0, 2.0, 4.0};
  // DeepFool
  std::size_t max_iter = 50;
  double overshoot = 0.02;
  // C&W, untargeted, squared L2 distance
  double cw_c = 1.0;
  std::size_t cw_steps = 100;
  double cw_step_size = 0.05;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    for (double l : line_search_lambdas) {
      if (!(l >= 0.0)) throw ConfigError("line-search lambdas must be >= 0");
    }
    if (line_search && line_search_lambdas.empty()) throw ConfigError("line search needs at least one lambda");
    if (!(overshoot >= 0.0)) throw ConfigError("overshoot must be >= 0");
    if (!(cw_c > 0.0)) throw ConfigError("C&W constant must be > 0");
    if (!(cw_step_size > 0.0)) throw ConfigError("C&W step size must be > 0");
  }
};

struct AdversarialPoint {
  SampleId origin_id = 0;
  Vector x;               // attacked latent (pooled for sequences)
  Vector x_prime;         // returned adversarial point
  Vector boundary_point;  // DeepFool: before overshoot; otherwise == x_prime
  double perturbation_norm = 0.0;
  bool success = false;
  bool degenerate = false;  // zero gradient / no usable direction
  std::size_t iterations = 0;
  std::size_t model_evals = 0;
  std::uint64_t version = 0;
  std::vector<double> objective_trace;  // C&W accepted objectives
};

// A labeled latent to attack: token rows at encoder `version` (one row for
// classification) and the anchor label.
struct AttackInput {
  SampleId id = 0;
  Matrix tokens;
  Label label;
  std::uint64_t version = 0;
};

namespace detail {

inline Vector pooled(const Matrix& tokens) {
  Vector x(tokens.cols, 0.0);
  for (std::size_t t = 0; t < tokens.rows; ++t) axpy(1.0, tokens.row(t), x);
  for (double& v : x) v /= static_cast<double>(tokens.rows);
  return x;
}

inline Matrix shifted(const Matrix& tokens, std::span<const double> delta) {
  Matrix out = tokens;
  for (std::size_t t = 0; t < out.rows; ++t) axpy(1.0, delta, out.row(t));
  return out;
}

inline void finish(AdversarialPoint& p) {
  p.perturbation_norm = std::sqrt(squared_distance(p.x_prime, p.x));
  if (p.boundary_point.empty()) p.boundary_point = p.x_prime;
}

inline void require_single_latent(const Matrix& tokens, const char* method) {
  if (tokens.rows != 1) {
    throw ConfigError(std::string(method) + " is only available for classification (single latent) inputs");
  }
}

}  // namespace detail

// x' = x + lambda * grad_x CE(x, y). For token sequences the gradient is the
// one of a perturbation shared by all tokens, and success means any token
// prediction changed.
inline AdversarialPoint fgv(const DecoderModel& decoder, const Matrix& tokens, const Label& label, double lambda,
                            std::span<const double> search_lambdas = {}) {
  if (tokens.rows == 0) throw ShapeError("fgv: empty input");
  AdversarialPoint p;
  p.x = detail::pooled(tokens);
  const auto lg = loss_and_input_grad(decoder, tokens, label);
  const Label before = predict(decoder, tokens);
  p.model_evals = 2;
  p.iterations = 1;
  const double gnorm = norm2(lg.input_grad);
  if (gnorm == 0.0 || !std::isfinite(gnorm)) {
    p.x_prime = p.x;
    p.degenerate = lambda > 0.0 || !search_lambdas.empty();
    detail::finish(p);
    return p;
  }
  auto try_step = [&](double step) {
    Vector delta(lg.input_grad);
    for (double& v : delta) v *= step;
    p.x_prime = p.x;
    axpy(1.0, delta, p.x_prime);
    ++p.model_evals;
    p.success = predict(decoder, detail::shifted(tokens, delta)) != before;
  };
  if (search_lambdas.empty()) {
    try_step(lambda);
  } else {
    p.iterations = 0;
    for (double step : search_lambdas) {
      ++p.iterations;
      try_step(step);
      if (p.success) break;
    }
  }
  detail::finish(p);
  return p;
}

// Multiclass DeepFool. Each iteration linearizes every class boundary at the
// current (overshot) point and moves by the smallest linearized projection.
inline AdversarialPoint deepfool(const DecoderModel& decoder, std::span<const double> x, std::size_t max_iter,
                                 double overshoot) {
  if (decoder.output < 2) throw ConfigError("deepfool needs at least two classes");
  AdversarialPoint p;
  p.x.assign(x.begin(), x.end());
  const auto k0 = predict(decoder, x);
  p.model_evals = 1;
  Vector r_tot(x.size(), 0.0);
  Vector current = p.x;
  std::int32_t label = k0;
  while (label == k0 && p.iterations < max_iter) {
    const auto z = logits(decoder, current);
    const auto jac = logit_jacobian(decoder, current);
    p.model_evals += 2;
    double best = std::numeric_limits<double>::infinity();
    Vector best_w;
    double best_f = 0.0;
    Vector w(x.size());
    for (std::size_t k = 0; k < decoder.output; ++k) {
      if (static_cast<std::int32_t>(k) == k0) continue;
      for (std::size_t c = 0; c < x.size(); ++c) w[c] = jac(k, c) - jac(k0, c);
      const double wn = norm2(w);
      if (wn == 0.0) continue;
      const double f = z[k] - z[k0];
      const double score = std::abs(f) / wn;
      if (score < best) {
        best = score;
        best_w = w;
        best_f = f;
      }
    }
    ++p.iterations;
    if (best_w.empty()) {
      p.degenerate = true;
      break;
    }
    const double wn2 = dot(best_w, best_w);
    axpy(std::abs(best_f) / wn2, best_w, r_tot);
    current = p.x;
    axpy(1.0 + overshoot, r_tot, current);
    label = predict(decoder, current);
    ++p.model_evals;
  }
  p.boundary_point = p.x;
  axpy(1.0, r_tot, p.boundary_point);
  p.x_prime = current;
  p.success = label != k0;
  detail::finish(p);
  return p;
}

// Untargeted C&W: minimize ||x' - x||^2 + c * g(x') with
// g(x') = max(z_orig(x') - max_{m != orig} z_m(x'), 0), by gradient descent
// with a monotone acceptance rule (rejected steps halve the step size).
inline AdversarialPoint cw(const DecoderModel& decoder, std::span<const double> x, std::int32_t anchor,
                           double c, std::size_t steps, double step_size) {
  if (decoder.output < 2) throw ConfigError("cw needs at least two classes");
  if (anchor < 0 || static_cast<std::size_t>(anchor) >= decoder.output) throw RangeError("cw: anchor label out of range");
  AdversarialPoint p;
  p.x.assign(x.begin(), x.end());
  const auto k0 = predict(decoder, x);
  p.model_evals = 1;
  auto g_of = [&](const Vector& z, std::size_t* runner_up) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < z.size(); ++m) {
      if (static_cast<std::int32_t>(m) == anchor) continue;
      if (z[m] > best) {
        best = z[m];
        if (runner_up) *runner_up = m;
      }
    }
    return std::max(z[anchor] - best, 0.0);
  };
  if (k0 != anchor) {
    // already on the other side of the anchor's boundary
    p.x_prime = p.x;
    p.objective_trace.push_back(0.0);
    detail::finish(p);
    return p;
  }
  auto objective = [&](const Vector& xp) {
    const auto z = logits(decoder, xp);
    ++p.model_evals;
    return squared_distance(xp, p.x) + c * g_of(z, nullptr);
  };
  Vector cur = p.x;
  double cur_obj = objective(cur);
  if (!std::isfinite(cur_obj)) {
    p.x_prime = p.x;
    detail::finish(p);
    return p;
  }
  p.objective_trace.push_back(cur_obj);
  Vector best_success;
  double best_success_d2 = std::numeric_limits<double>::infinity();
  Vector best_any = cur;
  double best_any_obj = cur_obj;
  double eta = step_size;
  Vector grad(x.size());
  for (std::size_t it = 0; it < steps; ++it) {
    ++p.iterations;
    const auto z = logits(decoder, cur);
    ++p.model_evals;
    std::size_t runner_up = 0;
    const double g = g_of(z, &runner_up);
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * (cur[i] - p.x[i]);
    if (g > 0.0) {
      const auto jac = logit_jacobian(decoder, cur);
      ++p.model_evals;
      for (std::size_t i = 0; i < x.size(); ++i) grad[i] += c * (jac(anchor, i) - jac(runner_up, i));
    }
    if (norm2(grad) == 0.0) break;
    Vector next = cur;
    axpy(-eta, grad, next);
    const double next_obj = objective(next);
    if (!std::isfinite(next_obj)) {
      // abort this point; report the best iterate found so far as failed
      best_success.clear();
      break;
    }
    if (next_obj <= cur_obj) {
      cur = std::move(next);
      cur_obj = next_obj;
      p.objective_trace.push_back(cur_obj);
      if (cur_obj < best_any_obj) {
        best_any_obj = cur_obj;
        best_any = cur;
      }
      if (predict(decoder, cur) != k0) {
        const double d2 = squared_distance(cur, p.x);
        if (d2 < best_success_d2) {
          best_success_d2 = d2;
          best_success = cur;
        }
      }
      ++p.model_evals;
    } else {
      eta *= 0.5;
    }
  }
  if (!best_success.empty()) {
    p.x_prime = std::move(best_success);
    p.success = true;
  } else {
    p.x_prime = std::move(best_any);
    p.success = false;
  }
  detail::finish(p);
  return p;
}

// Applies the configured attack to every input, preserving order. Failed
// points are kept with success == false.
inline std::vector<AdversarialPoint> attack_batch(const DecoderModel& decoder, std::span<const AttackInput> batch,
                                                  const AttackConfig& cfg,
                                                  std::optional<std::uint64_t> expected_version = std::nullopt) {
  cfg.validate();
  std::vector<AdversarialPoint> out;
  if (batch.empty()) return out;
  const auto version = expected_version.value_or(batch.front().version);
  for (const auto& in : batch) {
    if (in.version != version) {
      throw StalenessError("attack_batch: input " + std::to_string(in.id) + " has encoder version " +
                           std::to_string(in.version) + ", expected " + std::to_string(version));
    }
  }
  out.reserve(batch.size());
  for (const auto& in : batch) {
    AdversarialPoint p;
    switch (cfg.method) {
      case AttackMethod::fgv:
        p = cfg.line_search ? fgv(decoder, in.tokens, in.label, cfg.lambda, cfg.line_search_lambdas)
                            : fgv(decoder, in.tokens, in.label, cfg.lambda);
        break;
      case AttackMethod::deepfool:
        detail::require_single_latent(in.tokens, "deepfool");
        p = deepfool(decoder, in.tokens.row(0), cfg.max_iter, cfg.overshoot);
        break;
      case AttackMethod::cw:
        detail::require_single_latent(in.tokens, "cw");
        p = cw(decoder, in.tokens.row(0), in.label.at(0), cfg.cw_c, cfg.cw_steps, cfg.cw_step_size);
        break;
    }
    p.origin_id = in.id;
    p.version = in.version;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ausds
