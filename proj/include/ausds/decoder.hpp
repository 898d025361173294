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

// Decoder over the latent space: a softmax classifier (one latent per sample)
// or a per-token softmax tagger (one latent per token). Both are handled as
// sequences; a classification sample is a sequence of length one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ausds/error.hpp"
#include "ausds/formats.hpp"
#include "ausds/linalg.hpp"
#include "ausds/random.hpp"

namespace ausds {

enum class Architecture : std::uint32_t { linear = 0, hidden_tanh = 1 };

inline std::string to_string(Architecture a) { return a == Architecture::linear ? "linear" : "hidden_tanh"; }

inline Architecture parse_architecture(const std::string& s) {
  if (s == "linear") return Architecture::linear;
  if (s == "hidden_tanh" || s == "hidden") return Architecture::hidden_tanh;
  throw ConfigError("unknown decoder architecture '" + s + "'");
}

// Parameters live in one flat vector so optimizers and gradient checks can
// treat them uniformly. Layout:
//   linear:      W (out x in), b (out)
//   hidden_tanh: W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out)
struct DecoderModel {
  Architecture arch = Architecture::linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t output = 0;
  Vector params;

  static DecoderModel make(Architecture arch, std::size_t input_dim, std::size_t output, std::size_t hidden = 0) {
    if (input_dim == 0 || output == 0) throw ConfigError("decoder dimensions must be positive");
    if (arch == Architecture::hidden_tanh && hidden == 0) throw ConfigError("hidden width must be positive");
    DecoderModel m;
    m.arch = arch;
    m.input_dim = input_dim;
    m.output = output;
    m.hidden = arch == Architecture::linear ? 0 : hidden;
    m.params.assign(m.parameter_count(), 0.0);
    return m;
  }

  std::size_t parameter_count() const {
    if (arch == Architecture::linear) return output * input_dim + output;
    return hidden * input_dim + hidden + output * hidden + output;
  }

  // Uniform(-a, a) with a = scale * sqrt(6 / (fan_in + fan_out)); biases zero.
  void init_random(Rng& rng, double scale = 1.0) {
    auto fill = [&](std::size_t offset, std::size_t rows, std::size_t cols) {
      const double a = scale * std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-a, a);
      for (std::size_t i = 0; i < rows * cols; ++i) params[offset + i] = dist(rng);
    };
    std::fill(params.begin(), params.end(), 0.0);
    if (arch == Architecture::linear) {
      fill(0, output, input_dim);
    } else {
      fill(0, hidden, input_dim);
      fill(hidden * input_dim + hidden, output, hidden);
    }
  }

  std::span<double> weights(std::size_t layer) {
    auto [off, n] = block(layer, false);
    return {params.data() + off, n};
  }
  std::span<double> bias(std::size_t layer) {
    auto [off, n] = block(layer, true);
    return {params.data() + off, n};
  }
  std::span<const double> weights(std::size_t layer) const {
    auto [off, n] = block(layer, false);
    return {params.data() + off, n};
  }
  std::span<const double> bias(std::size_t layer) const {
    auto [off, n] = block(layer, true);
    return {params.data() + off, n};
  }

  bool operator==(const DecoderModel&) const = default;

 private:
  std::pair<std::size_t, std::size_t> block(std::size_t layer, bool is_bias) const {
    if (arch == Architecture::linear) {
      if (layer != 0) throw RangeError("linear decoder has one layer");
      return is_bias ? std::pair{output * input_dim, output} : std::pair{std::size_t{0}, output * input_dim};
    }
    const std::size_t w1 = hidden * input_dim;
    const std::size_t w2 = output * hidden;
    if (layer == 0) return is_bias ? std::pair{w1, hidden} : std::pair{std::size_t{0}, w1};
    if (layer == 1) return is_bias ? std::pair{w1 + hidden + w2, output} : std::pair{w1 + hidden, w2};
    throw RangeError("hidden decoder has two layers");
  }
};

namespace detail {

// Forward pass for a single latent. Keeps the hidden activation for backprop.
struct Forward {
  Vector hidden;  // tanh activations, empty for linear
  Vector logits;
};

inline void forward(const DecoderModel& m, std::span<const double> x, Forward& f) {
  if (x.size() != m.input_dim) {
    throw ShapeError("decoder input has dim " + std::to_string(x.size()) + ", expected " + std::to_string(m.input_dim));
  }
  f.logits.resize(m.output);
  if (m.arch == Architecture::linear) {
    const auto w = m.weights(0);
    const auto b = m.bias(0);
    for (std::size_t r = 0; r < m.output; ++r) {
      double s = b[r];
      const double* wr = w.data() + r * m.input_dim;
      for (std::size_t c = 0; c < m.input_dim; ++c) s += wr[c] * x[c];
      f.logits[r] = s;
    }
    return;
  }
  const auto w1 = m.weights(0);
  const auto b1 = m.bias(0);
  const auto w2 = m.weights(1);
  const auto b2 = m.bias(1);
  f.hidden.resize(m.hidden);
  for (std::size_t r = 0; r < m.hidden; ++r) {
    double s = b1[r];
    const double* wr = w1.data() + r * m.input_dim;
    for (std::size_t c = 0; c < m.input_dim; ++c) s += wr[c] * x[c];
    f.hidden[r] = std::tanh(s);
  }
  for (std::size_t r = 0; r < m.output; ++r) {
    double s = b2[r];
    const double* wr = w2.data() + r * m.hidden;
    for (std::size_t c = 0; c < m.hidden; ++c) s += wr[c] * f.hidden[c];
    f.logits[r] = s;
  }
}

// In place: logits -> probabilities. Returns log-sum-exp of the logits.
inline double softmax_inplace(Vector& z) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
    mx = std::max(mx, v);
  }
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return mx + std::log(sum);
}

// Backprop of d(loss)/d(logits) = dz through one latent. Accumulates parameter
// gradients into grad_params (if non-empty) and writes d(loss)/dx into dx (if
// non-empty).
inline void backward(const DecoderModel& m, std::span<const double> x, const Forward& f, std::span<const double> dz,
                     std::span<double> grad_params, std::span<double> dx) {
  if (m.arch == Architecture::linear) {
    const auto w = m.weights(0);
    if (!grad_params.empty()) {
      for (std::size_t r = 0; r < m.output; ++r) {
        double* g = grad_params.data() + r * m.input_dim;
        for (std::size_t c = 0; c < m.input_dim; ++c) g[c] += dz[r] * x[c];
        grad_params[m.output * m.input_dim + r] += dz[r];
      }
    }
    if (!dx.empty()) {
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::size_t r = 0; r < m.output; ++r) {
        const double* wr = w.data() + r * m.input_dim;
        for (std::size_t c = 0; c < m.input_dim; ++c) dx[c] += dz[r] * wr[c];
      }
    }
    return;
  }
  const auto w1 = m.weights(0);
  const auto w2 = m.weights(1);
  const std::size_t off_b1 = m.hidden * m.input_dim;
  const std::size_t off_w2 = off_b1 + m.hidden;
  const std::size_t off_b2 = off_w2 + m.output * m.hidden;
  Vector da(m.hidden, 0.0);
  for (std::size_t r = 0; r < m.output; ++r) {
    const double* wr = w2.data() + r * m.hidden;
    for (std::size_t c = 0; c < m.hidden; ++c) da[c] += dz[r] * wr[c];
  }
  for (std::size_t c = 0; c < m.hidden; ++c) da[c] *= 1.0 - f.hidden[c] * f.hidden[c];
  if (!grad_params.empty()) {
    for (std::size_t r = 0; r < m.output; ++r) {
      double* g = grad_params.data() + off_w2 + r * m.hidden;
      for (std::size_t c = 0; c < m.hidden; ++c) g[c] += dz[r] * f.hidden[c];
      grad_params[off_b2 + r] += dz[r];
    }
    for (std::size_t r = 0; r < m.hidden; ++r) {
      double* g = grad_params.data() + r * m.input_dim;
      for (std::size_t c = 0; c < m.input_dim; ++c) g[c] += da[r] * x[c];
      grad_params[off_b1 + r] += da[r];
    }
  }
  if (!dx.empty()) {
    std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t r = 0; r < m.hidden; ++r) {
      const double* wr = w1.data() + r * m.input_dim;
      for (std::size_t c = 0; c < m.input_dim; ++c) dx[c] += da[r] * wr[c];
    }
  }
}

inline void check_label(const DecoderModel& m, std::int32_t y) {
  if (y < 0 || static_cast<std::size_t>(y) >= m.output) {
    throw RangeError("label " + std::to_string(y) + " outside [0, " + std::to_string(m.output) + ")");
  }
}

}  // namespace detail

inline Vector logits(const DecoderModel& m, std::span<const double> x) {
  detail::Forward f;
  detail::forward(m, x, f);
  return std::move(f.logits);
}

inline Vector predict_proba(const DecoderModel& m, std::span<const double> x) {
  detail::Forward f;
  detail::forward(m, x, f);
  detail::softmax_inplace(f.logits);
  return std::move(f.logits);
}

// One distribution per token (row of `tokens`).
inline std::vector<Vector> predict_proba(const DecoderModel& m, const Matrix& tokens) {
  std::vector<Vector> out;
  out.reserve(tokens.rows);
  for (std::size_t t = 0; t < tokens.rows; ++t) out.push_back(predict_proba(m, tokens.row(t)));
  return out;
}

// Index of the largest entry, ties resolved towards the smaller index.
inline std::int32_t argmax(std::span<const double> v) {
  return static_cast<std::int32_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::int32_t predict(const DecoderModel& m, std::span<const double> x) { return argmax(logits(m, x)); }

inline Label predict(const DecoderModel& m, const Matrix& tokens) {
  Label out(tokens.rows);
  for (std::size_t t = 0; t < tokens.rows; ++t) out[t] = predict(m, tokens.row(t));
  return out;
}

// Largest minus second-largest probability.
inline double margin_of(std::span<const double> probs) {
  if (probs.size() < 2) throw ConfigError("margin needs at least two classes");
  double first = -1.0, second = -1.0;
  for (double p : probs) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return first - second;
}

inline double margin(const DecoderModel& m, std::span<const double> x) {
  if (m.output < 2) throw ConfigError("margin needs at least two classes");
  return margin_of(predict_proba(m, x));
}

struct LossAndGrad {
  double loss = 0.0;
  Vector input_grad;
};

// Cross entropy (natural log) and its gradient with respect to the latent.
inline LossAndGrad loss_and_input_grad(const DecoderModel& m, std::span<const double> x, std::int32_t y) {
  detail::check_label(m, y);
  detail::Forward f;
  detail::forward(m, x, f);
  const double zy = f.logits[y];
  const double lse = detail::softmax_inplace(f.logits);
  LossAndGrad out;
  out.loss = lse - zy;
  Vector dz = f.logits;
  dz[y] -= 1.0;
  out.input_grad.assign(m.input_dim, 0.0);
  detail::backward(m, x, f, dz, {}, out.input_grad);
  return out;
}

// Sequence form: loss is the sum of per-token cross entropies, and the input
// gradient is taken with respect to one perturbation added to every token
// latent, i.e. the sum of per-token gradients.
inline LossAndGrad loss_and_input_grad(const DecoderModel& m, const Matrix& tokens, const Label& labels) {
  if (tokens.rows != labels.size()) throw ShapeError("token count does not match label count");
  LossAndGrad out;
  out.input_grad.assign(m.input_dim, 0.0);
  for (std::size_t t = 0; t < tokens.rows; ++t) {
    auto lg = loss_and_input_grad(m, tokens.row(t), labels[t]);
    out.loss += lg.loss;
    axpy(1.0, lg.input_grad, out.input_grad);
  }
  return out;
}

// Sum of per-token cross entropies; accumulates d(loss)/d(params) into
// grad_params (scaled by `weight`).
inline double accumulate_param_grad(const DecoderModel& m, const Matrix& tokens, const Label& labels,
                                    std::span<double> grad_params, double weight = 1.0,
                                    Matrix* token_input_grads = nullptr) {
  if (tokens.rows != labels.size()) throw ShapeError("token count does not match label count");
  if (token_input_grads) *token_input_grads = Matrix(tokens.rows, m.input_dim);
  double loss = 0.0;
  detail::Forward f;
  Vector dz;
  for (std::size_t t = 0; t < tokens.rows; ++t) {
    const auto y = labels[t];
    detail::check_label(m, y);
    detail::forward(m, tokens.row(t), f);
    Vector z = f.logits;
    const double lse = detail::softmax_inplace(f.logits);
    loss += lse - z[y];
    dz = f.logits;
    dz[y] -= 1.0;
    for (double& v : dz) v *= weight;
    std::span<double> dx;
    if (token_input_grads) dx = token_input_grads->row(t);
    detail::backward(m, tokens.row(t), f, dz, grad_params, dx);
  }
  return loss;
}

// d(logits)/dx, one row per class.
inline Matrix logit_jacobian(const DecoderModel& m, std::span<const double> x) {
  detail::Forward f;
  detail::forward(m, x, f);
  Matrix jac(m.output, m.input_dim);
  if (m.arch == Architecture::linear) {
    std::copy(m.weights(0).begin(), m.weights(0).end(), jac.data.begin());
    return jac;
  }
  const auto w1 = m.weights(0);
  const auto w2 = m.weights(1);
  for (std::size_t k = 0; k < m.output; ++k) {
    auto row = jac.row(k);
    for (std::size_t h = 0; h < m.hidden; ++h) {
      const double s = w2[k * m.hidden + h] * (1.0 - f.hidden[h] * f.hidden[h]);
      if (s == 0.0) continue;
      const double* w1r = w1.data() + h * m.input_dim;
      for (std::size_t c = 0; c < m.input_dim; ++c) row[c] += s * w1r[c];
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  }
};

struct OptimizerState {
  Vector first_moment;
  Vector second_moment;
  std::uint64_t steps = 0;
};

// One optimizer update on a flat parameter vector.
inline void apply_update(std::span<double> params, std::span<const double> grad, OptimizerState& state,
                         const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
    ++state.steps;
    return;
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
    state.steps = 0;
  }
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
  }
}

// A labeled sample in latent coordinates: one row per token.
struct LatentExample {
  Matrix tokens;
  Label label;
};

inline double mean_loss(const DecoderModel& m, std::span<const LatentExample> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : batch) total += accumulate_param_grad(m, ex.tokens, ex.label, {});
  return total / static_cast<double>(batch.size());
}

// One optimizer step on the mean batch loss. Returns the loss before the
// update. On a non-finite loss or gradient the model is left untouched.
inline double train_step(DecoderModel& m, std::span<const LatentExample> batch, const TrainConfig& cfg,
                         OptimizerState& state) {
  if (batch.empty()) throw ConfigError("train_step needs a non-empty batch");
  cfg.validate();
  Vector grad(m.params.size(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) loss += accumulate_param_grad(m, ex.tokens, ex.label, grad, w);
  loss *= w;
  if (!std::isfinite(loss) || !all_finite(grad)) throw NumericError("non-finite loss in train_step");
  apply_update(m.params, grad, state, cfg);
  return loss;
}

// ---------------------------------------------------------------------------
// Checkpoint: "ADEC" | u32 version=1 | u32 arch | u32 input | u32 hidden |
//             u32 output | u64 param_count | param_count f32 (little-endian)

inline constexpr std::array<char, 4> kDecoderMagic{'A', 'D', 'E', 'C'};

inline void save_decoder(const std::filesystem::path& path, const DecoderModel& m) {
  auto os = detail::open_out(path);
  os.write(kDecoderMagic.data(), 4);
  detail::put(os, kFormatVersion);
  detail::put(os, static_cast<std::uint32_t>(m.arch));
  detail::put(os, static_cast<std::uint32_t>(m.input_dim));
  detail::put(os, static_cast<std::uint32_t>(m.hidden));
  detail::put(os, static_cast<std::uint32_t>(m.output));
  detail::put(os, static_cast<std::uint64_t>(m.params.size()));
  std::vector<float> f(m.params.begin(), m.params.end());
  detail::put_floats(os, f);
  if (!os) throw IoError("write failed: " + path.string());
}

inline DecoderModel load_decoder(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  const auto name = path.string();
  detail::check_magic(is, kDecoderMagic, name);
  if (detail::get<std::uint32_t>(is, "version") != kFormatVersion) throw FormatError(name + ": unsupported version");
  const auto arch = detail::get<std::uint32_t>(is, "arch");
  if (arch > 1) throw FormatError(name + ": unknown architecture");
  const auto in = detail::get<std::uint32_t>(is, "input");
  const auto hid = detail::get<std::uint32_t>(is, "hidden");
  const auto out = detail::get<std::uint32_t>(is, "output");
  const auto count = detail::get<std::uint64_t>(is, "param_count");
  auto m = DecoderModel::make(static_cast<Architecture>(arch), in, out, hid);
  if (m.parameter_count() != count) throw FormatError(name + ": parameter count disagrees with shapes");
  std::vector<float> f(count);
  detail::get_floats(is, f, name);
  detail::expect_eof(is, name);
  std::copy(f.begin(), f.end(), m.params.begin());
  return m;
}

}  // namespace ausds
