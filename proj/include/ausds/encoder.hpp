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

// Encoder stack: frozen base embeddings followed by a trainable affine
// adapter x -> A x + b. Every adapter update bumps the version so consumers
// holding latents (the mapper, attack inputs) can detect that they are stale.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ausds/dataset.hpp"
#include "ausds/decoder.hpp"
#include "ausds/error.hpp"
#include "ausds/linalg.hpp"
#include "ausds/random.hpp"
#include "ausds/store.hpp"

namespace ausds {

struct LatentPoint {
  Vector values;
  std::uint64_t version = 0;
};

class EncoderStack {
 public:
  explicit EncoderStack(std::shared_ptr<const EmbeddingStore> store)
      : store_(std::move(store)),
        adapter_(Matrix::identity(store_->dim())),
        bias_(store_->dim(), 0.0) {}

  const EmbeddingStore& store() const { return *store_; }
  std::shared_ptr<const EmbeddingStore> store_ptr() const { return store_; }
  std::size_t dim() const { return store_->dim(); }
  std::uint64_t version() const { return version_; }
  const Matrix& adapter() const { return adapter_; }
  const Vector& bias() const { return bias_; }

  // Replaces the adapter; counts as an update.
  void set_adapter(Matrix a, Vector b) {
    if (a.rows != dim() || a.cols != dim() || b.size() != dim()) throw ShapeError("adapter must be d x d and d");
    adapter_ = std::move(a);
    bias_ = std::move(b);
    ++version_;
  }

  // Token latents h_t = A e_t + b, one row per token.
  Matrix encode_tokens(SampleId id) const {
    store_->check(id);
    const auto n = store_->length(id);
    Matrix out(n, dim());
    for (std::size_t t = 0; t < n; ++t) affine<float>(adapter_, store_->token(id, t), bias_, out.row(t));
    return out;
  }

  // Sample latent: the adapted vector, or the mean of the adapted tokens.
  LatentPoint encode(SampleId id) const {
    store_->check(id);
    LatentPoint p{Vector(dim(), 0.0), version_};
    encode_into(id, p.values);
    return p;
  }

  void encode_into(SampleId id, std::span<double> out) const {
    const auto n = store_->length(id);
    if (n == 1) {
      affine<float>(adapter_, store_->token(id, 0), bias_, out);
      return;
    }
    // mean of A e_t + b == A (mean e_t) + b
    Vector mean(dim(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const auto tok = store_->token(id, t);
      for (std::size_t c = 0; c < dim(); ++c) mean[c] += static_cast<double>(tok[c]);
    }
    for (double& v : mean) v /= static_cast<double>(n);
    affine<double>(adapter_, mean, bias_, out);
  }

 private:
  friend struct FineTuner;
  std::shared_ptr<const EmbeddingStore> store_;
  Matrix adapter_;
  Vector bias_;
  std::uint64_t version_ = 0;
};

inline LatentExample make_example(const EncoderStack& stack, SampleId id, Label label) {
  return {stack.encode_tokens(id), std::move(label)};
}

struct FineTuneStats {
  std::size_t steps = 0;
  double first_loss = 0.0;  // mean minibatch loss before the first update
  double last_loss = 0.0;   // mean minibatch loss before the last update
};

// Mean cross entropy over `labeled` with the current adapter and decoder.
inline double dataset_loss(const EncoderStack& stack, const DecoderModel& decoder,
                           std::span<const LabeledSample> labeled) {
  if (labeled.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : labeled) total += accumulate_param_grad(decoder, stack.encode_tokens(s.id), s.label, {});
  return total / static_cast<double>(labeled.size());
}

struct FineTuner {
  // Jointly trains adapter and decoder on minibatches of `labeled` for
  // `steps` optimizer steps, then bumps the encoder version exactly once.
  static FineTuneStats run(EncoderStack& stack, DecoderModel& decoder, std::span<const LabeledSample> labeled,
                           std::size_t steps, const TrainConfig& cfg) {
    if (steps < 1) throw ConfigError("fine_tune needs at least one step");
    if (labeled.empty()) throw ConfigError("fine_tune needs labeled data");
    cfg.validate();
    const std::size_t d = stack.dim();
    const auto saved_adapter = stack.adapter_;
    const auto saved_bias = stack.bias_;
    const auto saved_decoder = decoder.params;

    // adapter parameters flattened as [A row-major | b]
    Vector adapter(d * d + d);
    std::copy(stack.adapter_.data.begin(), stack.adapter_.data.end(), adapter.begin());
    std::copy(stack.bias_.begin(), stack.bias_.end(), adapter.begin() + static_cast<std::ptrdiff_t>(d * d));

    OptimizerState dec_state, ad_state;
    auto rng = make_rng(cfg.seed ^ (stack.version_ * 0x9e3779b97f4a7c15ULL), stream::fine_tune);
    const std::size_t bs = std::min(cfg.batch_size, labeled.size());
    FineTuneStats stats;
    Matrix token_grads;
    Vector base(d);
    try {
      for (std::size_t step = 0; step < steps; ++step) {
        Vector dec_grad(decoder.params.size(), 0.0);
        Vector ad_grad(adapter.size(), 0.0);
        const double w = 1.0 / static_cast<double>(bs);
        double loss = 0.0;
        for (auto idx : sample_indices(labeled.size(), bs, rng)) {
          const auto& s = labeled[idx];
          const auto tokens = stack.encode_tokens(s.id);
          loss += w * accumulate_param_grad(decoder, tokens, s.label, dec_grad, w, &token_grads);
          for (std::size_t t = 0; t < tokens.rows; ++t) {
            const auto e = stack.store_->token(s.id, t);
            const auto g = token_grads.row(t);
            for (std::size_t r = 0; r < d; ++r) {
              const double gr = g[r];
              if (gr == 0.0) continue;
              double* row = ad_grad.data() + r * d;
              for (std::size_t c = 0; c < d; ++c) row[c] += gr * static_cast<double>(e[c]);
              ad_grad[d * d + r] += gr;
            }
          }
        }
        if (!std::isfinite(loss) || !all_finite(dec_grad) || !all_finite(ad_grad)) {
          throw NumericError("non-finite loss during fine-tuning");
        }
        if (step == 0) stats.first_loss = loss;
        stats.last_loss = loss;
        apply_update(decoder.params, dec_grad, dec_state, cfg);
        apply_update(adapter, ad_grad, ad_state, cfg);
        std::copy(adapter.begin(), adapter.begin() + static_cast<std::ptrdiff_t>(d * d), stack.adapter_.data.begin());
        std::copy(adapter.begin() + static_cast<std::ptrdiff_t>(d * d), adapter.end(), stack.bias_.begin());
        ++stats.steps;
      }
      if (!all_finite(adapter) || !all_finite(decoder.params)) throw NumericError("non-finite parameters after fine-tuning");
    } catch (const NumericError&) {
      stack.adapter_ = saved_adapter;
      stack.bias_ = saved_bias;
      decoder.params = saved_decoder;
      throw;
    }
    ++stack.version_;
    return stats;
  }
};

inline FineTuneStats fine_tune(EncoderStack& stack, DecoderModel& decoder, std::span<const LabeledSample> labeled,
                               std::size_t steps, const TrainConfig& cfg) {
  return FineTuner::run(stack, decoder, labeled, steps, cfg);
}

}  // namespace ausds
