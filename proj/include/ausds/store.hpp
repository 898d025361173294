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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ausds/error.hpp"
#include "ausds/formats.hpp"

namespace ausds {

using SampleId = std::uint32_t;

// Frozen base vectors for every sample. Classification stores are a dense
// matrix viewed as length-one sequences, so every consumer sees the same
// ragged layout.
class EmbeddingStore {
 public:
  static EmbeddingStore from_dense(EmbeddingMatrix m) {
    EmbeddingStore s;
    s.kind_ = TaskKind::classification;
    s.data_.count = m.count;
    s.data_.dim = m.dim;
    s.data_.offsets.resize(m.count + 1);
    for (std::uint64_t i = 0; i <= m.count; ++i) s.data_.offsets[i] = i;
    s.data_.values = std::move(m.values);
    return s;
  }

  static EmbeddingStore from_tokens(TokenEmbeddings t) {
    for (std::size_t i = 0; i < t.count; ++i) {
      if (t.length(i) == 0) throw FormatError("sample " + std::to_string(i) + " has no tokens");
    }
    EmbeddingStore s;
    s.kind_ = TaskKind::labeling;
    s.data_ = std::move(t);
    return s;
  }

  TaskKind kind() const { return kind_; }
  std::size_t size() const { return data_.count; }
  std::size_t dim() const { return data_.dim; }
  std::size_t length(SampleId id) const {
    check(id);
    return data_.length(id);
  }

  std::span<const float> token(SampleId id, std::size_t t) const { return data_.token(id, t); }

  const TokenEmbeddings& raw() const { return data_; }

  void check(SampleId id) const {
    if (id >= data_.count) throw LookupError("sample id " + std::to_string(id) + " not in store");
  }

 private:
  TaskKind kind_ = TaskKind::classification;
  TokenEmbeddings data_;
};

}  // namespace ausds
