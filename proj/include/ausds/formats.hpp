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

// Binary and text file formats shared with the embedding exporter.
//
// AEMB (one vector per sample):
//   "AEMB" | u32 version=1 | u64 count | u32 dim | count*dim f32, row-major
// ATOK (token vectors per sample):
//   "ATOK" | u32 version=1 | u64 count | u32 dim | u64 total_tokens
//          | (count+1) u64 offsets | total_tokens*dim f32
// Labels: UTF-8 TSV, line i is "i<TAB>label" or "i<TAB>l1,l2,...,lN".
// All integers and floats are little-endian.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ausds/error.hpp"

namespace ausds {

using Label = std::vector<std::int32_t>;

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::array<char, 4> kEmbeddingMagic{'A', 'E', 'M', 'B'};
inline constexpr std::array<char, 4> kTokenMagic{'A', 'T', 'O', 'K'};

struct EmbeddingMatrix {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

struct TokenEmbeddings {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::vector<std::uint64_t> offsets;  // count + 1 entries
  std::vector<float> values;

  std::uint64_t total_tokens() const { return offsets.empty() ? 0 : offsets.back(); }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::span<const float> token(std::size_t i, std::size_t t) const {
    return {values.data() + (offsets[i] + t) * dim, dim};
  }
};

namespace detail {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated " + what);
  return to_little(v);
}

inline void put_floats(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) put(os, f);
  }
}

inline void get_floats(std::istream& is, std::span<float> out, const std::string& what) {
  if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(float)))) {
    throw FormatError("truncated payload in " + what);
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : out) f = to_little(f);
  }
}

inline void check_magic(std::istream& is, const std::array<char, 4>& magic, const std::string& path) {
  std::array<char, 4> got{};
  if (!is.read(got.data(), 4)) throw FormatError(path + ": file too short for magic");
  if (got != magic) {
    throw FormatError(path + ": bad magic, expected " + std::string(magic.begin(), magic.end()));
  }
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

inline void expect_eof(std::istream& is, const std::string& path) {
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes after payload");
}

inline void check_finite(std::span<const float> v, const std::string& path) {
  for (float f : v) {
    if (!std::isfinite(f)) throw FormatError(path + ": non-finite value in payload");
  }
}

}  // namespace detail

struct EmbeddingHeader {
  std::uint64_t count = 0;
  std::uint32_t dim = 0;
};

inline EmbeddingHeader read_embedding_header(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  detail::check_magic(is, kEmbeddingMagic, path.string());
  if (auto v = detail::get<std::uint32_t>(is, "version"); v != kFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(v));
  }
  EmbeddingHeader h;
  h.count = detail::get<std::uint64_t>(is, "count");
  h.dim = detail::get<std::uint32_t>(is, "dim");
  return h;
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  const auto name = path.string();
  detail::check_magic(is, kEmbeddingMagic, name);
  if (auto v = detail::get<std::uint32_t>(is, "version"); v != kFormatVersion) {
    throw FormatError(name + ": unsupported version " + std::to_string(v));
  }
  EmbeddingMatrix m;
  m.count = detail::get<std::uint64_t>(is, "count");
  m.dim = detail::get<std::uint32_t>(is, "dim");
  if (m.dim == 0) throw FormatError(name + ": dim is zero");
  const auto expected = std::filesystem::file_size(path);
  if (expected != 20 + m.count * m.dim * sizeof(float)) {
    throw FormatError(name + ": file size disagrees with header count/dim");
  }
  m.values.resize(m.count * m.dim);
  detail::get_floats(is, m.values, name);
  detail::check_finite(m.values, name);
  return m;
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  if (m.values.size() != m.count * m.dim) throw ShapeError("write_embeddings: payload size mismatch");
  auto os = detail::open_out(path);
  os.write(kEmbeddingMagic.data(), 4);
  detail::put(os, kFormatVersion);
  detail::put(os, m.count);
  detail::put(os, m.dim);
  detail::put_floats(os, m.values);
  if (!os) throw IoError("write failed: " + path.string());
}

inline TokenEmbeddings read_tokens(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  const auto name = path.string();
  detail::check_magic(is, kTokenMagic, name);
  if (auto v = detail::get<std::uint32_t>(is, "version"); v != kFormatVersion) {
    throw FormatError(name + ": unsupported version " + std::to_string(v));
  }
  TokenEmbeddings t;
  t.count = detail::get<std::uint64_t>(is, "count");
  t.dim = detail::get<std::uint32_t>(is, "dim");
  const auto total = detail::get<std::uint64_t>(is, "total_tokens");
  if (t.dim == 0) throw FormatError(name + ": dim is zero");
  const auto expected = 28 + (t.count + 1) * 8 + total * t.dim * sizeof(float);
  if (std::filesystem::file_size(path) != expected) {
    throw FormatError(name + ": file size disagrees with header");
  }
  t.offsets.resize(t.count + 1);
  for (auto& o : t.offsets) o = detail::get<std::uint64_t>(is, "offsets");
  if (t.offsets.front() != 0 || t.offsets.back() != total) throw FormatError(name + ": offsets do not span payload");
  for (std::size_t i = 0; i < t.count; ++i) {
    if (t.offsets[i + 1] < t.offsets[i]) throw FormatError(name + ": offsets not monotone");
  }
  t.values.resize(total * t.dim);
  detail::get_floats(is, t.values, name);
  detail::check_finite(t.values, name);
  return t;
}

inline void write_tokens(const std::filesystem::path& path, const TokenEmbeddings& t) {
  if (t.offsets.size() != t.count + 1 || t.values.size() != t.total_tokens() * t.dim) {
    throw ShapeError("write_tokens: inconsistent offsets/payload");
  }
  auto os = detail::open_out(path);
  os.write(kTokenMagic.data(), 4);
  detail::put(os, kFormatVersion);
  detail::put(os, t.count);
  detail::put(os, t.dim);
  detail::put(os, t.total_tokens());
  for (auto o : t.offsets) detail::put(os, o);
  detail::put_floats(os, t.values);
  if (!os) throw IoError("write failed: " + path.string());
}

inline std::string format_label(const Label& label) {
  std::string s;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(label[i]);
  }
  return s;
}

inline Label parse_label(const std::string& text, const std::string& where) {
  Label out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const long v = std::stol(piece, &used);
      if (used != piece.size() || v < 0 || v > INT32_MAX) throw std::invalid_argument(piece);
      out.push_back(static_cast<std::int32_t>(v));
    } catch (const std::logic_error&) {
      throw FormatError(where + ": bad label '" + piece + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Reads "id<TAB>label" lines. Ids must be dense and in file order.
inline std::vector<Label> read_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<Label> labels;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto where = path.string() + ":" + std::to_string(labels.size() + 1);
    if (line.empty()) throw FormatError(where + ": empty line");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(where + ": missing tab");
    const auto id_text = line.substr(0, tab);
    if (id_text != std::to_string(labels.size())) {
      throw FormatError(where + ": id " + id_text + " out of order (expected " + std::to_string(labels.size()) + ")");
    }
    labels.push_back(parse_label(line.substr(tab + 1), where));
  }
  return labels;
}

inline void write_labels(std::ostream& os, std::span<const std::pair<std::uint64_t, Label>> rows) {
  for (const auto& [id, label] : rows) os << id << '\t' << format_label(label) << '\n';
}

inline void write_labels(const std::filesystem::path& path, std::span<const Label> labels) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < labels.size(); ++i) os << i << '\t' << format_label(labels[i]) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

enum class TaskKind { classification, labeling };

inline std::string to_string(TaskKind t) { return t == TaskKind::classification ? "classification" : "labeling"; }

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "labeling") return TaskKind::labeling;
  throw ConfigError("unknown task kind '" + s + "'");
}

struct SplitFiles {
  std::filesystem::path embeddings;  // AEMB, classification
  std::filesystem::path tokens;      // ATOK, labeling
  std::filesystem::path labels;
  std::uint64_t count = 0;
};

struct DatasetManifest {
  std::string name;
  TaskKind task = TaskKind::classification;
  std::uint32_t num_labels = 0;
  std::uint32_t dim = 0;
  SplitFiles train;
  std::optional<SplitFiles> test;
  nlohmann::json extra = nlohmann::json::object();  // exporter metadata, passed through
};

namespace detail {

inline SplitFiles split_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  SplitFiles s;
  auto resolve = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  s.embeddings = resolve("embeddings");
  s.tokens = resolve("tokens");
  s.labels = resolve("labels");
  s.count = j.at("count").get<std::uint64_t>();
  return s;
}

inline nlohmann::json split_to_json(const SplitFiles& s, const std::filesystem::path& base) {
  auto rel = [&](const std::filesystem::path& p) -> nlohmann::json {
    if (p.empty()) return nullptr;
    return std::filesystem::relative(p, base).generic_string();
  };
  return {{"embeddings", rel(s.embeddings)}, {"tokens", rel(s.tokens)}, {"labels", rel(s.labels)}, {"count", s.count}};
}

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  DatasetManifest m;
  try {
    m.name = j.value("name", path.stem().string());
    m.task = parse_task_kind(j.at("task").get<std::string>());
    m.num_labels = j.at("num_labels").get<std::uint32_t>();
    m.dim = j.at("dim").get<std::uint32_t>();
    m.train = detail::split_from_json(j.at("train"), base);
    if (j.contains("test") && !j.at("test").is_null()) m.test = detail::split_from_json(j.at("test"), base);
    if (j.contains("extra")) m.extra = j.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const auto base = path.parent_path();
  nlohmann::json j = {{"name", m.name},
                      {"task", to_string(m.task)},
                      {"num_labels", m.num_labels},
                      {"dim", m.dim},
                      {"train", detail::split_to_json(m.train, base)},
                      {"extra", m.extra}};
  j["test"] = m.test ? detail::split_to_json(*m.test, base) : nlohmann::json(nullptr);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

}  // namespace ausds
