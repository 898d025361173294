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

#include <atomic>
#include <iostream>
#include <sstream>
#include <string_view>

namespace ausds {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

namespace detail {
inline std::atomic<int>& log_threshold() {
  static std::atomic<int> level{static_cast<int>(LogLevel::warn)};
  return level;
}
inline std::atomic<std::size_t>& warning_count() {
  static std::atomic<std::size_t> count{0};
  return count;
}

template <typename... Args>
void log_write(LogLevel level, std::string_view tag, Args&&... args) {
  if (level == LogLevel::warn) ++warning_count();
  if (static_cast<int>(level) < log_threshold().load()) return;
  std::ostringstream oss;
  oss << "[ausds:" << tag << "] ";
  (oss << ... << std::forward<Args>(args));
  oss << '\n';
  std::cerr << oss.str();
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_threshold() = static_cast<int>(level); }

// Number of warnings emitted since process start, regardless of the level
// filter. Tests use it to check that a degenerate path was reported.
inline std::size_t warnings_emitted() { return detail::warning_count().load(); }

template <typename... Args>
void log_info(Args&&... args) {
  detail::log_write(LogLevel::info, "info", std::forward<Args>(args)...);
}

template <typename... Args>
void log_warn(Args&&... args) {
  detail::log_write(LogLevel::warn, "warn", std::forward<Args>(args)...);
}

}  // namespace ausds
