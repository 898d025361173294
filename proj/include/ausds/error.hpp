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

#include <stdexcept>
#include <string>

namespace ausds {

// Base of every error raised by the library. Callers that do not care about
// the category can catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent files (bad magic, header/count mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or degenerate setups.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unknown sample id or missing entry.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A pool or mapper invariant would be broken by the requested operation.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Label index outside [0, arity).
class RangeError : public Error {
 public:
  using Error::Error;
};

// A latent point or mapper was produced by an older encoder version.
class StalenessError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Caller supplied data that violates a precondition (e.g. a non-normalized
// probability vector).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace ausds
