// Copyright 2026 The zacn Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zacn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (z <= 0, empty depth, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Not enough independent samples to define a result (plane fit with < 3 points).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Tensor or field dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. `offset()` is the byte position where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A loaded object disagrees with the configuration it is used with.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during training; `step()` is the zero-based step index.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace zacn
