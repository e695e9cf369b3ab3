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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zacn/errors.hpp"

namespace zacn {

inline bool is_valid_depth(double z) { return std::isfinite(z) && z > 0.0; }

/// Per-pixel metric Z depth, row-major. Entries that are not positive and
/// finite are treated as missing measurements.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), values_(height * width, fill) {}
  DepthMap(std::size_t height, std::size_t width, std::vector<double> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) {
      throw ShapeError("depth map has " + std::to_string(values_.size()) + " values for " +
                       std::to_string(height_) + "x" + std::to_string(width_));
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  bool valid(std::size_t row, std::size_t col) const { return is_valid_depth(at(row, col)); }

  /// Depth at a possibly out-of-range location, clamped to the border.
  double clamped(long row, long col) const {
    const long r = std::clamp(row, 0L, static_cast<long>(height_) - 1);
    const long c = std::clamp(col, 0L, static_cast<long>(width_) - 1);
    return values_[static_cast<std::size_t>(r) * width_ + static_cast<std::size_t>(c)];
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Mean of valid entries, or nullopt when none are valid.
  std::optional<double> mean_valid() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (double z : values_) {
      if (is_valid_depth(z)) {
        sum += z;
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

}  // namespace zacn
