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

// Geometry-guided sampling offsets.
//
// For every output location the regular kernel footprint is back-projected
// with the depth map, a plane through the center point is fitted to it, and
// a regular metric grid laid out on that plane is projected back into the
// image. The offsets are the displacement between those projected taps and
// the regular (dilated) taps. Offsets are a pure function of depth and
// intrinsics and carry no gradient.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zacn/camera.hpp"
#include "zacn/depth_map.hpp"
#include "zacn/errors.hpp"

namespace zacn {

/// Kernel geometry shared by the offset engine and the convolution.
struct ConvSpec {
  int kernel_size = 3;
  int dilation = 1;
  int stride = 1;
  int padding = 0;

  bool valid() const {
    return kernel_size >= 1 && kernel_size % 2 == 1 && dilation >= 1 && stride >= 1 && padding >= 0;
  }
  void validate() const {
    if (!valid()) {
      throw DomainError("conv spec requires odd kernel >= 1, dilation >= 1, stride >= 1, padding >= 0 (got N=" +
                        std::to_string(kernel_size) + " d=" + std::to_string(dilation) +
                        " s=" + std::to_string(stride) + " p=" + std::to_string(padding) + ")");
    }
  }

  int taps() const { return kernel_size * kernel_size; }
  int half() const { return (kernel_size - 1) / 2; }
  /// Extent of the dilated footprint in pixels.
  int footprint() const { return dilation * (kernel_size - 1) + 1; }

  /// Output extent along one axis of length `in`.
  std::size_t output_extent(std::size_t in) const {
    const long padded = static_cast<long>(in) + 2L * padding;
    if (padded < footprint()) {
      throw ShapeError("input extent " + std::to_string(in) + " with padding " + std::to_string(padding) +
                       " is smaller than the kernel footprint " + std::to_string(footprint()));
    }
    return static_cast<std::size_t>((padded - footprint()) / stride + 1);
  }

  /// Input coordinate of the kernel center for output index `out`.
  long center(std::size_t out) const {
    return static_cast<long>(out) * stride - padding + static_cast<long>(dilation) * half();
  }
};

/// Integer tap displacement (row, col) relative to the kernel center.
struct GridTap {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridTap&, const GridTap&) = default;
};

/// Regular dilated taps in raster order (rows outer); the middle entry is (0, 0).
inline std::vector<GridTap> regular_grid(const ConvSpec& spec) {
  spec.validate();
  std::vector<GridTap> taps;
  taps.reserve(static_cast<std::size_t>(spec.taps()));
  for (int r = -spec.half(); r <= spec.half(); ++r) {
    for (int c = -spec.half(); c <= spec.half(); ++c) {
      taps.push_back({r * spec.dilation, c * spec.dilation});
    }
  }
  return taps;
}

/// Unit plane normal with n3 >= 0 (the plane faces the camera).
struct PlaneNormal {
  double n1 = 0.0;
  double n2 = 0.0;
  double n3 = 1.0;

  Point3 vec() const { return {n1, n2, n3}; }
};

/// Sign convention: n3 > 0, or for n3 == 0 the first nonzero component positive.
inline PlaneNormal normalize_sign(PlaneNormal n) {
  const double lead = n.n3 != 0.0 ? n.n3 : (n.n1 != 0.0 ? n.n1 : n.n2);
  if (lead < 0.0) {
    n = {-n.n1, -n.n2, -n.n3};
  }
  // -0.0 would compare equal but print oddly; keep outputs canonical.
  if (n.n1 == 0.0) n.n1 = 0.0;
  if (n.n2 == 0.0) n.n2 = 0.0;
  if (n.n3 == 0.0) n.n3 = 0.0;
  return n;
}

/// Sum of squared out-of-plane distances of `neighbors` from the plane
/// through `anchor` with unit normal `n`.
inline double plane_residual(std::span<const Point3> neighbors, const Point3& anchor, const Point3& n) {
  double sum = 0.0;
  for (const auto& p : neighbors) {
    const double d = dot(n, p - anchor);
    sum += d * d;
  }
  return sum;
}

/// Least-squares normal of the plane constrained to pass through `anchor`:
/// the left singular vector with the smallest singular value of the 3xM
/// matrix of differences `neighbors[i] - anchor`.
inline PlaneNormal fit_plane_normal(std::span<const Point3> neighbors, const Point3& anchor) {
  if (neighbors.size() < 3) {
    throw DegenerateInputError("plane fit needs at least 3 points, got " + std::to_string(neighbors.size()));
  }
  Eigen::Matrix<double, 3, Eigen::Dynamic> diffs(3, static_cast<Eigen::Index>(neighbors.size()));
  bool any_nonzero = false;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const Point3& p = neighbors[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw DegenerateInputError("plane fit received a non-finite point");
    }
    const Point3 d = p - anchor;
    diffs.col(static_cast<Eigen::Index>(i)) << d.x, d.y, d.z;
    any_nonzero = any_nonzero || d.x != 0.0 || d.y != 0.0 || d.z != 0.0;
  }
  if (!any_nonzero) {
    throw DegenerateInputError("plane fit: every point coincides with the anchor");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeFullU);
  const Eigen::Vector3d u = svd.matrixU().col(2).normalized();
  return normalize_sign({u.x(), u.y(), u.z()});
}

/// Orthonormal in-plane axes; x_axis has no Y component.
struct PlaneBasis {
  Point3 x_axis{1.0, 0.0, 0.0};
  Point3 y_axis{0.0, 1.0, 0.0};
};

/// Below this value of 1 - n2^2 the horizontal axis is undefined.
inline constexpr double kBasisEpsilon = 1e-6;

/// Closed-form basis with a horizontal first axis. Returns nullopt when the
/// normal is (nearly) parallel to the image Y axis.
inline std::optional<PlaneBasis> plane_basis(const PlaneNormal& n) {
  const double s2 = 1.0 - n.n2 * n.n2;
  if (!(s2 >= kBasisEpsilon)) {
    return std::nullopt;
  }
  const double s = std::sqrt(s2);
  return PlaneBasis{{n.n3 / s, 0.0, -n.n1 / s}, {-n.n1 * n.n2 / s, s, -n.n2 * n.n3 / s}};
}

/// `plane_basis` with the fallback x'=(1,0,0), y'=(0,0,1) for near-horizontal planes.
inline PlaneBasis plane_basis_or_fallback(const PlaneNormal& n) {
  if (auto b = plane_basis(n)) return *b;
  return PlaneBasis{{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
}

/// Metric spacing of the planar grid. A fronto-parallel plane at
/// `reference_depth` projects to exactly the regular dilated grid.
struct ScaleFactors {
  double ku = 0.0;
  double kv = 0.0;
  double reference_depth = 0.0;
};

inline ScaleFactors scale_factors(const ConvSpec& spec, double reference_depth, const CameraIntrinsics& k) {
  if (!is_valid_depth(reference_depth)) {
    throw DomainError("reference depth must be positive and finite");
  }
  const double d = static_cast<double>(spec.dilation);
  return {d * reference_depth / k.fu, d * reference_depth / k.fv, reference_depth};
}

/// N*N points P0 + a*x' + b*y', raster order with b (rows) outer.
inline std::vector<Point3> planar_grid(const Point3& anchor, const PlaneBasis& basis, const ScaleFactors& sf,
                                       const ConvSpec& spec) {
  std::vector<Point3> grid;
  grid.reserve(static_cast<std::size_t>(spec.taps()));
  for (int r = -spec.half(); r <= spec.half(); ++r) {
    for (int c = -spec.half(); c <= spec.half(); ++c) {
      const double a = c * sf.ku;
      const double b = r * sf.kv;
      grid.push_back(anchor + a * basis.x_axis + b * basis.y_axis);
    }
  }
  return grid;
}

/// Per-location offsets, shape (2*N*N, h1, w1). Channel 2n holds the row
/// displacement of tap n and channel 2n+1 its column displacement.
struct OffsetField {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  OffsetField() = default;
  OffsetField(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), values(c * h * w, 0.0f) {}

  static OffsetField zeros(const ConvSpec& spec, std::size_t h1, std::size_t w1) {
    return OffsetField(2 * static_cast<std::size_t>(spec.taps()), h1, w1);
  }

  std::size_t taps() const { return channels / 2; }

  float& at(std::size_t ch, std::size_t row, std::size_t col) { return values[(ch * height + row) * width + col]; }
  float at(std::size_t ch, std::size_t row, std::size_t col) const { return values[(ch * height + row) * width + col]; }

  float row_offset(std::size_t tap, std::size_t row, std::size_t col) const { return at(2 * tap, row, col); }
  float col_offset(std::size_t tap, std::size_t row, std::size_t col) const { return at(2 * tap + 1, row, col); }

  float max_abs() const {
    float m = 0.0f;
    for (float v : values) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const OffsetField&, const OffsetField&) = default;
};

/// Everything computed for one output location. `adapted` is false when
/// the location fell back to the regular grid (missing depth, degenerate fit,
/// or a planar tap behind the camera).
struct LocationAdaptation {
  Pixel center;
  Point3 anchor;
  PlaneNormal normal;
  PlaneBasis basis;
  std::vector<Point3> grid;
  std::vector<Pixel> taps;
  bool adapted = false;
};

/// Adapted taps around the integer pixel (row, col); the pixel may lie
/// outside the image, depth lookups are clamped to the border.
inline LocationAdaptation adapt_location(const DepthMap& depth, const CameraIntrinsics& k, const ConvSpec& spec,
                                         long row, long col, const ScaleFactors& sf) {
  LocationAdaptation out;
  out.center = {static_cast<double>(col), static_cast<double>(row)};
  const auto grid2d = regular_grid(spec);
  out.taps.reserve(grid2d.size());
  for (const auto& t : grid2d) {
    out.taps.push_back({out.center.u + t.col, out.center.v + t.row});
  }

  const double z0 = depth.clamped(row, col);
  if (!is_valid_depth(z0)) return out;
  out.anchor = back_project(out.center, z0, k);

  std::vector<Point3> neighbors;
  neighbors.reserve(grid2d.size());
  for (const auto& t : grid2d) {
    if (t.row == 0 && t.col == 0) continue;
    const double z = depth.clamped(row + t.row, col + t.col);
    if (!is_valid_depth(z)) continue;
    neighbors.push_back(back_project({out.center.u + t.col, out.center.v + t.row}, z, k));
  }
  if (neighbors.size() < 3) return out;

  try {
    out.normal = fit_plane_normal(neighbors, out.anchor);
  } catch (const DegenerateInputError&) {
    return out;
  }
  out.basis = plane_basis_or_fallback(out.normal);
  auto grid = planar_grid(out.anchor, out.basis, sf, spec);

  std::vector<Pixel> projected;
  projected.reserve(grid.size());
  for (const auto& p : grid) {
    if (!(p.z > 0.0)) return out;
    const Pixel q = project(p, k);
    if (!std::isfinite(q.u) || !std::isfinite(q.v)) return out;
    projected.push_back(q);
  }
  out.grid = std::move(grid);
  out.taps = std::move(projected);
  out.adapted = true;
  return out;
}

/// Reference depth used when none is given: mean of the valid depth entries.
inline double default_reference_depth(const DepthMap& depth) {
  auto m = depth.mean_valid();
  if (!m) throw DomainError("depth map has no valid (positive, finite) entries");
  return *m;
}

/// Offsets for a feature map with the same resolution as `depth`.
inline OffsetField compute_offset_field(const DepthMap& depth, const CameraIntrinsics& k, const ConvSpec& spec,
                                        std::optional<double> reference_depth = std::nullopt) {
  spec.validate();
  k.validate();
  if (depth.empty()) throw DomainError("depth map is empty");
  if (depth.height() < static_cast<std::size_t>(spec.footprint()) ||
      depth.width() < static_cast<std::size_t>(spec.footprint())) {
    throw ShapeError("depth map " + std::to_string(depth.height()) + "x" + std::to_string(depth.width()) +
                     " is smaller than the kernel footprint " + std::to_string(spec.footprint()));
  }
  const double mean = default_reference_depth(depth);
  const ScaleFactors sf = scale_factors(spec, reference_depth.value_or(mean), k);

  const std::size_t h1 = spec.output_extent(depth.height());
  const std::size_t w1 = spec.output_extent(depth.width());
  OffsetField field = OffsetField::zeros(spec, h1, w1);
  const auto grid2d = regular_grid(spec);

  for (std::size_t i = 0; i < h1; ++i) {
    for (std::size_t j = 0; j < w1; ++j) {
      const LocationAdaptation loc = adapt_location(depth, k, spec, spec.center(i), spec.center(j), sf);
      if (!loc.adapted) continue;
      for (std::size_t n = 0; n < grid2d.size(); ++n) {
        const double dv = loc.taps[n].v - (loc.center.v + grid2d[n].row);
        const double du = loc.taps[n].u - (loc.center.u + grid2d[n].col);
        field.at(2 * n, i, j) = static_cast<float>(dv);
        field.at(2 * n + 1, i, j) = static_cast<float>(du);
      }
    }
  }
  return field;
}

/// Absolute sampling positions (regular tap + offset) for output (i, j).
inline std::vector<Pixel> sampled_taps(const OffsetField& field, const ConvSpec& spec, std::size_t i, std::size_t j) {
  const auto grid2d = regular_grid(spec);
  std::vector<Pixel> taps;
  taps.reserve(grid2d.size());
  const double cv = static_cast<double>(spec.center(i));
  const double cu = static_cast<double>(spec.center(j));
  for (std::size_t n = 0; n < grid2d.size(); ++n) {
    taps.push_back({cu + grid2d[n].col + field.col_offset(n, i, j), cv + grid2d[n].row + field.row_offset(n, i, j)});
  }
  return taps;
}

/// Channel count must equal 2*N*N for `spec`.
inline void check_offsets_match(const OffsetField& field, const ConvSpec& spec) {
  const auto expected = 2 * static_cast<std::size_t>(spec.taps());
  if (field.channels != expected) {
    throw ConsistencyError("offset field has " + std::to_string(field.channels) + " channels, kernel " +
                           std::to_string(spec.kernel_size) + "x" + std::to_string(spec.kernel_size) + " needs " +
                           std::to_string(expected));
  }
}

}  // namespace zacn
