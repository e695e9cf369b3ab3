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

// Synthetic RGB-D scenes: a ground plane seen by a downward-pitched camera,
// a fronto-parallel back wall, and an axis-aligned box. Depth and labels are
// rendered analytically by ray casting. Every surface carries a checker
// texture whose period is fixed in meters, so its apparent pixel frequency
// changes with distance and slant.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "zacn/camera.hpp"
#include "zacn/depth_map.hpp"
#include "zacn/errors.hpp"
#include "zacn/metrics.hpp"
#include "zacn/tensor.hpp"

namespace zacn {

enum SceneClass : Label { kGround = 0, kWall = 1, kBox = 2 };
inline constexpr std::size_t kSceneClasses = 3;

struct SceneGeometry {
  /// Ground plane: cos(pitch) * Y + sin(pitch) * Z = camera_height.
  double pitch = 0.3;
  double camera_height = 1.1;
  double wall_depth = 4.5;
  /// Axis-aligned box in camera coordinates.
  Point3 box_min{-0.35, -0.3, 2.4};
  Point3 box_max{0.35, 0.4, 2.9};

  Point3 ground_normal() const { return {0.0, std::cos(pitch), std::sin(pitch)}; }
};

/// Appearance parameters shared by all scenes of a benchmark.
struct SceneStyle {
  std::array<std::array<double, 3>, kSceneClasses> base_color{{{0.50, 0.48, 0.45}, {0.48, 0.50, 0.47}, {0.52, 0.47, 0.44}}};
  /// Checker period in meters per class.
  std::array<double, kSceneClasses> texture_period{0.15, 0.40, 0.25};
  double texture_amplitude = 0.18;
  double noise_sigma = 0.05;
};

struct Scene {
  Tensor rgb;                 // (3, H, W), values in [0, 1]
  DepthMap depth;             // meters, valid everywhere
  std::vector<Label> labels;  // H * W, row-major
  CameraIntrinsics intrinsics;
  SceneGeometry geometry;

  std::size_t height() const { return depth.height(); }
  std::size_t width() const { return depth.width(); }
};

/// Intrinsics used by the synthetic benchmark: focal length equal to the
/// image width, principal point at the image center.
inline CameraIntrinsics benchmark_intrinsics(std::size_t height, std::size_t width) {
  return {static_cast<double>(width), static_cast<double>(width), (static_cast<double>(width) - 1.0) / 2.0,
          (static_cast<double>(height) - 1.0) / 2.0};
}

/// Geometry drawn from `seed`; the box always sits on the ground in front of the wall.
inline SceneGeometry random_geometry(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SceneGeometry g;
  g.pitch = uniform(0.15, 0.45);
  g.camera_height = uniform(0.9, 1.3);
  g.wall_depth = uniform(3.5, 6.0);
  const double front = uniform(1.8, std::min(3.0, g.wall_depth - 0.8));
  const double width = uniform(0.5, 0.9);
  const double height = uniform(0.5, 0.9);
  const double center_x = uniform(-0.4, 0.4);
  // Ground height under the box front face.
  const double ground_y = (g.camera_height - std::sin(g.pitch) * front) / std::cos(g.pitch);
  g.box_min = {center_x - width / 2, ground_y - height, front};
  g.box_max = {center_x + width / 2, ground_y, front + 0.5};
  return g;
}

namespace detail {

/// Ray parameter of the first hit with an axis-aligned box, or +inf.
inline double ray_box(const Point3& d, const Point3& lo, const Point3& hi) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  const std::array<double, 3> dir{d.x, d.y, d.z};
  const std::array<double, 3> mn{lo.x, lo.y, lo.z};
  const std::array<double, 3> mx{hi.x, hi.y, hi.z};
  for (std::size_t a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (0.0 < mn[a] || 0.0 > mx[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = mn[a] / dir[a];
    double tb = mx[a] / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return (t0 <= t1 && t0 > 0.0) ? t0 : std::numeric_limits<double>::infinity();
}

inline double checker(const Point3& p, double period) {
  const long s = static_cast<long>(std::floor(p.x / period)) + static_cast<long>(std::floor(p.y / period)) +
                 static_cast<long>(std::floor(p.z / period));
  return (s & 1L) ? 1.0 : -1.0;
}

}  // namespace detail

/// Renders `geometry`; noise is drawn from `seed`.
inline Scene render_scene(const SceneGeometry& geometry, std::uint64_t seed, const CameraIntrinsics& k,
                          std::size_t height, std::size_t width, const SceneStyle& style = {}) {
  if (height < 16 || width < 16) throw DomainError("synthetic scenes need H, W >= 16");
  k.validate();
  Scene s;
  s.intrinsics = k;
  s.geometry = geometry;
  s.depth = DepthMap(height, width);
  s.labels.assign(height * width, kWall);
  s.rgb = Tensor({3, height, width});

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, style.noise_sigma);
  const Point3 ng = geometry.ground_normal();

  for (std::size_t row = 0; row < height; ++row) {
    for (std::size_t col = 0; col < width; ++col) {
      // Every ray has z component 1, so the hit parameter is the Z depth.
      const Point3 d = pixel_ray({static_cast<double>(col), static_cast<double>(row)}, k);
      double t = geometry.wall_depth;
      Label label = kWall;
      const double denom = dot(ng, d);
      if (denom > 0.0) {
        const double tg = geometry.camera_height / denom;
        if (tg < t) {
          t = tg;
          label = kGround;
        }
      }
      const double tb = detail::ray_box(d, geometry.box_min, geometry.box_max);
      if (tb < t) {
        t = tb;
        label = kBox;
      }
      const std::size_t idx = row * width + col;
      s.depth.at(row, col) = t;
      s.labels[idx] = label;
      const Point3 p = t * d;
      const double tex = style.texture_amplitude * detail::checker(p, style.texture_period[label]);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = style.base_color[label][c] + tex + noise(rng);
        s.rgb[c * height * width + idx] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return s;
}

/// Deterministic scene for `seed`: random geometry plus seeded noise.
inline Scene generate_scene(std::uint64_t seed, const CameraIntrinsics& k, std::size_t height, std::size_t width,
                            const SceneStyle& style = {}) {
  return render_scene(random_geometry(seed), seed, k, height, width, style);
}

}  // namespace zacn
