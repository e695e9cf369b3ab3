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

#include <cmath>

#include "zacn/errors.hpp"

namespace zacn {

/// Pinhole intrinsics in pixels. Depth is Z along the optical axis, the
/// image v axis points down, so Y grows downward in the camera frame.
struct CameraIntrinsics {
  double fu = 1.0;
  double fv = 1.0;
  double cu = 0.0;
  double cv = 0.0;

  bool valid() const {
    return std::isfinite(fu) && std::isfinite(fv) && fu > 0.0 && fv > 0.0 &&
           std::isfinite(cu) && std::isfinite(cv);
  }

  void validate() const {
    if (!valid()) {
      throw DomainError("camera intrinsics require finite fu > 0, fv > 0 and finite cu, cv");
    }
  }
};

/// Metric point (or direction) in the camera frame.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;
};

inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }

inline Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Fractional image location: u is the column, v the row.
struct Pixel {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

inline Point3 back_project(const Pixel& p, double z, const CameraIntrinsics& k) {
  if (!std::isfinite(z) || z <= 0.0) {
    throw DomainError("back_project: depth must be positive and finite");
  }
  return {(p.u - k.cu) * z / k.fu, (p.v - k.cv) * z / k.fv, z};
}

inline Pixel project(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) {
    throw DomainError("project: point is on or behind the camera plane");
  }
  return {k.fu * p.x / p.z + k.cu, k.fv * p.y / p.z + k.cv};
}

/// Unit-less viewing ray through `p` with z component 1.
inline Point3 pixel_ray(const Pixel& p, const CameraIntrinsics& k) {
  return {(p.u - k.cu) / k.fu, (p.v - k.cv) / k.fv, 1.0};
}

}  // namespace zacn
