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


// Offsets on a floor seen by a tilted camera, and one deformable convolution
// over a random image using them.

#include <cmath>
#include <cstdio>
#include <random>

#include "zacn/deform_conv.hpp"
#include "zacn/offset_engine.hpp"

int main() {
  using namespace zacn;
  const std::size_t h = 48;
  const std::size_t w = 64;
  const CameraIntrinsics k{60.0, 60.0, 31.5, 23.5};

  // Floor 1.2 m below the camera, pitched down by 0.4 rad.
  const Point3 n{0.0, std::cos(0.4), std::sin(0.4)};
  DepthMap depth(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const Point3 ray = pixel_ray({static_cast<double>(c), static_cast<double>(r)}, k);
      depth.at(r, c) = 1.2 / dot(n, ray);
    }
  }

  const ConvSpec spec{3, 2, 1, 2};
  const OffsetField field = compute_offset_field(depth, k, spec);
  std::printf("Z_p = %.3f m, %zu offset channels, max |offset| = %.3f px\n", *depth.mean_valid(), field.channels,
              static_cast<double>(field.max_abs()));
  for (std::size_t row : {4u, 24u, 44u}) {
    const auto taps = sampled_taps(field, spec, row, 32);
    std::printf("row %2zu (Z = %.2f m): RF width %.2f px, height %.2f px\n", row, depth.at(row, 32),
                taps[2].u - taps[0].u, taps[6].v - taps[0].v);
  }

  std::mt19937 rng(0);
  std::normal_distribution<double> g;
  Tensor x({2, h, w});
  for (auto& v : x.values()) v = g(rng);
  Tensor weights({4, 2, 3, 3});
  for (auto& v : weights.values()) v = 0.1 * g(rng);
  const Tensor y = deform::forward<double>(x, weights, {}, field, spec);
  std::printf("output %zux%zux%zu, y[0,24,32] = %.6f\n", y.dim(0), y.dim(1), y.dim(2), y.at(0, 24, 32));
  return 0;
}
