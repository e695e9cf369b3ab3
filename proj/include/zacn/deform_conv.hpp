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

// Deformable 2D convolution with fixed, externally supplied offsets.
//
//   y(c, p) = b(c) + sum_ci sum_n w(c, ci, n) * x_ci(p + p_n + dp_n)
//
// Fractional sample positions are resolved with bilinear interpolation;
// neighbors outside the image contribute zero. There is no gradient with
// respect to the offsets. All sums run in double, in the fixed order
// (input channel, then tap) for every output element.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zacn/errors.hpp"
#include "zacn/offset_engine.hpp"
#include "zacn/tensor.hpp"

namespace zacn::deform {

/// Up to four neighbors of a fractional sample position. `index` is -1 for
/// neighbors outside the image.
struct BilinearTap {
  std::array<long, 4> index{-1, -1, -1, -1};
  std::array<double, 4> weight{0.0, 0.0, 0.0, 0.0};
};

inline BilinearTap bilinear_tap(std::size_t height, std::size_t width, double row, double col) {
  BilinearTap t;
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  if (!(row > -1.0 && row < h && col > -1.0 && col < w)) {
    return t;
  }
  const long r0 = static_cast<long>(std::floor(row));
  const long c0 = static_cast<long>(std::floor(col));
  const long r1 = r0 + 1;
  const long c1 = c0 + 1;
  const double lr = row - static_cast<double>(r0);
  const double lc = col - static_cast<double>(c0);
  const double hr = 1.0 - lr;
  const double hc = 1.0 - lc;
  const long H = static_cast<long>(height);
  const long W = static_cast<long>(width);

  const std::array<long, 4> rows{r0, r0, r1, r1};
  const std::array<long, 4> cols{c0, c1, c0, c1};
  const std::array<double, 4> weights{hr * hc, hr * lc, lr * hc, lr * lc};
  for (std::size_t k = 0; k < 4; ++k) {
    if (rows[k] >= 0 && rows[k] < H && cols[k] >= 0 && cols[k] < W) {
      t.index[k] = rows[k] * W + cols[k];
      t.weight[k] = weights[k];
    }
  }
  return t;
}

template <typename T>
double sample(std::span<const T> plane, const BilinearTap& t) {
  double v = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (t.index[k] >= 0) v += t.weight[k] * static_cast<double>(plane[static_cast<std::size_t>(t.index[k])]);
  }
  return v;
}

/// Bilinear read of an (H, W) plane at fractional (row, col); zero outside.
template <typename T>
double bilinear_sample(std::span<const T> plane, std::size_t height, std::size_t width, double row, double col) {
  return sample(plane, bilinear_tap(height, width, row, col));
}

/// Interpolation taps for every (kernel tap, output location) pair. Depends
/// only on the input size, the offsets, and the spec, so it can be reused
/// across channels, forward and backward passes, and training steps.
struct SamplingPlan {
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_height = 0;
  std::size_t out_width = 0;
  std::size_t taps = 0;
  std::vector<BilinearTap> entries;  // [tap][out_row][out_col]

  const BilinearTap& at(std::size_t n, std::size_t p) const { return entries[n * out_height * out_width + p]; }
};

inline SamplingPlan make_sampling_plan(std::size_t height, std::size_t width, const OffsetField& offsets,
                                       const ConvSpec& spec) {
  spec.validate();
  check_offsets_match(offsets, spec);
  SamplingPlan plan;
  plan.in_height = height;
  plan.in_width = width;
  plan.out_height = spec.output_extent(height);
  plan.out_width = spec.output_extent(width);
  if (offsets.height != plan.out_height || offsets.width != plan.out_width) {
    throw ShapeError("offset field is " + std::to_string(offsets.height) + "x" + std::to_string(offsets.width) +
                     " but the convolution output is " + std::to_string(plan.out_height) + "x" +
                     std::to_string(plan.out_width));
  }
  const auto grid = regular_grid(spec);
  plan.taps = grid.size();
  plan.entries.resize(plan.taps * plan.out_height * plan.out_width);
  for (std::size_t n = 0; n < plan.taps; ++n) {
    for (std::size_t i = 0; i < plan.out_height; ++i) {
      for (std::size_t j = 0; j < plan.out_width; ++j) {
        const double row = static_cast<double>(spec.center(i) + grid[n].row) + offsets.row_offset(n, i, j);
        const double col = static_cast<double>(spec.center(j) + grid[n].col) + offsets.col_offset(n, i, j);
        plan.entries[(n * plan.out_height + i) * plan.out_width + j] = bilinear_tap(height, width, row, col);
      }
    }
  }
  return plan;
}

template <typename T>
void check_weights(const BasicTensor<T>& x, const BasicTensor<T>& weights, std::size_t bias_size,
                   const ConvSpec& spec) {
  if (x.rank() != 3) throw ShapeError("input must be (C, H, W), got " + shape_string(x.shape()));
  if (weights.rank() != 4 || weights.dim(2) != static_cast<std::size_t>(spec.kernel_size) ||
      weights.dim(3) != static_cast<std::size_t>(spec.kernel_size)) {
    throw ShapeError("weights " + shape_string(weights.shape()) + " do not match kernel size " +
                     std::to_string(spec.kernel_size));
  }
  if (weights.dim(1) != x.dim(0)) {
    throw ShapeError("weights expect " + std::to_string(weights.dim(1)) + " input channels, input has " +
                     std::to_string(x.dim(0)));
  }
  if (bias_size != 0 && bias_size != weights.dim(0)) {
    throw ShapeError("bias has " + std::to_string(bias_size) + " entries for " + std::to_string(weights.dim(0)) +
                     " output channels");
  }
}

/// Sampled input values, [ci][tap][out location], in double.
template <typename T>
std::vector<double> gather_columns(const BasicTensor<T>& x, const SamplingPlan& plan) {
  const std::size_t channels = x.dim(0);
  const std::size_t hw = plan.out_height * plan.out_width;
  std::vector<double> cols(channels * plan.taps * hw);
  for (std::size_t ci = 0; ci < channels; ++ci) {
    const auto in = x.plane(ci);
    for (std::size_t n = 0; n < plan.taps; ++n) {
      double* dst = cols.data() + (ci * plan.taps + n) * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] = sample(in, plan.at(n, p));
    }
  }
  return cols;
}

template <typename T>
BasicTensor<T> forward(const BasicTensor<T>& x, const BasicTensor<T>& weights, std::span<const T> bias,
                       const SamplingPlan& plan) {
  const std::size_t co = weights.dim(0);
  const std::size_t ci_count = weights.dim(1);
  const std::size_t hw = plan.out_height * plan.out_width;
  if (x.rank() != 3 || x.dim(0) != ci_count || x.dim(1) != plan.in_height || x.dim(2) != plan.in_width) {
    throw ShapeError("input " + shape_string(x.shape()) + " does not match the sampling plan");
  }
  const std::vector<double> cols = gather_columns(x, plan);

  BasicTensor<T> y({co, plan.out_height, plan.out_width});
  std::vector<double> acc(hw);
  for (std::size_t c = 0; c < co; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t ci = 0; ci < ci_count; ++ci) {
      for (std::size_t n = 0; n < plan.taps; ++n) {
        const double w = static_cast<double>(weights[(c * ci_count + ci) * plan.taps + n]);
        const double* src = cols.data() + (ci * plan.taps + n) * hw;
        for (std::size_t p = 0; p < hw; ++p) acc[p] += w * src[p];
      }
    }
    const double b = bias.empty() ? 0.0 : static_cast<double>(bias[c]);
    auto out = y.plane(c);
    for (std::size_t p = 0; p < hw; ++p) out[p] = static_cast<T>(acc[p] + b);
  }
  return y;
}

/// Forward pass for a single (C, H, W) input. `bias` may be empty.
template <typename T>
BasicTensor<T> forward(const BasicTensor<T>& x, const BasicTensor<T>& weights, std::span<const T> bias,
                       const OffsetField& offsets, const ConvSpec& spec) {
  check_weights(x, weights, bias.size(), spec);
  return forward(x, weights, bias, make_sampling_plan(x.dim(1), x.dim(2), offsets, spec));
}

/// Batched forward for (B, C, H, W). `offsets` holds one field per batch item,
/// or a single field shared by all of them.
template <typename T>
BasicTensor<T> forward_batch(const BasicTensor<T>& x, const BasicTensor<T>& weights, std::span<const T> bias,
                             std::span<const OffsetField> offsets, const ConvSpec& spec) {
  if (x.rank() != 4) throw ShapeError("batched input must be (B, C, H, W), got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  if (offsets.size() != 1 && offsets.size() != batch) {
    throw ShapeError("need 1 or " + std::to_string(batch) + " offset fields, got " + std::to_string(offsets.size()));
  }
  const Shape item_shape{x.dim(1), x.dim(2), x.dim(3)};
  const std::size_t item_size = shape_volume(item_shape);
  BasicTensor<T> y;
  for (std::size_t b = 0; b < batch; ++b) {
    BasicTensor<T> item(item_shape, std::vector<T>(x.values().begin() + b * item_size,
                                                   x.values().begin() + (b + 1) * item_size));
    auto out = forward(item, weights, bias, offsets[offsets.size() == 1 ? 0 : b], spec);
    if (b == 0) y = BasicTensor<T>({batch, out.dim(0), out.dim(1), out.dim(2)});
    std::copy(out.values().begin(), out.values().end(), y.values().begin() + b * out.size());
  }
  return y;
}

template <typename T>
struct Gradients {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
Gradients<T> backward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const SamplingPlan& plan,
                      const BasicTensor<T>& grad_out, bool need_input_grad = true) {
  const std::size_t co = weights.dim(0);
  const std::size_t ci_count = weights.dim(1);
  const std::size_t hw = plan.out_height * plan.out_width;
  if (grad_out.rank() != 3 || grad_out.dim(0) != co || grad_out.dim(1) != plan.out_height ||
      grad_out.dim(2) != plan.out_width) {
    throw ShapeError("output gradient " + shape_string(grad_out.shape()) + " does not match the forward output (" +
                     std::to_string(co) + "x" + std::to_string(plan.out_height) + "x" +
                     std::to_string(plan.out_width) + ")");
  }
  if (x.rank() != 3 || x.dim(0) != ci_count || x.dim(1) != plan.in_height || x.dim(2) != plan.in_width) {
    throw ShapeError("input " + shape_string(x.shape()) + " does not match the sampling plan");
  }

  const std::vector<double> cols = gather_columns(x, plan);
  Gradients<T> g;
  g.weights = BasicTensor<T>(weights.shape());
  g.bias.assign(co, T{});

  for (std::size_t c = 0; c < co; ++c) {
    const auto go = grad_out.plane(c);
    double gb = 0.0;
    for (std::size_t p = 0; p < hw; ++p) gb += static_cast<double>(go[p]);
    g.bias[c] = static_cast<T>(gb);
    for (std::size_t ci = 0; ci < ci_count; ++ci) {
      for (std::size_t n = 0; n < plan.taps; ++n) {
        const double* src = cols.data() + (ci * plan.taps + n) * hw;
        double gw = 0.0;
        for (std::size_t p = 0; p < hw; ++p) gw += static_cast<double>(go[p]) * src[p];
        g.weights[(c * ci_count + ci) * plan.taps + n] = static_cast<T>(gw);
      }
    }
  }

  if (!need_input_grad) return g;

  // Column gradients, then a sequential scatter through the bilinear weights.
  std::vector<double> grad_in(x.size(), 0.0);
  std::vector<double> gcol(hw);
  const std::size_t in_hw = plan.in_height * plan.in_width;
  for (std::size_t ci = 0; ci < ci_count; ++ci) {
    for (std::size_t n = 0; n < plan.taps; ++n) {
      std::fill(gcol.begin(), gcol.end(), 0.0);
      for (std::size_t c = 0; c < co; ++c) {
        const double w = static_cast<double>(weights[(c * ci_count + ci) * plan.taps + n]);
        const auto go = grad_out.plane(c);
        for (std::size_t p = 0; p < hw; ++p) gcol[p] += w * static_cast<double>(go[p]);
      }
      double* dst = grad_in.data() + ci * in_hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const BilinearTap& t = plan.at(n, p);
        for (std::size_t k = 0; k < 4; ++k) {
          if (t.index[k] >= 0) dst[t.index[k]] += t.weight[k] * gcol[p];
        }
      }
    }
  }
  g.input = BasicTensor<T>(x.shape(), std::vector<T>(grad_in.begin(), grad_in.end()));
  return g;
}

/// Gradients with respect to input, weights, and bias. Offsets are constants.
template <typename T>
Gradients<T> backward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const OffsetField& offsets,
                      const ConvSpec& spec, const BasicTensor<T>& grad_out) {
  check_weights(x, weights, 0, spec);
  return backward(x, weights, make_sampling_plan(x.dim(1), x.dim(2), offsets, spec), grad_out);
}

}  // namespace zacn::deform
