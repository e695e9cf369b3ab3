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


// zacn: depth-adapted offsets, receptive-field plots, and the toy
// segmentation benchmark from the command line.
//
// Exit codes: 0 success, 1 domain/format/training error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "zacn/io.hpp"
#include "zacn/offset_engine.hpp"
#include "zacn/toy_net.hpp"

namespace {

namespace fs = std::filesystem;
using namespace zacn;

constexpr int kUsageError = 2;
constexpr int kRunError = 1;

struct OffsetsArgs {
  std::string depth;
  std::string intrinsics;
  int kernel = 3;
  int dilation = 1;
  int stride = 1;
  int padding = 0;
  std::optional<double> zref;
  std::string out;
};

struct ShowRfArgs {
  std::string depth;
  std::string intrinsics;
  std::string at;
  int kernel = 3;
  int dilation = 1;
  std::string out;
  bool verify = false;
};

struct TrainArgs {
  std::string config;
  std::size_t scenes = kBenchmarkTrainScenes;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalArgs {
  std::string model;
  std::size_t scenes = 16;
  std::uint64_t seed = 0;
};

int run_offsets(const OffsetsArgs& a) {
  const DepthMap depth = io::load_depth(a.depth);
  const CameraIntrinsics k = io::load_intrinsics(a.intrinsics);
  const ConvSpec spec{a.kernel, a.dilation, a.stride, a.padding};
  const OffsetField field = compute_offset_field(depth, k, spec, a.zref);
  io::save_offsets(a.out, field);
  const double zp = a.zref.value_or(default_reference_depth(depth));
  std::printf("depth %zux%zu, Z_p %.6g m\n", depth.height(), depth.width(), zp);
  std::printf("offsets %zu channels x %zu x %zu, max |offset| %.6g px -> %s\n", field.channels, field.height,
              field.width, static_cast<double>(field.max_abs()), a.out.c_str());
  return 0;
}

/// Inverse-depth bilinear interpolation; exact on planar surfaces.
double interpolate_depth(const DepthMap& depth, double u, double v) {
  u = std::clamp(u, 0.0, static_cast<double>(depth.width() - 1));
  v = std::clamp(v, 0.0, static_cast<double>(depth.height() - 1));
  const auto c0 = static_cast<std::size_t>(std::floor(u));
  const auto r0 = static_cast<std::size_t>(std::floor(v));
  const std::size_t c1 = std::min(c0 + 1, depth.width() - 1);
  const std::size_t r1 = std::min(r0 + 1, depth.height() - 1);
  const double lu = u - static_cast<double>(c0);
  const double lv = v - static_cast<double>(r0);
  const double inv = (1 - lv) * ((1 - lu) / depth.at(r0, c0) + lu / depth.at(r0, c1)) +
                     lv * ((1 - lu) / depth.at(r1, c0) + lu / depth.at(r1, c1));
  return 1.0 / inv;
}

Tensor render_depth(const DepthMap& depth) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double z : depth.values()) {
    if (is_valid_depth(z)) {
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  Tensor img({3, depth.height(), depth.width()});
  for (std::size_t r = 0; r < depth.height(); ++r) {
    for (std::size_t c = 0; c < depth.width(); ++c) {
      const double z = depth.at(r, c);
      // Near is bright; missing depth stays black.
      const double g = is_valid_depth(z) ? 0.2 + 0.8 * (hi - z) / span : 0.0;
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(ch, r, c) = g;
    }
  }
  return img;
}

int run_show_rf(const ShowRfArgs& a) {
  double u = 0.0;
  double v = 0.0;
  {
    const auto comma = a.at.find(',');
    char* end = nullptr;
    bool ok = comma != std::string::npos;
    if (ok) {
      const std::string us = a.at.substr(0, comma);
      const std::string vs = a.at.substr(comma + 1);
      u = std::strtod(us.c_str(), &end);
      ok = !us.empty() && *end == '\0';
      v = std::strtod(vs.c_str(), &end);
      ok = ok && !vs.empty() && *end == '\0';
    }
    if (!ok || u != std::floor(u) || v != std::floor(v)) {
      std::cerr << "--at: expected integer pixel coordinates U,V, got '" << a.at << "'\n";
      return kUsageError;
    }
  }
  const DepthMap depth = io::load_depth(a.depth);
  const CameraIntrinsics k = io::load_intrinsics(a.intrinsics);
  if (u < 0 || v < 0 || u >= static_cast<double>(depth.width()) || v >= static_cast<double>(depth.height())) {
    throw DomainError("--at " + a.at + " is outside the " + std::to_string(depth.width()) + "x" +
                      std::to_string(depth.height()) + " depth map");
  }
  const ConvSpec spec{a.kernel, a.dilation, 1, 0};
  spec.validate();
  const auto sf = scale_factors(spec, default_reference_depth(depth), k);
  const auto loc = adapt_location(depth, k, spec, static_cast<long>(v), static_cast<long>(u), sf);

  Tensor img = render_depth(depth);
  for (const auto& t : loc.taps) {
    const long c = std::lround(t.u);
    const long r = std::lround(t.v);
    if (r < 0 || c < 0 || r >= static_cast<long>(depth.height()) || c >= static_cast<long>(depth.width())) continue;
    img.at(0, r, c) = 1.0;
    img.at(1, r, c) = 0.0;
    img.at(2, r, c) = 0.0;
  }
  io::save_rgb(a.out, img);

  std::printf("location (%g, %g): %s\n", u, v, loc.adapted ? "depth-adapted" : "regular grid (fallback)");
  for (std::size_t n = 0; n < loc.taps.size(); ++n) {
    std::printf("  tap %zu: u=%.6f v=%.6f\n", n, loc.taps[n].u, loc.taps[n].v);
  }
  std::printf("wrote %s\n", a.out.c_str());

  if (a.verify) {
    if (!loc.adapted) {
      std::printf("verify: skipped, location uses the regular grid\n");
      return 0;
    }
    double worst = 0.0;
    for (const auto& t : loc.taps) {
      const Point3 p = back_project(t, interpolate_depth(depth, t.u, t.v), k);
      worst = std::max(worst, std::abs(dot(loc.normal.vec(), p - loc.anchor)));
    }
    std::printf("verify: max distance to fitted plane %.3g m\n", worst);
    if (!(worst <= 1e-3)) {
      std::cerr << "verify failed: taps leave the fitted plane by " << worst << " m\n";
      return kRunError;
    }
  }
  return 0;
}

int run_train(const TrainArgs& a) {
  ToyNetConfig cfg = parse_toy_config(io::load_key_values(a.config));
  cfg.seed = a.seed;
  const BenchmarkRun run = run_benchmark(cfg, a.scenes);
  const fs::path out(a.out);
  save_model(out, run.trained.net);
  io::write_file(out / "loss.csv", encode_loss_csv(run.trained.loss_trace));
  io::write_file(out / "metrics.txt", encode_metrics(run.test_report));
  const auto& trace = run.trained.loss_trace;
  std::printf("trained on %zu scenes for %zu steps, final loss %.6g\n", a.scenes, trace.size(),
              trace.empty() ? 0.0 : trace.back());
  std::printf("held-out (%zu scenes): %s", cfg.test_scenes, encode_metrics(run.test_report).c_str());
  return 0;
}

int run_eval(const EvalArgs& a) {
  const ToyNet net = load_model(a.model);
  const auto scenes = benchmark_scenes(a.seed, SceneSplit::kTest, a.scenes, net.config.height, net.config.width);
  const MetricsReport r = evaluate_net(net, prepare_scenes(scenes, net));
  std::printf("%s", encode_metrics(r).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-adapted convolution tools"};
  app.require_subcommand(1);

  OffsetsArgs offsets;
  auto* off = app.add_subcommand("offsets", "Compute the offset field of a depth map and write it as ZOFF");
  off->add_option("--depth", offsets.depth, "Depth map (16-bit PGM in mm, or PFM in m)")->required();
  off->add_option("--intrinsics", offsets.intrinsics, "Intrinsics file (fu, fv, cu, cv)")->required();
  off->add_option("--kernel", offsets.kernel, "Kernel size N (odd)")->required();
  off->add_option("--dilation", offsets.dilation, "Dilation")->required();
  off->add_option("--stride", offsets.stride, "Stride")->required();
  off->add_option("--padding", offsets.padding, "Padding")->required();
  off->add_option("--zref", offsets.zref, "Reference depth in meters (default: mean valid depth)");
  off->add_option("--out", offsets.out, "Output ZOFF file")->required();

  ShowRfArgs show;
  auto* rf = app.add_subcommand("show-rf", "Draw the adapted receptive field at one pixel");
  rf->add_option("--depth", show.depth, "Depth map")->required();
  rf->add_option("--intrinsics", show.intrinsics, "Intrinsics file")->required();
  rf->add_option("--at", show.at, "Pixel U,V")->required();
  rf->add_option("--kernel", show.kernel, "Kernel size N (odd)")->required();
  rf->add_option("--dilation", show.dilation, "Dilation")->required();
  rf->add_option("--out", show.out, "Output PPM")->required();
  rf->add_flag("--verify", show.verify, "Check that the taps lie on the fitted plane");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train the toy segmentation net on synthetic scenes");
  tr->add_option("--config", train.config, "key=value config file")->required();
  tr->add_option("--scenes", train.scenes, "Number of training scenes")->required();
  tr->add_option("--seed", train.seed, "Seed for scenes and initialization")->required();
  tr->add_option("--out", train.out, "Output directory")->required();

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Score a trained model on held-out synthetic scenes");
  ev->add_option("--model", eval.model, "Model directory written by train")->required();
  ev->add_option("--scenes", eval.scenes, "Number of held-out scenes")->required();
  ev->add_option("--seed", eval.seed, "Seed the model was trained with")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (off->parsed()) return run_offsets(offsets);
    if (rf->parsed()) return run_show_rf(show);
    if (tr->parsed()) return run_train(train);
    if (ev->parsed()) return run_eval(eval);
  } catch (const zacn::TrainingError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return kRunError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunError;
  }
  return kUsageError;
}
