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


// Acceptance suite: one PASS/FAIL line per criterion with its measured
// values, tolerances and runtime. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "zacn/deform_conv.hpp"
#include "zacn/io.hpp"
#include "zacn/metrics.hpp"
#include "zacn/offset_engine.hpp"
#include "zacn/toy_net.hpp"

namespace {

using namespace zacn;
namespace fs = std::filesystem;

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> run;
};

CameraIntrinsics random_intrinsics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(30.0, 120.0);
  std::uniform_real_distribution<double> c(-0.3, 0.3);
  const double fu = f(rng);
  return {fu, fu * std::uniform_real_distribution<double>(0.8, 1.25)(rng), 12.0 + 10 * c(rng), 10.0 + 10 * c(rng)};
}

Point3 random_tilted_normal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tilt(0.15, 1.0);  // up to ~57 degrees
  std::uniform_real_distribution<double> az(0.0, 2 * std::numbers::pi);
  const double t = tilt(rng);
  const double a = az(rng);
  return {std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), std::cos(t)};
}

/// Scene depth of the plane n.P = d at fractional pixel (u, v).
double plane_depth_at(const Point3& n, double d, const CameraIntrinsics& k, double u, double v) {
  return d / dot(n, pixel_ray({u, v}, k));
}

DepthMap plane_depth(std::size_t h, std::size_t w, const CameraIntrinsics& k, const Point3& n, double d) {
  DepthMap depth(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) depth.at(r, c) = plane_depth_at(n, d, k, c, r);
  }
  return depth;
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// 1. Constant depth: offsets vanish and the layer equals a plain convolution.
Outcome degeneracy() {
  std::mt19937_64 rng(101);
  double worst_offset = 0.0;
  double worst_conv = 0.0;
  const int maps = 120;
  for (int m = 0; m < maps; ++m) {
    const std::size_t h = 12 + rng() % 13;
    const std::size_t w = 12 + rng() % 13;
    const double z = std::uniform_real_distribution<double>(0.2, 12.0)(rng);
    const int kernel = (m % 2) ? 5 : 3;
    const ConvSpec spec{kernel, 1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 2),
                        static_cast<int>(rng() % 3)};
    const auto field = compute_offset_field(DepthMap(h, w, z), random_intrinsics(rng), spec);
    worst_offset = std::max(worst_offset, static_cast<double>(field.max_abs()));
    const Tensor x = random_tensor({2, h, w}, rng);
    const auto K = static_cast<std::size_t>(kernel);
    const Tensor wts = random_tensor({3, 2, K, K}, rng);
    const std::vector<double> bias{0.1, -0.3, 0.7};
    const Tensor y = deform::forward<double>(x, wts, bias, field, spec);
    const Tensor ref = oracle::naive_conv(x, wts, bias, spec);
    for (std::size_t k = 0; k < y.size(); ++k) worst_conv = std::max(worst_conv, std::abs(y[k] - ref[k]));
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d maps, max|offset| %.3g px (< 1e-6), max|y - conv| %.3g (<= 1e-10)", maps,
                worst_offset, worst_conv);
  return {worst_offset < 1e-6 && worst_conv <= 1e-10, buf};
}

// 2. Fronto-parallel planes: RF diameter scales with Z_p / Z.
Outcome scale_law() {
  const CameraIntrinsics k{50, 55, 15.5, 15.5};
  const double zp = 1.7;
  double worst = 0.0;
  int cases = 0;
  for (double ratio : {0.5, 1.0, 2.0, 4.0}) {
    for (int kernel : {3, 5}) {
      for (int dilation : {1, 2, 3}) {
        const ConvSpec spec{kernel, dilation, 1, 0};
        const auto field = compute_offset_field(DepthMap(32, 32, ratio * zp), k, spec, zp);
        const double regular = static_cast<double>((kernel - 1) * dilation);
        const std::size_t last = static_cast<std::size_t>(kernel) - 1;
        for (std::size_t i = 0; i < field.height; i += 3) {
          for (std::size_t j = 0; j < field.width; j += 3) {
            const auto taps = sampled_taps(field, spec, i, j);
            const double du = taps[last].u - taps[0].u;
            const double dv = taps[last * static_cast<std::size_t>(kernel)].v - taps[0].v;
            worst = std::max({worst, std::abs(du - regular / ratio), std::abs(dv - regular / ratio)});
          }
        }
        ++cases;
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d depth/kernel cases, max diameter error %.3g px (<= 1e-6)", cases, worst);
  return {worst <= 1e-6, buf};
}

// 3. Tilted planes: taps stay on the fitted plane; the fit beats a 1-degree grid.
Outcome planarity() {
  std::mt19937_64 rng(303);
  const int scenes = 24;
  double worst_dist = 0.0;
  double worst_angle = 0.0;
  int grid_losses = 0;
  int fits = 0;
  int adapted = 0;
  for (int s = 0; s < scenes; ++s) {
    const CameraIntrinsics k = random_intrinsics(rng);
    const Point3 n = random_tilted_normal(rng);
    const double d = std::uniform_real_distribution<double>(1.0, 4.0)(rng);
    const DepthMap depth = plane_depth(24, 24, k, n, d);
    // Padding 0 keeps every footprint inside the image, so the depth the fit
    // sees is the plane itself rather than border-clamped copies of it.
    const ConvSpec spec{3, 1 + s % 2, 1, 0};
    const auto field = compute_offset_field(depth, k, spec);
    const auto sf = scale_factors(spec, *depth.mean_valid(), k);
    for (std::size_t i = 0; i < field.height; ++i) {
      for (std::size_t j = 0; j < field.width; ++j) {
        const auto loc = adapt_location(depth, k, spec, spec.center(i), spec.center(j), sf);
        if (!loc.adapted) continue;
        ++adapted;
        worst_angle = std::max(worst_angle, oracle::angle_between_axes(loc.normal.vec(), n));
        for (const auto& t : sampled_taps(field, spec, i, j)) {
          const Point3 p = back_project(t, plane_depth_at(n, d, k, t.u, t.v), k);
          worst_dist = std::max(worst_dist, std::abs(dot(loc.normal.vec(), p - loc.anchor)));
        }
      }
    }

    // Noisy samples of the same plane against the exhaustive grid.
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int q = 0; q < 8; ++q) {
      const long row = 3 + static_cast<long>(rng() % 18);
      const long col = 3 + static_cast<long>(rng() % 18);
      const Point3 anchor = back_project({static_cast<double>(col), static_cast<double>(row)}, depth.at(row, col), k);
      std::vector<Point3> pts;
      for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) {
          if (!(a || b)) continue;
          const double z = depth.at(row + 2 * a, col + 2 * b) * (1.0 + noise(rng));
          pts.push_back(back_project({static_cast<double>(col + 2 * b), static_cast<double>(row + 2 * a)}, z, k));
        }
      }
      const double fit = plane_residual(pts, anchor, fit_plane_normal(pts, anchor).vec());
      const double grid = oracle::sphere_grid_min(pts, anchor, std::numbers::pi / 180.0).residual;
      grid_losses += fit > grid;
      ++fits;
    }
  }
  char buf[300];
  std::snprintf(buf, sizeof buf,
                "%d planes, %d adapted locations, max tap-to-plane %.3g m (<= 1e-6), max normal error %.3g rad; "
                "fit worse than 1-degree grid in %d/%d noisy fits",
                scenes, adapted, worst_dist, worst_angle, grid_losses, fits);
  return {worst_dist <= 1e-6 && grid_losses == 0 && adapted > 0, buf};
}

// 4. Scaling every depth by s leaves the offsets unchanged (auto Z_p).
Outcome depth_scaling() {
  std::mt19937_64 rng(404);
  std::vector<std::pair<DepthMap, CameraIntrinsics>> inputs;
  for (int s = 0; s < 6; ++s) {
    const CameraIntrinsics k = random_intrinsics(rng);
    inputs.emplace_back(plane_depth(24, 24, k, random_tilted_normal(rng), 2.0), k);
  }
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Scene scene = generate_scene(seed, benchmark_intrinsics(32, 32), 32, 32);
    inputs.emplace_back(scene.depth, scene.intrinsics);
  }
  double worst = 0.0;
  for (const auto& [depth, k] : inputs) {
    for (const ConvSpec spec : {ConvSpec{3, 1, 1, 1}, ConvSpec{3, 2, 1, 2}, ConvSpec{5, 1, 2, 2}}) {
      const auto base = compute_offset_field(depth, k, spec);
      for (double s : {0.5, 2.0, 10.0}) {
        DepthMap scaled = depth;
        for (auto& z : scaled.values()) z *= s;
        const auto f = compute_offset_field(scaled, k, spec);
        for (std::size_t i = 0; i < f.values.size(); ++i) {
          worst = std::max(worst, static_cast<double>(std::abs(f.values[i] - base.values[i])));
        }
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu depth maps x 3 specs x s in {0.5, 2, 10}, max diff %.3g px (<= 1e-6)",
                inputs.size(), worst);
  return {worst <= 1e-6, buf};
}

// 5. Analytic gradients against central differences.
Outcome gradients() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  int partials = 0;
  const int instances = 12;
  for (int inst = 0; inst < instances; ++inst) {
    const std::size_t ci = 1 + rng() % 4;
    const std::size_t co = 1 + rng() % 3;
    const std::size_t h = 5 + rng() % 4;
    const std::size_t w = 5 + rng() % 4;
    const ConvSpec spec{3, 1 + static_cast<int>(rng() % 2), 1, static_cast<int>(rng() % 3)};
    Tensor x = random_tensor({ci, h, w}, rng);
    Tensor wts = random_tensor({co, ci, 3, 3}, rng);
    OffsetField f = OffsetField::zeros(spec, spec.output_extent(h), spec.output_extent(w));
    std::uniform_real_distribution<float> off(-2.0f, 2.0f);
    for (auto& v : f.values) v = off(rng);
    // Quadratic loss 0.5 * |y|^2: its gradient with respect to y is y.
    auto loss = [&] {
      const Tensor y = deform::forward<double>(x, wts, {}, f, spec);
      double s = 0.0;
      for (double v : y.values()) s += 0.5 * v * v;
      return s;
    };
    const Tensor y = deform::forward<double>(x, wts, {}, f, spec);
    const auto g = deform::backward<double>(x, wts, f, spec, y);
    auto check = [&](double analytic, double numeric) {
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      if (scale > 0.0) worst = std::max(worst, std::abs(analytic - numeric) / scale);
      ++partials;
    };
    for (std::size_t k = 0; k < wts.size(); ++k) check(g.weights[k], oracle::central_difference(wts[k], loss, 1e-4));
    for (std::size_t k = 0; k < x.size(); ++k) check(g.input[k], oracle::central_difference(x[k], loss, 1e-4));
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d instances, %d partials, max relative error %.3g (<= 1e-5)", instances, partials,
                worst);
  return {worst <= 1e-5, buf};
}

// 6. Toy benchmark: depth guidance beats the zero-offset net on average.
Outcome segmentation() {
  double guided = 0.0;
  double plain = 0.0;
  std::string per_seed;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    const double g = run_benchmark(benchmark_config(seed, true), kBenchmarkTrainScenes).test_report.m_iou;
    const double p = run_benchmark(benchmark_config(seed, false), kBenchmarkTrainScenes).test_report.m_iou;
    guided += g / seeds;
    plain += p / seeds;
    char buf[64];
    std::snprintf(buf, sizeof buf, " [%d: %.4f vs %.4f]", seed, g, p);
    per_seed += buf;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "mean test mIoU guided %.4f, zero-offset %.4f, margin %+.4f;", guided, plain,
                guided - plain);
  return {guided > plain, buf + per_seed};
}

// 7. Metrics against direct counting.
Outcome metrics_oracle() {
  std::mt19937_64 rng(707);
  int mismatches = 0;
  const int maps = 20;
  for (int m = 0; m < maps; ++m) {
    const int classes = 2 + m % 5;
    std::uniform_int_distribution<Label> label(0, classes - 1);
    std::vector<Label> truth(64), pred(64);
    for (auto& v : truth) v = label(rng);
    for (std::size_t k = 0; k < 64; ++k) pred[k] = (rng() % 2) ? truth[k] : label(rng);
    const auto r = evaluate(pred, truth, static_cast<std::size_t>(classes));
    const auto o = oracle::count_metrics(pred, truth, classes);
    bool same = r.acc == o.acc && r.m_acc == o.m_acc && r.m_iou == o.m_iou && r.fw_iou == o.fw_iou;
    for (int c = 0; c < classes; ++c) {
      const auto& iou = r.class_iou[static_cast<std::size_t>(c)];
      same = same && (iou ? *iou == o.iou[static_cast<std::size_t>(c)] : std::isnan(o.iou[static_cast<std::size_t>(c)]));
    }
    mismatches += !same;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d random 8x8 maps, %d mismatches (exact equality)", maps, mismatches);
  return {mismatches == 0, buf};
}

// 8. File format round trips.
Outcome formats() {
  std::mt19937_64 rng(808);
  const fs::path dir = fs::temp_directory_path() / ("zacn_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  int failures = 0;
  int trials = 0;
  std::uniform_real_distribution<float> uf(-50.0f, 50.0f);
  for (int t = 0; t < 10; ++t, ++trials) {
    OffsetField f(18, 5 + rng() % 10, 5 + rng() % 10);
    for (auto& v : f.values) v = uf(rng);
    io::save_offsets(dir / "f.zoff", f);
    failures += !(io::load_offsets(dir / "f.zoff", ConvSpec{3, 1, 1, 0}) == f);

    TensorF tensor({1 + rng() % 4, 1 + rng() % 5, 3});
    for (auto& v : tensor.values()) v = uf(rng);
    io::save_tensor(dir / "t.zten", tensor);
    failures += !(io::load_tensor(dir / "t.zten") == tensor);

    const std::size_t h = 3 + rng() % 8;
    const std::size_t w = 3 + rng() % 8;
    std::vector<double> pfm(h * w);
    for (auto& v : pfm) v = std::abs(uf(rng));
    io::save_depth_pfm(dir / "d.pfm", DepthMap(h, w, pfm));
    failures += !(io::load_depth(dir / "d.pfm").values() == pfm);

    std::vector<double> pgm(h * w);
    std::vector<long> counts(h * w);
    for (std::size_t k = 0; k < pgm.size(); ++k) {
      counts[k] = static_cast<long>(rng() % 65536);
      pgm[k] = static_cast<double>(counts[k]) * 0.001;
    }
    io::save_depth_pgm(dir / "d.pgm", DepthMap(h, w, pgm));
    const DepthMap back = io::load_depth(dir / "d.pgm");
    for (std::size_t k = 0; k < pgm.size(); ++k) {
      const long got = back.valid(k / w, k % w) ? std::lround(back.values()[k] / 0.001) : 0;
      failures += got != counts[k];
    }

    Tensor rgb({3, h, w});
    for (auto& v : rgb.values()) v = static_cast<double>(rng() % 256) / 255.0;
    io::save_rgb(dir / "c.ppm", rgb);
    failures += !(io::load_rgb(dir / "c.ppm") == rgb);
  }
  fs::remove_all(dir);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d trials x {ZOFF, ZTEN, PFM, PGM, PPM}, %d mismatches", trials, failures);
  return {failures == 0, buf};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "degeneracy", 10.0, degeneracy},
      {2, "scale law", 5.0, scale_law},
      {3, "planarity", 60.0, planarity},
      {4, "depth-scaling invariance", 5.0, depth_scaling},
      {5, "gradients", 30.0, gradients},
      {6, "toy segmentation", 900.0, segmentation},
      {7, "metrics oracle", 1.0, metrics_oracle},
      {8, "format round trips", 5.0, formats},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.time_limit_s;
    const bool pass = o.ok && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s; %.2f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), seconds, c.time_limit_s);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
