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

// A small fully convolutional segmentation network built from depth-guided
// deformable convolutions: hidden layers are N x N convolutions with "same"
// padding followed by ReLU, the classifier is a 1x1 convolution. With depth
// guidance off, every hidden layer receives an all-zero offset field and the
// network is an ordinary (dilated) CNN.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "zacn/deform_conv.hpp"
#include "zacn/errors.hpp"
#include "zacn/io.hpp"
#include "zacn/metrics.hpp"
#include "zacn/offset_engine.hpp"
#include "zacn/scene.hpp"
#include "zacn/tensor.hpp"

namespace zacn {

struct ToyNetConfig {
  std::vector<int> channels{8, 8};   // hidden layer widths
  std::vector<int> kernels{3, 3};    // per hidden layer, odd
  std::vector<int> dilations{1, 1};  // per hidden layer
  double learning_rate = 1e-4;
  double momentum = 0.99;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  bool depth_guidance = true;
  std::uint64_t seed = 0;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t test_scenes = 16;

  void validate() const {
    if (channels.empty()) throw DomainError("config: at least one hidden layer is required");
    if (kernels.size() != channels.size() || dilations.size() != channels.size()) {
      throw DomainError("config: channels, kernels and dilations must list the same number of layers");
    }
    for (std::size_t l = 0; l < channels.size(); ++l) {
      if (channels[l] < 1) throw DomainError("config: channel widths must be >= 1");
      ConvSpec{kernels[l], dilations[l], 1, 0}.validate();
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DomainError("config: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("config: momentum must be in [0, 1)");
    if (batch_size < 1) throw DomainError("config: batch_size must be >= 1");
    if (height < 16 || width < 16) throw DomainError("config: height and width must be >= 16");
  }

  ConvSpec hidden_spec(std::size_t layer) const {
    const int k = kernels[layer];
    const int d = dilations[layer];
    return {k, d, 1, d * (k - 1) / 2};
  }
};

/// Settings of the standard synthetic benchmark (64 train / 16 test scenes
/// at 32x32). The optimizer defaults above are for batch-1 fine-tuning; the
/// toy network trains from scratch in a few epochs with these instead.
inline ToyNetConfig benchmark_config(std::uint64_t seed, bool depth_guidance) {
  ToyNetConfig c;
  c.learning_rate = 0.05;
  c.momentum = 0.9;
  c.epochs = 30;
  c.seed = seed;
  c.depth_guidance = depth_guidance;
  return c;
}

inline constexpr std::size_t kBenchmarkTrainScenes = 64;

namespace detail {

inline std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double v = io::parse_double(io::trim(item), key, "config");
    if (v != std::floor(v)) throw FormatError("config: '" + key + "' entries must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::size_t parse_count(const std::string& value, const std::string& key) {
  const double v = io::parse_double(value, key, "config");
  if (v < 0 || v != std::floor(v)) throw FormatError("config: '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Applies key=value overrides on top of the defaults. Unknown keys are rejected.
inline ToyNetConfig parse_toy_config(const io::KeyValues& kv) {
  ToyNetConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "channels") c.channels = detail::parse_int_list(value, key);
    else if (key == "kernels") c.kernels = detail::parse_int_list(value, key);
    else if (key == "dilations") c.dilations = detail::parse_int_list(value, key);
    else if (key == "learning_rate") c.learning_rate = io::parse_double(value, key, "config");
    else if (key == "momentum") c.momentum = io::parse_double(value, key, "config");
    else if (key == "batch_size") c.batch_size = detail::parse_count(value, key);
    else if (key == "epochs") c.epochs = detail::parse_count(value, key);
    else if (key == "depth_guidance") {
      if (value != "0" && value != "1" && value != "true" && value != "false") {
        throw FormatError("config: depth_guidance must be 0/1/true/false");
      }
      c.depth_guidance = value == "1" || value == "true";
    } else if (key == "seed") c.seed = detail::parse_count(value, key);
    else if (key == "height") c.height = detail::parse_count(value, key);
    else if (key == "width") c.width = detail::parse_count(value, key);
    else if (key == "test_scenes") c.test_scenes = detail::parse_count(value, key);
    else throw FormatError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline std::string encode_toy_config(const ToyNetConfig& c) {
  std::string s;
  s += "channels=" + detail::join_ints(c.channels) + "\n";
  s += "kernels=" + detail::join_ints(c.kernels) + "\n";
  s += "dilations=" + detail::join_ints(c.dilations) + "\n";
  s += "learning_rate=" + io::format_double(c.learning_rate) + "\n";
  s += "momentum=" + io::format_double(c.momentum) + "\n";
  s += "batch_size=" + std::to_string(c.batch_size) + "\n";
  s += "epochs=" + std::to_string(c.epochs) + "\n";
  s += "depth_guidance=" + std::string(c.depth_guidance ? "1" : "0") + "\n";
  s += "seed=" + std::to_string(c.seed) + "\n";
  s += "height=" + std::to_string(c.height) + "\n";
  s += "width=" + std::to_string(c.width) + "\n";
  s += "test_scenes=" + std::to_string(c.test_scenes) + "\n";
  return s;
}

struct ConvLayer {
  ConvSpec spec;
  Tensor weights;  // (C_out, C_in, N, N)
  std::vector<double> bias;
};

struct ToyNet {
  ToyNetConfig config;
  std::vector<ConvLayer> layers;  // hidden layers, then the 1x1 classifier

  std::size_t hidden_layers() const { return layers.size() - 1; }

  /// Rounds every parameter to float32, the precision of the ZTEN container.
  void quantize() {
    for (auto& l : layers) {
      for (auto& w : l.weights.values()) w = static_cast<double>(static_cast<float>(w));
      for (auto& b : l.bias) b = static_cast<double>(static_cast<float>(b));
    }
  }
};

/// Uniform in +-1/sqrt(fan_in), drawn from `config.seed`.
inline ToyNet init_toy_net(const ToyNetConfig& config) {
  config.validate();
  ToyNet net;
  net.config = config;
  std::mt19937_64 rng(config.seed);
  std::size_t in = 3;
  auto make = [&](std::size_t out, ConvSpec spec) {
    const auto k = static_cast<std::size_t>(spec.kernel_size);
    ConvLayer layer{spec, Tensor({out, in, k, k}), std::vector<double>(out)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : layer.weights.values()) w = u(rng);
    for (auto& b : layer.bias) b = u(rng);
    net.layers.push_back(std::move(layer));
    in = out;
  };
  for (std::size_t l = 0; l < config.channels.size(); ++l) {
    make(static_cast<std::size_t>(config.channels[l]), config.hidden_spec(l));
  }
  make(kSceneClasses, ConvSpec{1, 1, 1, 0});
  return net;
}

/// A scene ready for the network: centered input and one sampling plan per
/// layer. Offsets are computed once here and never differentiated.
struct PreparedScene {
  Tensor input;
  std::vector<Label> labels;
  std::vector<deform::SamplingPlan> plans;
};

inline PreparedScene prepare_scene(const Scene& scene, const ToyNet& net) {
  PreparedScene p;
  p.input = scene.rgb;
  for (auto& v : p.input.values()) v -= 0.5;
  p.labels = scene.labels;
  const std::size_t h = scene.height();
  const std::size_t w = scene.width();
  for (const auto& layer : net.layers) {
    const ConvSpec& spec = layer.spec;
    OffsetField offsets = net.config.depth_guidance && spec.kernel_size > 1
                              ? compute_offset_field(scene.depth, scene.intrinsics, spec)
                              : OffsetField::zeros(spec, spec.output_extent(h), spec.output_extent(w));
    p.plans.push_back(deform::make_sampling_plan(h, w, offsets, spec));
  }
  return p;
}

namespace detail {

struct ForwardTrace {
  std::vector<Tensor> activations;  // input to each layer; the last entry is the logits
};

inline ForwardTrace run_forward(const ToyNet& net, const PreparedScene& s) {
  ForwardTrace t;
  t.activations.push_back(s.input);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Tensor y = deform::forward(t.activations.back(), layer.weights, std::span<const double>(layer.bias), s.plans[l]);
    if (l + 1 < net.layers.size()) {
      for (auto& v : y.values()) v = std::max(v, 0.0);
    }
    t.activations.push_back(std::move(y));
  }
  return t;
}

/// Mean pixel cross-entropy and its gradient with respect to the logits.
inline double softmax_cross_entropy(const Tensor& logits, std::span<const Label> labels, Tensor* grad) {
  const std::size_t classes = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  if (grad) *grad = Tensor(logits.shape());
  double loss = 0.0;
  std::vector<double> prob(classes);
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    double mx = logits[p];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits[c * hw + p]);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      prob[c] = std::exp(logits[c * hw + p] - mx);
      z += prob[c];
    }
    const auto y = static_cast<std::size_t>(labels[p]);
    loss -= (logits[y * hw + p] - mx) - std::log(z);
    if (grad) {
      for (std::size_t c = 0; c < classes; ++c) {
        (*grad)[c * hw + p] = (prob[c] / z - (c == y ? 1.0 : 0.0)) * inv;
      }
    }
  }
  return loss * inv;
}

}  // namespace detail

/// Per-pixel argmax of the logits.
inline std::vector<Label> predict(const ToyNet& net, const PreparedScene& s) {
  const Tensor logits = detail::run_forward(net, s).activations.back();
  const std::size_t classes = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  std::vector<Label> out(hw);
  for (std::size_t p = 0; p < hw; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[c * hw + p] > logits[best * hw + p]) best = c;
    }
    out[p] = static_cast<Label>(best);
  }
  return out;
}

/// Raw network output (C, H, W) for a prepared scene.
inline Tensor logits(const ToyNet& net, const PreparedScene& s) { return detail::run_forward(net, s).activations.back(); }

inline double scene_loss(const ToyNet& net, const PreparedScene& s) {
  return detail::softmax_cross_entropy(logits(net, s), s.labels, nullptr);
}

struct TrainResult {
  ToyNet net;
  std::vector<double> loss_trace;  // one entry per optimizer step
};

/// SGD with momentum (v = mu * v + g; p -= lr * v) on the mean pixel
/// cross-entropy. Each step averages gradients over `batch_size` scenes.
inline TrainResult train(ToyNet net, const std::vector<PreparedScene>& scenes) {
  if (scenes.empty()) throw DomainError("training needs at least one scene");
  const ToyNetConfig& cfg = net.config;
  cfg.validate();

  std::vector<Tensor> vel_w;
  std::vector<std::vector<double>> vel_b;
  for (const auto& l : net.layers) {
    vel_w.emplace_back(l.weights.shape());
    vel_b.emplace_back(l.bias.size(), 0.0);
  }

  TrainResult result;
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);

      std::vector<Tensor> grad_w;
      std::vector<std::vector<double>> grad_b;
      for (const auto& l : net.layers) {
        grad_w.emplace_back(l.weights.shape());
        grad_b.emplace_back(l.bias.size(), 0.0);
      }
      double batch_loss = 0.0;

      for (std::size_t b = start; b < end; ++b) {
        const PreparedScene& s = scenes[order[b]];
        const auto trace = detail::run_forward(net, s);
        Tensor grad;
        batch_loss += detail::softmax_cross_entropy(trace.activations.back(), s.labels, &grad);
        for (std::size_t l = net.layers.size(); l-- > 0;) {
          const auto& layer = net.layers[l];
          auto g = deform::backward(trace.activations[l], layer.weights, s.plans[l], grad, l > 0);
          for (std::size_t k = 0; k < g.weights.size(); ++k) grad_w[l][k] += g.weights[k];
          for (std::size_t k = 0; k < g.bias.size(); ++k) grad_b[l][k] += g.bias[k];
          if (l > 0) {
            // ReLU of the previous layer.
            const Tensor& act = trace.activations[l];
            for (std::size_t k = 0; k < act.size(); ++k) {
              if (act[k] <= 0.0) g.input[k] = 0.0;
            }
            grad = std::move(g.input);
          }
        }
      }
      batch_loss *= scale;
      if (!std::isfinite(batch_loss)) throw TrainingError("training diverged (non-finite loss)", step);
      result.loss_trace.push_back(batch_loss);

      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t k = 0; k < layer.weights.size(); ++k) {
          vel_w[l][k] = cfg.momentum * vel_w[l][k] + scale * grad_w[l][k];
          layer.weights[k] -= cfg.learning_rate * vel_w[l][k];
        }
        for (std::size_t k = 0; k < layer.bias.size(); ++k) {
          vel_b[l][k] = cfg.momentum * vel_b[l][k] + scale * grad_b[l][k];
          layer.bias[k] -= cfg.learning_rate * vel_b[l][k];
        }
      }
      ++step;
    }
  }
  result.net = std::move(net);
  return result;
}

/// Initializes from `config`, computes offsets for every scene, and trains.
inline TrainResult train(const ToyNetConfig& config, const std::vector<Scene>& scenes) {
  ToyNet net = init_toy_net(config);
  std::vector<PreparedScene> prepared;
  prepared.reserve(scenes.size());
  for (const auto& s : scenes) prepared.push_back(prepare_scene(s, net));
  return train(std::move(net), prepared);
}

/// Metrics over all pixels of all scenes (one pooled confusion matrix).
inline MetricsReport evaluate_net(const ToyNet& net, const std::vector<PreparedScene>& scenes) {
  ConfusionMatrix cm(kSceneClasses);
  for (const auto& s : scenes) {
    const auto pred = predict(net, s);
    cm.add(pred, s.labels);
  }
  return cm.report();
}

// ---- benchmark scenes ----------------------------------------------------

enum class SceneSplit : std::uint64_t { kTrain = 1, kTest = 2 };

/// Seed of scene `index` in `split` for benchmark seed `seed` (splitmix64 mix).
inline std::uint64_t scene_seed(std::uint64_t seed, SceneSplit split, std::size_t index) {
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(split) * 0xbf58476d1ce4e5b9ULL +
                    static_cast<std::uint64_t>(index) + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<Scene> benchmark_scenes(std::uint64_t seed, SceneSplit split, std::size_t count,
                                           std::size_t height, std::size_t width, const SceneStyle& style = {}) {
  const CameraIntrinsics k = benchmark_intrinsics(height, width);
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    scenes.push_back(generate_scene(scene_seed(seed, split, i), k, height, width, style));
  }
  return scenes;
}

inline std::vector<PreparedScene> prepare_scenes(const std::vector<Scene>& scenes, const ToyNet& net) {
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(prepare_scene(s, net));
  return out;
}

struct BenchmarkRun {
  TrainResult trained;  // parameters are float32-rounded, as saved on disk
  MetricsReport test_report;
};

/// Trains on `train_count` scenes and scores `config.test_scenes` held-out
/// scenes, both derived from `config.seed`.
inline BenchmarkRun run_benchmark(const ToyNetConfig& config, std::size_t train_count, const SceneStyle& style = {}) {
  config.validate();
  const auto train_scenes = benchmark_scenes(config.seed, SceneSplit::kTrain, train_count, config.height, config.width, style);
  BenchmarkRun run{train(config, train_scenes), {}};
  run.trained.net.quantize();
  const auto test_scenes =
      benchmark_scenes(config.seed, SceneSplit::kTest, config.test_scenes, config.height, config.width, style);
  run.test_report = evaluate_net(run.trained.net, prepare_scenes(test_scenes, run.trained.net));
  return run;
}

// ---- model files ---------------------------------------------------------

inline std::string encode_metrics(const MetricsReport& r) {
  std::string s;
  s += "acc=" + io::format_double(r.acc) + "\n";
  s += "m_acc=" + io::format_double(r.m_acc) + "\n";
  s += "m_iou=" + io::format_double(r.m_iou) + "\n";
  s += "fw_iou=" + io::format_double(r.fw_iou) + "\n";
  for (std::size_t c = 0; c < r.class_iou.size(); ++c) {
    s += "iou_" + std::to_string(c) + "=" + (r.class_iou[c] ? io::format_double(*r.class_iou[c]) : "nan") + "\n";
  }
  return s;
}

inline std::string encode_loss_csv(const std::vector<double>& trace) {
  std::string s = "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i) + "," + io::format_double(trace[i]) + "\n";
  return s;
}

/// Writes manifest.txt (config plus layer shapes) and one ZTEN file per parameter.
inline void save_model(const std::filesystem::path& dir, const ToyNet& net) {
  std::filesystem::create_directories(dir);
  std::string manifest = encode_toy_config(net.config);
  manifest += "layers=" + std::to_string(net.layers.size()) + "\n";
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    manifest += prefix + ".weight=" + shape_string(layer.weights.shape()) + "\n";
    manifest += prefix + ".bias=(" + std::to_string(layer.bias.size()) + ")\n";
    io::save_tensor(dir / (prefix + "_weight.zten"), layer.weights);
    io::save_tensor(dir / (prefix + "_bias.zten"), Tensor({layer.bias.size()}, layer.bias));
  }
  io::write_file(dir / "manifest.txt", manifest);
}

inline ToyNet load_model(const std::filesystem::path& dir) {
  io::KeyValues kv = io::load_key_values(dir / "manifest.txt");
  io::KeyValues config_kv;
  for (const auto& [key, value] : kv) {
    if (key != "layers" && key.rfind("layer", 0) != 0) config_kv[key] = value;
  }
  ToyNet net = init_toy_net(parse_toy_config(config_kv));
  if (!kv.contains("layers") || kv["layers"] != std::to_string(net.layers.size())) {
    throw ConsistencyError((dir / "manifest.txt").string() + ": layer count does not match the config");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    const auto w = io::load_tensor(dir / (prefix + "_weight.zten"));
    const auto b = io::load_tensor(dir / (prefix + "_bias.zten"));
    if (w.shape() != layer.weights.shape() || b.rank() != 1 || b.dim(0) != layer.bias.size()) {
      throw ConsistencyError((dir / prefix).string() + ": parameter shape does not match the manifest");
    }
    layer.weights = w.cast<double>();
    layer.bias.assign(b.values().begin(), b.values().end());
  }
  return net;
}

}  // namespace zacn
