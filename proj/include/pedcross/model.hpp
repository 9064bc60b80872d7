// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Hybrid crossing-action classifier.
//
//   map rasters   [N,3T,S,S] -> conv stack -+
//                                           +-> concat -> fusion conv -> GAP -+
//   scene images  [N,3T,S,S] -> conv stack -+                                 |
//   trajectory    T x [N,2]  -> LSTM (final h) -------------------------------+-> concat
//   ego velocity  T x [N,3]  -> LSTM (final h) -------------------------------+      |
//                                  dense(hidden)+ReLU -> dropout -> dense(1) -> logistic
//
// Every conv and the hidden dense layer use ReLU. Disabled modalities build
// no layers and contribute no features.

#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/error.hpp"
#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/layers.hpp"
#include "pedcross/nn/ops.hpp"
#include "pedcross/random.hpp"

namespace pedcross {

struct Modalities {
  bool scene = true;
  bool map = true;
  bool trajectory = true;
  bool ego = true;

  bool operator==(const Modalities&) const = default;

  bool any() const { return scene || map || trajectory || ego; }
  bool visual() const { return scene || map; }

  static Modalities None() { return {false, false, false, false}; }

  // Comma-separated subset of {scene, map, traj|trajectory, ego}, or "all".
  static Modalities Parse(const std::string& text) {
    if (text == "all") return {};
    Modalities m = None();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "scene") m.scene = true;
      else if (item == "map") m.map = true;
      else if (item == "traj" || item == "trajectory") m.trajectory = true;
      else if (item == "ego") m.ego = true;
      else if (!item.empty()) throw ConfigError("unknown modality '" + item + "'");
    }
    if (!m.any()) throw ConfigError("modalities must be non-empty");
    return m;
  }

  std::string ToString() const {
    std::string s;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!s.empty()) s += ",";
      s += name;
    };
    add(scene, "scene");
    add(map, "map");
    add(trajectory, "traj");
    add(ego, "ego");
    return s;
  }
};

struct ConvSpec {
  std::size_t filters = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;

  bool operator==(const ConvSpec&) const = default;
};

struct ModelConfig {
  Modalities modalities;
  int image_side = 300;
  int obs_len = 5;
  std::vector<ConvSpec> map_convs = {{32, 3, 3}, {64, 3, 2}, {128, 3, 2}};
  std::vector<ConvSpec> scene_convs = {{64, 3, 3}, {128, 3, 2}, {256, 3, 2}};
  ConvSpec fusion = {512, 3, 1};
  std::size_t lstm_units = 128;
  std::size_t dense_hidden = 256;
  double dropout_p = 0.5;
  double learning_rate = 5e-5;
  int batch_size = 8;
  int epochs = 50;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;

  static std::size_t StreamExtent(std::size_t side,
                                  const std::vector<ConvSpec>& convs) {
    for (const auto& c : convs) side = nn::SameExtent(side, c.stride);
    return side;
  }

  void Validate() const {
    if (!modalities.any()) throw ConfigError("modalities must be non-empty");
    if (image_side < 1) throw ConfigError("image_side must be >= 1");
    if (obs_len < 1) throw ConfigError("obs_len must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (lstm_units < 1 || dense_hidden < 1)
      throw ConfigError("lstm_units and dense_hidden must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("dropout_p must lie in [0,1)");
    for (const auto* convs : {&map_convs, &scene_convs})
      for (const auto& c : *convs)
        if (c.filters < 1 || c.kernel < 1 || c.stride < 1)
          throw ConfigError("conv filters, kernel and stride must be >= 1");
    if (fusion.filters < 1 || fusion.kernel < 1 || fusion.stride < 1)
      throw ConfigError("fusion conv filters, kernel and stride must be >= 1");
    if (modalities.map && map_convs.empty())
      throw ConfigError("map stream needs at least one conv layer");
    if (modalities.scene && scene_convs.empty())
      throw ConfigError("scene stream needs at least one conv layer");
    if (modalities.map && modalities.scene) {
      const auto me = StreamExtent(image_side, map_convs);
      const auto se = StreamExtent(image_side, scene_convs);
      if (me != se) {
        std::ostringstream os;
        os << "image_side " << image_side << " gives map stream extent " << me
           << " but scene stream extent " << se
           << " (each stride s maps n -> ceil(n/s)); fusion needs them equal";
        throw ConfigError(os.str());
      }
    }
  }

  std::size_t input_channels() const { return 3 * static_cast<std::size_t>(obs_len); }
};

inline nlohmann::json ToJson(const ModelConfig& c) {
  auto convs = [](const std::vector<ConvSpec>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back({s.filters, s.kernel, s.stride});
    return a;
  };
  return {{"modalities", c.modalities.ToString()},
          {"image_side", c.image_side},
          {"obs_len", c.obs_len},
          {"map_convs", convs(c.map_convs)},
          {"scene_convs", convs(c.scene_convs)},
          {"fusion", {c.fusion.filters, c.fusion.kernel, c.fusion.stride}},
          {"lstm_units", c.lstm_units},
          {"dense_hidden", c.dense_hidden},
          {"dropout_p", c.dropout_p},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed}};
}

// Overlays the keys present in `j` onto `base`.
inline ModelConfig ModelConfigFromJson(const nlohmann::json& j, ModelConfig base = {}) {
  auto convs = [](const nlohmann::json& a) {
    std::vector<ConvSpec> v;
    for (const auto& s : a)
      v.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                   s.at(2).get<std::size_t>()});
    return v;
  };
  try {
    if (j.contains("modalities"))
      base.modalities = Modalities::Parse(j["modalities"].get<std::string>());
    if (j.contains("image_side")) base.image_side = j["image_side"].get<int>();
    if (j.contains("obs_len")) base.obs_len = j["obs_len"].get<int>();
    if (j.contains("map_convs")) base.map_convs = convs(j["map_convs"]);
    if (j.contains("scene_convs")) base.scene_convs = convs(j["scene_convs"]);
    if (j.contains("fusion")) {
      const auto& f = j["fusion"];
      base.fusion = {f.at(0).get<std::size_t>(), f.at(1).get<std::size_t>(),
                     f.at(2).get<std::size_t>()};
    }
    if (j.contains("lstm_units")) base.lstm_units = j["lstm_units"].get<std::size_t>();
    if (j.contains("dense_hidden"))
      base.dense_hidden = j["dense_hidden"].get<std::size_t>();
    if (j.contains("dropout_p")) base.dropout_p = j["dropout_p"].get<double>();
    if (j.contains("learning_rate"))
      base.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) base.epochs = j["epochs"].get<int>();
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  return base;
}

/// One mini-batch. Visual tensors are [N, 3T, S, S] with frames stacked
/// channel-wise (frame-major, then RGB); trajectory is [N, T, 2] and ego is
/// [N, T, 3]. Tensors of disabled modalities may be left empty.
struct Batch {
  nn::Tensor scene;
  nn::Tensor map;
  nn::Tensor trajectory;
  nn::Tensor ego;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

class HybridModel {
 public:
  explicit HybridModel(const ModelConfig& config) : config_(config) {
    config_.Validate();
    Xorshift64 rng(config_.seed);
    const std::size_t in_ch = config_.input_channels();
    std::size_t fused_in = 0;
    if (config_.modalities.map) {
      std::size_t ch = in_ch;
      for (std::size_t i = 0; i < config_.map_convs.size(); ++i) {
        const auto& s = config_.map_convs[i];
        map_convs_.emplace_back("map.conv" + std::to_string(i), ch, s.filters,
                                s.kernel, s.stride, rng);
        ch = s.filters;
      }
      fused_in += ch;
    }
    if (config_.modalities.scene) {
      std::size_t ch = in_ch;
      for (std::size_t i = 0; i < config_.scene_convs.size(); ++i) {
        const auto& s = config_.scene_convs[i];
        scene_convs_.emplace_back("scene.conv" + std::to_string(i), ch,
                                  s.filters, s.kernel, s.stride, rng);
        ch = s.filters;
      }
      fused_in += ch;
    }
    if (config_.modalities.visual())
      fusion_.emplace("fusion.conv", fused_in, config_.fusion.filters,
                      config_.fusion.kernel, config_.fusion.stride, rng);
    if (config_.modalities.trajectory)
      trajectory_lstm_.emplace("trajectory.lstm", 2, config_.lstm_units, rng);
    if (config_.modalities.ego)
      ego_lstm_.emplace("ego.lstm", 3, config_.lstm_units, rng);
    hidden_ = nn::DenseLayer("head.hidden", shared_width(), config_.dense_hidden, rng);
    output_ = nn::DenseLayer("head.output", config_.dense_hidden, 1, rng);
  }

  const ModelConfig& config() const { return config_; }

  std::size_t visual_width() const {
    return config_.modalities.visual() ? config_.fusion.filters : 0;
  }

  std::size_t shared_width() const {
    return visual_width() + (config_.modalities.trajectory ? config_.lstm_units : 0) +
           (config_.modalities.ego ? config_.lstm_units : 0);
  }

  /// Records the forward pass; returns probabilities [N].
  nn::Var Forward(nn::Tape& tape, const Batch& batch, nn::Mode mode,
                  Xorshift64& dropout_rng) {
    const std::size_t n = batch.size();
    if (n == 0) throw ShapeError("forward: empty batch");
    const std::size_t t = static_cast<std::size_t>(config_.obs_len);
    const std::size_t side = static_cast<std::size_t>(config_.image_side);
    const nn::Shape visual_shape = {n, config_.input_channels(), side, side};

    std::vector<nn::Var> features;
    std::vector<nn::Var> streams;
    if (config_.modalities.map) {
      CheckShape("map", batch.map.shape(), visual_shape);
      nn::Var x = tape.Constant(batch.map);
      for (auto& conv : map_convs_) x = nn::Relu(conv(tape, x));
      streams.push_back(x);
    }
    if (config_.modalities.scene) {
      CheckShape("scene", batch.scene.shape(), visual_shape);
      nn::Var x = tape.Constant(batch.scene);
      for (auto& conv : scene_convs_) x = nn::Relu(conv(tape, x));
      streams.push_back(x);
    }
    if (!streams.empty()) {
      nn::Var fused = streams.size() == 1 ? streams[0] : nn::ConcatChannels(streams);
      features.push_back(nn::GlobalAvgPool(nn::Relu((*fusion_)(tape, fused))));
    }
    if (config_.modalities.trajectory) {
      CheckShape("trajectory", batch.trajectory.shape(), {n, t, 2});
      features.push_back(RunSequence(tape, *trajectory_lstm_, batch.trajectory));
    }
    if (config_.modalities.ego) {
      CheckShape("ego", batch.ego.shape(), {n, t, 3});
      features.push_back(RunSequence(tape, *ego_lstm_, batch.ego));
    }
    nn::Var shared = features.size() == 1 ? features[0] : nn::ConcatCols(features);
    nn::Var h = nn::Relu(hidden_(tape, shared));
    h = nn::Dropout(h, config_.dropout_p, mode, dropout_rng);
    nn::Var logit = output_(tape, h);
    return nn::Reshape(nn::Sigmoid(logit), {n});
  }

  // Evaluation-mode probabilities.
  std::vector<double> Predict(const Batch& batch) {
    nn::Tape tape;
    Xorshift64 unused(0);
    nn::Var p = Forward(tape, batch, nn::Mode::kEval, unused);
    const auto v = p.value().values();
    return {v.begin(), v.end()};
  }

  std::vector<nn::Parameter*> parameters() {
    std::vector<nn::Parameter*> out;
    auto append = [&](std::vector<nn::Parameter*> ps) {
      out.insert(out.end(), ps.begin(), ps.end());
    };
    for (auto& c : map_convs_) append(c.parameters());
    for (auto& c : scene_convs_) append(c.parameters());
    if (fusion_) append(fusion_->parameters());
    if (trajectory_lstm_) append(trajectory_lstm_->parameters());
    if (ego_lstm_) append(ego_lstm_->parameters());
    append(hidden_.parameters());
    append(output_.parameters());
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  nn::DenseLayer& output_layer() { return output_; }

  std::vector<nn::LayerSpec> layer_specs() const {
    using nn::LayerKind;
    using nn::LayerSpec;
    std::vector<LayerSpec> specs;
    auto conv_stack = [&](const std::string& prefix, const std::vector<ConvSpec>& convs) {
      std::size_t ch = config_.input_channels();
      for (std::size_t i = 0; i < convs.size(); ++i) {
        specs.push_back(Spec(LayerKind::kConv2D, prefix + ".conv" + std::to_string(i),
                             ch, convs[i].filters, convs[i].kernel, convs[i].stride));
        specs.push_back(Activation(prefix + ".relu" + std::to_string(i), "relu"));
        ch = convs[i].filters;
      }
      return ch;
    };
    std::size_t fused_in = 0;
    if (config_.modalities.map) fused_in += conv_stack("map", config_.map_convs);
    if (config_.modalities.scene) fused_in += conv_stack("scene", config_.scene_convs);
    if (config_.modalities.visual()) {
      specs.push_back(Spec(LayerKind::kConv2D, "fusion.conv", fused_in,
                           config_.fusion.filters, config_.fusion.kernel,
                           config_.fusion.stride));
      specs.push_back(Activation("fusion.relu", "relu"));
      LayerSpec gap;
      gap.kind = LayerKind::kGlobalAvgPool;
      gap.name = "fusion.gap";
      specs.push_back(gap);
    }
    if (config_.modalities.trajectory)
      specs.push_back(Spec(LayerKind::kLstm, "trajectory.lstm", 2, config_.lstm_units));
    if (config_.modalities.ego)
      specs.push_back(Spec(LayerKind::kLstm, "ego.lstm", 3, config_.lstm_units));
    specs.push_back(Spec(LayerKind::kDense, "head.hidden", shared_width(), config_.dense_hidden));
    specs.push_back(Activation("head.relu", "relu"));
    LayerSpec drop;
    drop.kind = LayerKind::kDropout;
    drop.name = "head.dropout";
    drop.drop = config_.dropout_p;
    specs.push_back(drop);
    specs.push_back(Spec(LayerKind::kDense, "head.output", config_.dense_hidden, 1));
    specs.push_back(Activation("head.logistic", "logistic"));
    return specs;
  }

 private:
  static nn::LayerSpec Spec(nn::LayerKind kind, const std::string& name, std::size_t in,
                            std::size_t out, std::size_t kernel = 1, std::size_t stride = 1) {
    nn::LayerSpec s;
    s.kind = kind;
    s.name = name;
    s.in = in;
    s.out = out;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }

  static nn::LayerSpec Activation(const std::string& name, const std::string& fn) {
    nn::LayerSpec s;
    s.kind = nn::LayerKind::kActivation;
    s.name = name;
    s.activation = fn;
    return s;
  }

  static void CheckShape(const char* what, const nn::Shape& got, const nn::Shape& want) {
    if (got != want)
      throw ShapeError(std::string("forward: ") + what + " input " +
                       nn::ShapeString(got) + ", expected " + nn::ShapeString(want));
  }

  // [N, T, D] -> T step inputs [N, D] -> final hidden state.
  static nn::Var RunSequence(nn::Tape& tape, nn::LstmLayer& lstm, const nn::Tensor& seq) {
    const std::size_t n = seq.dim(0), t = seq.dim(1), d = seq.dim(2);
    std::vector<nn::Var> steps;
    for (std::size_t s = 0; s < t; ++s) {
      nn::Tensor x({n, d});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = seq[(i * t + s) * d + j];
      steps.push_back(tape.Constant(std::move(x)));
    }
    return lstm.Run(tape, steps);
  }

  ModelConfig config_;
  std::vector<nn::Conv2DLayer> map_convs_;
  std::vector<nn::Conv2DLayer> scene_convs_;
  std::optional<nn::Conv2DLayer> fusion_;
  std::optional<nn::LstmLayer> trajectory_lstm_;
  std::optional<nn::LstmLayer> ego_lstm_;
  nn::DenseLayer hidden_;
  nn::DenseLayer output_;
};

}  // namespace pedcross
