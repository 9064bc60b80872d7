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

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/error.hpp"
#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/ops.hpp"
#include "pedcross/random.hpp"

namespace pedcross::nn {

enum class Mode { kTrain, kEval };

enum class LayerKind { kConv2D, kLstm, kDense, kDropout, kGlobalAvgPool, kActivation };

/// Declarative description of one layer; serialised into checkpoint headers.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::string name;
  std::size_t in = 0;       // input channels / features
  std::size_t out = 0;      // filters / cells / units
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::string padding = "same";
  double drop = 0.0;
  std::string activation;  // "relu" | "logistic" for kActivation

  bool operator==(const LayerSpec&) const = default;

  void Validate() const {
    if (kind == LayerKind::kConv2D && (kernel < 1 || stride < 1))
      throw ConfigError("conv2d " + name + ": kernel and stride must be >= 1");
    if (kind == LayerKind::kDropout && !(drop >= 0.0 && drop < 1.0))
      throw ConfigError("dropout " + name + ": p must lie in [0,1)");
  }
};

inline const char* LayerKindName(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kLstm: return "lstm";
    case LayerKind::kDense: return "dense";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kActivation: return "activation";
  }
  return "unknown";
}

inline nlohmann::json ToJson(const LayerSpec& s) {
  nlohmann::json j = {{"kind", LayerKindName(s.kind)}, {"name", s.name}};
  switch (s.kind) {
    case LayerKind::kConv2D:
      j.update({{"in", s.in}, {"filters", s.out}, {"kernel", s.kernel},
                {"stride", s.stride}, {"padding", s.padding}});
      break;
    case LayerKind::kLstm:
      j.update({{"in", s.in}, {"cells", s.out}});
      break;
    case LayerKind::kDense:
      j.update({{"in", s.in}, {"units", s.out}});
      break;
    case LayerKind::kDropout:
      j["p"] = s.drop;
      break;
    case LayerKind::kActivation:
      j["activation"] = s.activation;
      break;
    case LayerKind::kGlobalAvgPool:
      break;
  }
  return j;
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor GlorotUniform(Shape shape, double fan_in, double fan_out,
                            Xorshift64& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.values()) v = rng.Uniform(-limit, limit);
  return t;
}

struct Conv2DLayer {
  Parameter weight;
  Parameter bias;
  std::size_t stride = 1;

  Conv2DLayer() = default;
  Conv2DLayer(const std::string& name, std::size_t in, std::size_t filters,
              std::size_t kernel, std::size_t stride_, Xorshift64& rng)
      : weight(name + ".weight",
               GlorotUniform({filters, in, kernel, kernel},
                             double(in * kernel * kernel),
                             double(filters * kernel * kernel), rng)),
        bias(name + ".bias", Tensor({filters})),
        stride(stride_) {}

  Var operator()(Tape& tape, Var x) {
    return Conv2D(x, tape.Param(weight), tape.Param(bias), stride);
  }

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

struct DenseLayer {
  Parameter weight;  // [in, units]
  Parameter bias;

  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in, std::size_t units,
             Xorshift64& rng)
      : weight(name + ".weight",
               GlorotUniform({in, units}, double(in), double(units), rng)),
        bias(name + ".bias", Tensor({units})) {}

  Var operator()(Tape& tape, Var x) {
    return Affine(x, tape.Param(weight), tape.Param(bias));
  }

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

/// LSTM with gate blocks packed as [i | f | g | o] along the 4U axis.
///   i, f, o = logistic, g = tanh
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
struct LstmLayer {
  Parameter input_weight;      // [D, 4U]
  Parameter recurrent_weight;  // [U, 4U]
  Parameter bias;              // [4U], forget block initialised to 1
  std::size_t units = 0;

  LstmLayer() = default;
  LstmLayer(const std::string& name, std::size_t in, std::size_t units_,
            Xorshift64& rng)
      : input_weight(name + ".input_weight",
                     GlorotUniform({in, 4 * units_}, double(in),
                                   double(4 * units_), rng)),
        recurrent_weight(name + ".recurrent_weight",
                         GlorotUniform({units_, 4 * units_}, double(units_),
                                       double(4 * units_), rng)),
        bias(name + ".bias", Tensor({4 * units_})),
        units(units_) {
    for (std::size_t j = units; j < 2 * units; ++j) bias.value[j] = 1.0;
  }

  struct State {
    Var h;
    Var c;
  };

  State Step(Tape& tape, Var x, State prev) {
    Var gates = Add(Affine(x, tape.Param(input_weight), tape.Param(bias)),
                    MatMul(prev.h, tape.Param(recurrent_weight)));
    Var i = Sigmoid(SliceCols(gates, 0, units));
    Var f = Sigmoid(SliceCols(gates, units, units));
    Var g = Tanh(SliceCols(gates, 2 * units, units));
    Var o = Sigmoid(SliceCols(gates, 3 * units, units));
    Var c = Add(Mul(f, prev.c), Mul(i, g));
    Var h = Mul(o, Tanh(c));
    return {h, c};
  }

  State ZeroState(Tape& tape, std::size_t batch) {
    return {tape.Constant(Tensor({batch, units})),
            tape.Constant(Tensor({batch, units}))};
  }

  // Runs the sequence from a zero state and returns the final hidden state.
  Var Run(Tape& tape, std::span<const Var> steps) {
    if (steps.empty()) throw ShapeError("lstm: empty sequence");
    State s = ZeroState(tape, steps.front().value().dim(0));
    for (const Var& x : steps) s = Step(tape, x, s);
    return s.h;
  }

  std::vector<Parameter*> parameters() {
    return {&input_weight, &recurrent_weight, &bias};
  }
};

/// Inverted dropout: in training, zero with probability p and scale the
/// survivors by 1/(1-p); identity in evaluation.
inline Var Dropout(Var x, double p, Mode mode, Xorshift64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout p must lie in [0,1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = rng.Bernoulli(p) ? 0.0 : keep;
  return ApplyMask(x, mask);
}

}  // namespace pedcross::nn
