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

#include <chrono>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/dataset.hpp"
#include "pedcross/error.hpp"
#include "pedcross/metrics.hpp"
#include "pedcross/model.hpp"
#include "pedcross/nn/optim.hpp"
#include "pedcross/random.hpp"
#include "pedcross/sampling.hpp"

namespace pedcross {

struct TrainReport {
  std::vector<double> epoch_losses;
  BinaryMetrics train_metrics;
  std::optional<BinaryMetrics> test_metrics;
  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t parameter_count = 0;
  double wall_clock_seconds = 0.0;
};

inline nlohmann::json ToJson(const BinaryMetrics& m) {
  return {{"accuracy", m.accuracy}, {"auc", m.auc}, {"f1", m.f1}, {"precision", m.precision}};
}

inline nlohmann::json ToJson(const TrainReport& r) {
  nlohmann::json j = {{"epoch_losses", r.epoch_losses},
                      {"train_metrics", ToJson(r.train_metrics)},
                      {"config", ToJson(r.config)},
                      {"seed", r.seed},
                      {"parameter_count", r.parameter_count},
                      {"wall_clock_seconds", r.wall_clock_seconds}};
  j["test_metrics"] = r.test_metrics ? ToJson(*r.test_metrics) : nlohmann::json();
  return j;
}

// Distinct streams derived from the run seed.
inline constexpr std::uint64_t kShuffleStream = 0x53485546464c45ULL;
inline constexpr std::uint64_t kDropoutStream = 0x44524f504f5554ULL;

/// Eval-mode probabilities, in example order.
inline std::vector<double> PredictAll(HybridModel& model, std::span<const Example> examples) {
  const auto& config = model.config();
  std::vector<double> scores;
  scores.reserve(examples.size());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < examples.size(); start += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(examples.size(), start + bs); ++i)
      idx.push_back(i);
    const auto p = model.Predict(AssembleBatch(examples, idx, config));
    scores.insert(scores.end(), p.begin(), p.end());
  }
  return scores;
}

inline BinaryMetrics Evaluate(HybridModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw TrainingError("evaluation needs a non-empty set");
  const auto scores = PredictAll(model, examples);
  std::vector<int> labels;
  for (const auto& e : examples) labels.push_back(e.label);
  return ComputeMetrics(scores, labels);
}

/// Mini-batch RMSProp on weighted BCE. Epoch loss is the sample-weighted
/// mean of the batch losses. `test` may be empty.
inline TrainReport Train(HybridModel& model, std::span<const Example> train,
                         const ClassWeights& weights,
                         std::span<const Example> test = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& config = model.config();
  if (train.empty()) throw TrainingError("empty training set");
  bool has_pos = false, has_neg = false;
  for (const auto& e : train) (e.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw TrainingError("training set needs both classes");

  TrainReport report;
  report.config = config;
  report.seed = config.seed;
  report.parameter_count = model.parameter_count();

  auto params = model.parameters();
  Xorshift64 shuffle_rng(config.seed ^ kShuffleStream);
  Xorshift64 dropout_rng(config.seed ^ kDropoutStream);
  nn::RmsPropOptions opt;
  opt.learning_rate = config.learning_rate;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Shuffle(order, shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Batch batch = AssembleBatch(train, idx, config);
      nn::ZeroGrad(params);
      nn::Tape tape;
      nn::Var p = model.Forward(tape, batch, nn::Mode::kTrain, dropout_rng);
      nn::Var loss = nn::WeightedBce(p, batch.labels, weights.positive, weights.negative);
      tape.Backward(loss);
      nn::RmsPropStep(params, opt);
      total += loss.value()[0] * static_cast<double>(idx.size());
    }
    report.epoch_losses.push_back(total / static_cast<double>(train.size()));
  }
  report.train_metrics = Evaluate(model, train);
  if (!test.empty()) report.test_metrics = Evaluate(model, test);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct AblationEntry {
  std::string name;
  Modalities modalities;
};

inline std::vector<AblationEntry> DefaultAblationGrid() {
  const auto m = [](const char* s) { return Modalities::Parse(s); };
  return {{"LSTM", m("traj")},
          {"Scene", m("scene")},
          {"Map", m("map")},
          {"Map+Scene", m("map,scene")},
          {"Map+Scene+Traj", m("map,scene,traj")},
          {"All", m("all")}};
}

struct AblationRow {
  std::string name;
  Modalities modalities;
  BinaryMetrics metrics;
  std::size_t parameter_count = 0;
};

/// Trains one fresh model per entry on a shared split and seed; metrics are
/// measured on `test`. Wall-clock time is deliberately left out of the rows.
inline std::vector<AblationRow> RunAblation(std::span<const ObservationSample> train,
                                            std::span<const ObservationSample> test,
                                            std::span<const SceneBundle> bundles,
                                            const ModelConfig& base,
                                            std::span<const AblationEntry> grid,
                                            std::FILE* progress = nullptr) {
  if (test.empty()) throw TrainingError("ablation needs a non-empty test set");
  const ClassWeights weights = ComputeClassWeights(train);
  std::vector<AblationRow> rows;
  for (const auto& entry : grid) {
    ModelConfig config = base;
    config.modalities = entry.modalities;
    HybridModel model(config);
    const auto train_ex = MaterializeExamples(train, bundles, config);
    const auto test_ex = MaterializeExamples(test, bundles, config);
    const TrainReport r = Train(model, train_ex, weights, test_ex);
    rows.push_back({entry.name, entry.modalities, *r.test_metrics, r.parameter_count});
    if (progress)
      std::fprintf(progress, "ablate: %s done (%.1fs)\n", entry.name.c_str(),
                   r.wall_clock_seconds);
  }
  return rows;
}

inline nlohmann::json AblationToJson(std::span<const AblationRow> rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows)
    a.push_back({{"config", r.name},
                 {"modalities", r.modalities.ToString()},
                 {"parameter_count", r.parameter_count},
                 {"metrics", ToJson(r.metrics)}});
  return {{"rows", a}};
}

inline std::string AblationTable(std::span<const AblationRow> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %6s  %6s  %6s  %6s\n", static_cast<int>(width),
                "Model", "Acc", "AUC", "F1", "Prec");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %6.4f  %6.4f  %6.4f  %6.4f\n",
                  static_cast<int>(width), r.name.c_str(), r.metrics.accuracy,
                  r.metrics.auc, r.metrics.f1, r.metrics.precision);
    out += buf;
  }
  return out;
}

}  // namespace pedcross
