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

// From scene bundles to model-ready examples and batches.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/densify.hpp"
#include "pedcross/error.hpp"
#include "pedcross/image.hpp"
#include "pedcross/model.hpp"
#include "pedcross/rasterizer.hpp"
#include "pedcross/sampling.hpp"

namespace pedcross {

/// Flattened per-sample inputs. Visual buffers are [3T, S, S] with channel
/// index 3*t + rgb; only enabled modalities are filled.
struct Example {
  std::string sample_id;
  std::string track_key;
  std::vector<double> scene;
  std::vector<double> map;
  std::vector<double> trajectory;  // [T, 2], relative to the first point
  std::vector<double> ego;         // [T, 3], raw velocity
  int label = 0;
};

namespace detail {
inline void AppendImage(std::vector<double>& out, const Image& img) {
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  const std::size_t base = out.size();
  out.resize(base + 3 * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      out[base + c * plane + p] = img.pixels[p * 3 + c] / 255.0;
}
}  // namespace detail

inline Example MaterializeExample(const ObservationSample& s, const SceneBundle& bundle,
                                  const ModelConfig& config) {
  const int t = static_cast<int>(s.frame_indices.size());
  if (t != config.obs_len)
    throw ShapeError("sample " + s.sample_id + " has " + std::to_string(t) +
                     " frames, model expects " + std::to_string(config.obs_len));
  const int side = config.image_side;
  Example e;
  e.sample_id = s.sample_id;
  e.track_key = s.track_key();
  e.label = s.label;
  if (config.modalities.scene) {
    for (int f : s.frame_indices) {
      Image img = ReadPpm(bundle.root / bundle.image_paths.at(f));
      if (img.width != side || img.height != side) img = Resize(img, side, side);
      detail::AppendImage(e.scene, img);
    }
  }
  if (config.modalities.map) {
    const RasterConfig rc = RasterConfig::WithSide(side);
    for (int f : s.frame_indices)
      detail::AppendImage(
          e.map, RasterizeFrame(bundle.map_layers, bundle.ego_states.at(f), rc, f).pixels);
  }
  if (config.modalities.trajectory) {
    const Vec2 origin = s.trajectory.front();
    for (const Vec2& p : s.trajectory) {
      e.trajectory.push_back(p.x - origin.x);
      e.trajectory.push_back(p.y - origin.y);
    }
  }
  if (config.modalities.ego) {
    for (const Vec3& v : s.ego_velocity) {
      e.ego.push_back(v.x);
      e.ego.push_back(v.y);
      e.ego.push_back(v.z);
    }
  }
  return e;
}

inline std::vector<Example> MaterializeExamples(std::span<const ObservationSample> samples,
                                                std::span<const SceneBundle> bundles,
                                                const ModelConfig& config) {
  std::map<std::string, const SceneBundle*> by_id;
  for (const auto& b : bundles) by_id[b.bundle_id] = &b;
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = by_id.find(s.bundle_id);
    if (it == by_id.end()) throw LoadError("sample " + s.sample_id + ": unknown bundle");
    out.push_back(MaterializeExample(s, *it->second, config));
  }
  return out;
}

inline Batch AssembleBatch(std::span<const Example> examples,
                           std::span<const std::size_t> indices,
                           const ModelConfig& config) {
  const std::size_t n = indices.size();
  if (n == 0) throw ShapeError("empty batch");
  const std::size_t t = static_cast<std::size_t>(config.obs_len);
  const std::size_t side = static_cast<std::size_t>(config.image_side);
  const std::size_t visual = 3 * t * side * side;
  Batch b;
  auto gather = [&](std::vector<double> Example::*field, std::size_t per,
                    nn::Shape shape) {
    std::vector<double> v;
    v.reserve(n * per);
    for (std::size_t i : indices) {
      const auto& src = examples[i].*field;
      if (src.size() != per)
        throw ShapeError("example " + examples[i].sample_id + " has " +
                         std::to_string(src.size()) + " values, expected " +
                         std::to_string(per));
      v.insert(v.end(), src.begin(), src.end());
    }
    return nn::Tensor(std::move(shape), std::move(v));
  };
  if (config.modalities.scene)
    b.scene = gather(&Example::scene, visual, {n, 3 * t, side, side});
  if (config.modalities.map)
    b.map = gather(&Example::map, visual, {n, 3 * t, side, side});
  if (config.modalities.trajectory)
    b.trajectory = gather(&Example::trajectory, 2 * t, {n, t, 2});
  if (config.modalities.ego) b.ego = gather(&Example::ego, 3 * t, {n, t, 3});
  for (std::size_t i : indices) b.labels.push_back(examples[i].label);
  return b;
}

/// Densified, sampled and split corpus.
struct PreparedCorpus {
  std::vector<ObservationSample> samples;
  SplitManifest split;
  std::vector<ObservationSample> train;
  std::vector<ObservationSample> test;
};

/// Tracks enter the split only if they yield at least one sample.
inline PreparedCorpus PrepareCorpus(std::span<const SceneBundle> bundles,
                                    const SamplingOptions& sampling, double ratio,
                                    std::uint64_t seed,
                                    const DensifyOptions& densify = {}) {
  PreparedCorpus pc;
  for (const auto& b : bundles) {
    const auto dense = DensifyBundle(b, densify);
    auto s = SampleBundle(b, dense, sampling);
    pc.samples.insert(pc.samples.end(), s.begin(), s.end());
  }
  std::map<std::string, int> labels;
  for (const auto& s : pc.samples) labels[s.track_key()] = s.label;
  std::vector<LabeledTrack> tracks;
  for (const auto& [key, label] : labels) tracks.push_back({key, label});
  pc.split = SplitDataset(tracks, ratio, seed);
  const std::set<std::string> train_keys(pc.split.train_track_ids.begin(),
                                         pc.split.train_track_ids.end());
  for (const auto& s : pc.samples)
    (train_keys.count(s.track_key()) ? pc.train : pc.test).push_back(s);
  return pc;
}

inline nlohmann::json ToJson(const SplitManifest& m) {
  return {{"seed", m.seed},
          {"ratio", m.ratio},
          {"train_track_ids", m.train_track_ids},
          {"test_track_ids", m.test_track_ids},
          {"train_positive", m.train_positive},
          {"train_negative", m.train_negative},
          {"test_positive", m.test_positive},
          {"test_negative", m.test_negative}};
}

inline SplitManifest SplitManifestFromJson(const nlohmann::json& j) {
  SplitManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.ratio = j.at("ratio").get<double>();
    m.train_track_ids = j.at("train_track_ids").get<std::vector<std::string>>();
    m.test_track_ids = j.at("test_track_ids").get<std::vector<std::string>>();
    m.train_positive = j.at("train_positive").get<int>();
    m.train_negative = j.at("train_negative").get<int>();
    m.test_positive = j.at("test_positive").get<int>();
    m.test_negative = j.at("test_negative").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bad split manifest: ") + e.what());
  }
  return m;
}

inline nlohmann::json ToJson(const ObservationSample& s) {
  nlohmann::json traj = nlohmann::json::array(), ego = nlohmann::json::array();
  for (const auto& p : s.trajectory) traj.push_back({p.x, p.y});
  for (const auto& v : s.ego_velocity) ego.push_back({v.x, v.y, v.z});
  return {{"sample_id", s.sample_id},
          {"bundle_id", s.bundle_id},
          {"track_id", s.track_id},
          {"frame_indices", s.frame_indices},
          {"scene_frames", s.scene_frames},
          {"trajectory", traj},
          {"ego_velocity", ego},
          {"label", s.label},
          {"time_to_event", s.time_to_event}};
}

}  // namespace pedcross
