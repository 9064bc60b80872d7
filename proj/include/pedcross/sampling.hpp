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

// Evaluation protocol: clip each labelled track at its event, cut fixed-length
// observation windows 1-2 s ahead of the event, split tracks 70/30 per class
// and derive balanced class weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pedcross/densify.hpp"
#include "pedcross/error.hpp"
#include "pedcross/random.hpp"
#include "pedcross/rasterizer.hpp"
#include "pedcross/scene_model.hpp"

namespace pedcross {

struct SamplingOptions {
  int obs_len = 5;
  int tte_min = 10;
  int tte_max = 20;
  int stride = 2;
};

struct ObservationSample {
  std::string sample_id;
  std::string track_id;
  std::string bundle_id;
  std::vector<int> frame_indices;
  std::vector<std::string> scene_frames;  // image paths relative to the bundle
  std::vector<MapRaster> map_rasters;     // filled by MaterializeRasters
  std::vector<Vec2> trajectory;           // ground-plane position, metres
  std::vector<Vec3> ego_velocity;
  int label = 0;
  int time_to_event = 0;

  bool operator==(const ObservationSample&) const = default;

  // Corpus-unique track key.
  std::string track_key() const { return bundle_id + "/" + track_id; }
};

struct SplitManifest {
  std::vector<std::string> train_track_ids;
  std::vector<std::string> test_track_ids;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  int train_positive = 0;
  int train_negative = 0;
  int test_positive = 0;
  int test_negative = 0;

  bool operator==(const SplitManifest&) const = default;
};

/// Inclusive frame range after clipping at the event.
struct ClipRange {
  int first = 0;
  int last = -1;

  bool empty() const { return last < first; }
  int size() const { return empty() ? 0 : last - first + 1; }
};

/// Crossers end at their critical frame; everyone else at the last frame in
/// which the forward camera sees them. Starts at the first dense frame.
inline ClipRange ClipTrack(const PedestrianTrack& track, const DenseTrack& dense) {
  if (dense.frames.empty()) return {};
  ClipRange r{dense.first_frame(), dense.last_frame()};
  if (track.behavior && track.behavior->will_cross) {
    if (!track.behavior->critical_frame)
      throw LabelError("track " + track.track_id +
                       " will cross but has no critical_frame");
    r.last = std::min(r.last, *track.behavior->critical_frame);
    return r;
  }
  int last_visible = -1;
  for (int f = r.first; f <= r.last; ++f)
    if (f < static_cast<int>(track.visibility.size()) && track.visibility[f])
      last_visible = f;
  r.last = last_visible;
  return r;
}

/// Window end frames, latest first, whose distance to `event_frame` lies in
/// [tte_min, tte_max] and whose whole window fits inside `range`.
inline std::vector<int> WindowEnds(const ClipRange& range, int event_frame,
                                   const SamplingOptions& opt = {}) {
  if (opt.obs_len < 1) throw RangeError("obs_len must be >= 1");
  if (opt.tte_min > opt.tte_max) throw RangeError("tte_min > tte_max");
  if (opt.stride < 1) throw RangeError("stride must be >= 1");
  std::vector<int> ends;
  if (range.empty()) return ends;
  for (int f = event_frame - opt.tte_min; f >= event_frame - opt.tte_max;
       f -= opt.stride) {
    if (f > range.last) continue;
    if (f - opt.obs_len + 1 < range.first) break;
    ends.push_back(f);
  }
  return ends;
}

/// Sample stubs (indices, label, time-to-event) for one clipped track.
inline std::vector<ObservationSample> SampleObservations(
    const ClipRange& range, int event_frame, const SamplingOptions& opt = {}) {
  std::vector<ObservationSample> out;
  for (int end : WindowEnds(range, event_frame, opt)) {
    ObservationSample s;
    for (int f = end - opt.obs_len + 1; f <= end; ++f) s.frame_indices.push_back(f);
    s.time_to_event = event_frame - end;
    out.push_back(std::move(s));
  }
  return out;
}

/// Full per-track sampling with modality payloads (except rasters).
inline std::vector<ObservationSample> SampleTrack(const SceneBundle& bundle,
                                                  const PedestrianTrack& track,
                                                  const DenseTrack& dense,
                                                  const SamplingOptions& opt = {}) {
  if (!track.behavior) return {};
  const ClipRange range = ClipTrack(track, dense);
  if (range.empty()) return {};
  auto samples = SampleObservations(range, range.last, opt);
  for (auto& s : samples) {
    s.track_id = track.track_id;
    s.bundle_id = bundle.bundle_id;
    s.label = track.behavior->will_cross ? 1 : 0;
    s.sample_id = bundle.bundle_id + "/" + track.track_id + "/" +
                  std::to_string(s.frame_indices.back());
    for (int f : s.frame_indices) {
      s.scene_frames.push_back(bundle.image_paths.at(f));
      const DenseFrame* df = dense.Find(f);
      if (!df) throw RangeError("window frame outside dense track");
      s.trajectory.push_back({df->box.center.x, df->box.center.y});
      s.ego_velocity.push_back(bundle.ego_states.at(f).velocity);
    }
  }
  return samples;
}

/// Samples every labelled track of a bundle. `dense` must be
/// DensifyBundle(bundle) (same track order).
inline std::vector<ObservationSample> SampleBundle(const SceneBundle& bundle,
                                                   std::span<const DenseTrack> dense,
                                                   const SamplingOptions& opt = {}) {
  std::vector<ObservationSample> out;
  for (std::size_t i = 0; i < bundle.tracks.size(); ++i) {
    auto s = SampleTrack(bundle, bundle.tracks[i], dense[i], opt);
    out.insert(out.end(), std::make_move_iterator(s.begin()),
               std::make_move_iterator(s.end()));
  }
  return out;
}

inline void MaterializeRasters(ObservationSample& s, const SceneBundle& bundle,
                               const RasterConfig& config) {
  std::vector<EgoState> egos;
  for (int f : s.frame_indices) egos.push_back(bundle.ego_states.at(f));
  s.map_rasters =
      RasterizeObservation(bundle.map_layers, egos, config, s.frame_indices);
}

struct LabeledTrack {
  std::string key;  // bundle_id/track_id
  int label = 0;
};

/// Track-level stratified split. Within each class the tracks (sorted by key)
/// are shuffled with Xorshift64(seed) and the first round(ratio * n) go to
/// train. Negatives are shuffled first, then positives, from one stream.
inline SplitManifest SplitDataset(std::vector<LabeledTrack> tracks,
                                  double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw SplitError("ratio must lie in [0,1]");
  std::sort(tracks.begin(), tracks.end(),
            [](const auto& a, const auto& b) { return a.key < b.key; });
  std::vector<std::string> cls[2];
  for (const auto& t : tracks) cls[t.label ? 1 : 0].push_back(t.key);
  if (cls[0].empty() || cls[1].empty())
    throw SplitError("each class needs at least one track");
  SplitManifest m;
  m.seed = seed;
  m.ratio = ratio;
  Xorshift64 rng(seed);
  for (int c = 0; c < 2; ++c) {
    Shuffle(cls[c], rng);
    const auto n_train = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(cls[c].size())));
    for (std::size_t i = 0; i < cls[c].size(); ++i)
      (i < n_train ? m.train_track_ids : m.test_track_ids).push_back(cls[c][i]);
    const int n_test = static_cast<int>(cls[c].size() - n_train);
    if (c == 1) {
      m.train_positive = static_cast<int>(n_train);
      m.test_positive = n_test;
    } else {
      m.train_negative = static_cast<int>(n_train);
      m.test_negative = n_test;
    }
  }
  std::sort(m.train_track_ids.begin(), m.train_track_ids.end());
  std::sort(m.test_track_ids.begin(), m.test_track_ids.end());
  return m;
}

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

/// w_c = N / (2 N_c), so both classes carry equal total loss mass.
inline ClassWeights ComputeClassWeights(std::int64_t n_pos, std::int64_t n_neg) {
  if (n_pos <= 0 || n_neg <= 0)
    throw WeightError("class weights need both classes present");
  const double n = static_cast<double>(n_pos + n_neg);
  return {n / (2.0 * n_pos), n / (2.0 * n_neg)};
}

inline ClassWeights ComputeClassWeights(std::span<const ObservationSample> train) {
  std::int64_t pos = 0, neg = 0;
  for (const auto& s : train) (s.label ? pos : neg) += 1;
  return ComputeClassWeights(pos, neg);
}

}  // namespace pedcross
