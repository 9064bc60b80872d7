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

// Synthetic scene bundles.
//
// World: a straight road along +x (drivable |y| < 5, sidewalks 5 < |y| < 9,
// two crosswalks). The ego drives the right lane (y = -2.5) at a constant
// per-bundle speed with a forward camera 1.5 m up. Pedestrians start on a
// sidewalk and walk parallel to the road; crossers turn towards the road
// 25 frames before their critical frame, which is the frame they reach the
// kerb (|y| = 5), and keep walking across. Each bundle also holds parked
// vehicles (category "vehicle", no behaviour label).
//
// Scene images are 8-bit grayscale replicated to RGB: background 64, every
// visible pedestrian a 255 rectangle at its projected box. Detections are the
// projected boxes with N(0, 2 px) jitter on each coordinate.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "pedcross/bundle_io.hpp"
#include "pedcross/densify.hpp"
#include "pedcross/error.hpp"
#include "pedcross/image.hpp"
#include "pedcross/random.hpp"
#include "pedcross/scene_model.hpp"

namespace pedcross {

struct SyntheticSpec {
  int n_bundles = 4;
  int frames_per_bundle = 60;
  int peds_per_bundle = 5;
  double crossing_fraction = 0.4;
  int image_side = 64;
  double map_extent = 120.0;  // road length, metres
  int vehicles_per_bundle = 1;
  std::uint64_t seed = 0;

  void Validate() const {
    if (n_bundles < 1 || frames_per_bundle < 1 || peds_per_bundle < 1 ||
        image_side < 1)
      throw ConfigError("synthetic counts must all be >= 1");
    if (vehicles_per_bundle < 0) throw ConfigError("vehicles_per_bundle must be >= 0");
    if (!(crossing_fraction >= 0.0 && crossing_fraction <= 1.0))
      throw ConfigError("crossing_fraction must lie in [0,1]");
    if (!(map_extent > 0.0)) throw ConfigError("map_extent must be positive");
  }

  int crossers_per_bundle() const {
    return static_cast<int>(std::lround(crossing_fraction * peds_per_bundle));
  }
  // Frames [0, last keyframe] carry dense boxes.
  int dense_frames() const { return (frames_per_bundle - 1) / 5 * 5 + 1; }
};

struct SyntheticBundle {
  SceneBundle bundle;
  std::vector<Image> frames;
};

inline constexpr double kRoadHalfWidth = 5.0;
inline constexpr double kSidewalkOuter = 9.0;
inline constexpr double kEgoLaneY = -2.5;
inline constexpr double kCameraHeight = 1.5;
inline constexpr double kCameraForward = 1.0;
inline constexpr int kTurnLeadFrames = 25;
inline constexpr std::uint8_t kBackgroundLevel = 64;
inline constexpr std::uint8_t kPedestrianLevel = 255;

namespace detail {

inline Polygon Rect(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

inline std::vector<MapLayer> StraightRoadMap(double extent) {
  const double x0 = -0.25 * extent, x1 = 0.75 * extent;
  MapLayer drivable{LayerKind::kDrivableArea,
                    {Rect(x0, -kRoadHalfWidth, x1, kRoadHalfWidth)}};
  MapLayer crosswalk{LayerKind::kCrosswalk, {}};
  for (double cx : {0.25 * extent, 0.5 * extent})
    crosswalk.polygons.push_back(Rect(cx - 2.0, -kRoadHalfWidth, cx + 2.0, kRoadHalfWidth));
  MapLayer sidewalk{LayerKind::kSidewalk,
                    {Rect(x0, kRoadHalfWidth, x1, kSidewalkOuter),
                     Rect(x0, -kSidewalkOuter, x1, -kRoadHalfWidth)}};
  return {drivable, crosswalk, sidewalk};
}

inline CameraCalib ForwardCamera(const EgoState& ego, int side) {
  const double h = ego.heading, s = std::sin(h), c = std::cos(h);
  CameraCalib cal;
  cal.image_width = side;
  cal.image_height = side;
  cal.intrinsics = Mat3::Identity();
  cal.intrinsics(0, 0) = 0.5 * side;
  cal.intrinsics(1, 1) = 0.5 * side;
  cal.intrinsics(0, 2) = 0.5 * side;
  cal.intrinsics(1, 2) = 0.5 * side;
  // Rows: right, down, forward.
  cal.rotation.m = {{{s, -c, 0.0}, {0.0, 0.0, -1.0}, {c, s, 0.0}}};
  const Vec3 cam = ego.position + Vec3{c * kCameraForward, s * kCameraForward, kCameraHeight};
  const Vec3 rc = cal.rotation * cam;
  cal.translation = {-rc.x, -rc.y, -rc.z};
  return cal;
}

// Pixels whose centres fall inside the box; at least the pixel holding the
// box centre.
inline void FillBox(Image& img, const Box2D& b, std::uint8_t level) {
  const Rgb c = {level, level, level};
  const int c0 = std::max(0, static_cast<int>(std::ceil(b.x_min - 0.5)));
  const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.x_max - 0.5)) - 1);
  const int r0 = std::max(0, static_cast<int>(std::ceil(b.y_min - 0.5)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.y_max - 0.5)) - 1);
  if (c0 > c1 || r0 > r1) {
    const int col = std::clamp(static_cast<int>((b.x_min + b.x_max) / 2), 0, img.width - 1);
    const int row = std::clamp(static_cast<int>((b.y_min + b.y_max) / 2), 0, img.height - 1);
    img.set(row, col, c);
    return;
  }
  for (int r = r0; r <= r1; ++r)
    for (int col = c0; col <= c1; ++col) img.set(r, col, c);
}

// Piecewise-linear walker: parallel phase, then a constant-velocity phase
// from `turn_time` on.
struct Walker {
  Vec3 start;
  Vec3 v0;
  Vec3 v1;
  double turn_time = 1e300;

  Vec3 At(double t) const {
    if (t <= turn_time) return start + v0 * t;
    return start + v0 * turn_time + v1 * (t - turn_time);
  }
  double YawAt(double t) const {
    const Vec3& v = t < turn_time ? v0 : v1;
    return NormalizeAngle(std::atan2(v.y, v.x));
  }
};

}  // namespace detail

inline SyntheticBundle GenerateBundle(const SyntheticSpec& spec, int index) {
  spec.Validate();
  Xorshift64 rng(spec.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1)));
  const int n = spec.frames_per_bundle;
  const int side = spec.image_side;
  const int last_kf = spec.dense_frames() - 1;

  SyntheticBundle out;
  SceneBundle& b = out.bundle;
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%04d", index);
  b.bundle_id = id;
  b.map_layers = detail::StraightRoadMap(spec.map_extent);

  const double ego_speed = rng.Uniform(1.5, 3.0);
  for (int f = 0; f < n; ++f) {
    const double t = f * kFramePeriod;
    EgoState e;
    e.position = {ego_speed * t, kEgoLaneY, 0.0};
    e.velocity = {ego_speed, 0.0, 0.0};
    e.heading = 0.0;
    e.timestamp = t;
    b.ego_states.push_back(e);
    b.calib_per_frame.push_back(detail::ForwardCamera(e, side));
    b.image_paths.push_back(FrameImageName(f));
  }

  const Vec3 ped_size = {0.6, 0.6, 1.75};
  const int n_cross = spec.crossers_per_bundle();
  std::vector<detail::Walker> walkers;
  std::vector<Vec3> sizes;
  std::vector<std::string> categories;
  for (int p = 0; p < spec.peds_per_bundle; ++p) {
    const bool crosser = p < n_cross;
    const double sgn = rng.Bernoulli(0.5) ? 1.0 : -1.0;
    const double y0 = sgn * rng.Uniform(6.0, 8.0);
    double speed = rng.Uniform(0.3, 1.4);
    if (rng.Bernoulli(0.5)) speed = -speed;
    detail::Walker w;
    w.v0 = {speed, 0.0, 0.0};
    PedestrianTrack track;
    char tid[32];
    std::snprintf(tid, sizeof(tid), "ped_%02d", p);
    track.track_id = tid;
    BehaviorRecord r;
    r.track_id = track.track_id;
    if (crosser) {
      const int lo = static_cast<int>(std::lround(0.5 * last_kf));
      const int hi = static_cast<int>(std::lround(0.75 * last_kf));
      const int critical = lo + static_cast<int>(rng.Below(static_cast<std::uint64_t>(hi - lo + 1)));
      const int turn = std::max(0, critical - kTurnLeadFrames);
      const double t_turn = turn * kFramePeriod;
      const double t_crit = critical * kFramePeriod;
      const double lateral = std::abs(y0) - kRoadHalfWidth;
      const double vy = critical > turn ? lateral / (t_crit - t_turn) : 1.0;
      w.v1 = {0.0, -sgn * vy, 0.0};
      w.turn_time = t_turn;
      // Kerb point lies 12..30 m ahead of the ego at the critical frame.
      const double ahead = rng.Uniform(12.0, 30.0);
      const double x_crit = ego_speed * t_crit + kCameraForward + ahead;
      w.start = {x_crit - speed * t_turn, y0, ped_size.z / 2};
      r.will_cross = true;
      r.critical_frame = critical;
      r.crossing_intervals.push_back({critical, n - 1});
    } else {
      w.start = {rng.Uniform(20.0, 45.0), y0, ped_size.z / 2};
    }
    track.behavior = r;
    b.tracks.push_back(track);
    walkers.push_back(w);
    sizes.push_back(ped_size);
    categories.push_back("pedestrian");
  }
  for (int v = 0; v < spec.vehicles_per_bundle; ++v) {
    PedestrianTrack track;
    char tid[32];
    std::snprintf(tid, sizeof(tid), "veh_%02d", v);
    track.track_id = tid;
    track.category = "vehicle";
    detail::Walker w;
    const double sgn = rng.Bernoulli(0.5) ? 1.0 : -1.0;
    w.start = {rng.Uniform(15.0, 60.0), sgn * 4.0, 0.75};
    b.tracks.push_back(track);
    walkers.push_back(w);
    sizes.push_back({1.8, 4.5, 1.5});
    categories.push_back("vehicle");
  }

  for (std::size_t i = 0; i < b.tracks.size(); ++i) {
    auto& track = b.tracks[i];
    for (int f = 0; f <= last_kf; f += 5) {
      const double t = f * kFramePeriod;
      track.keyframe_boxes.push_back({walkers[i].At(t), sizes[i], walkers[i].YawAt(t), t});
    }
  }
  b = QuantizeBundle(std::move(b));

  // Visibility, images and detections come from the quantized state so that
  // the files on disk are self-consistent.
  for (auto& track : b.tracks) track.visibility.assign(n, false);
  b.detections.assign(n, {});
  for (int f = 0; f < n; ++f) {
    Image img(side, side, {kBackgroundLevel, kBackgroundLevel, kBackgroundLevel});
    const double t = b.ego_states[f].timestamp;
    for (std::size_t i = 0; i < b.tracks.size(); ++i) {
      auto& track = b.tracks[i];
      Box3D box{walkers[i].At(t), sizes[i], walkers[i].YawAt(t), t};
      if (f <= last_kf) {
        const double grid[1] = {t};
        box = InterpolateTrack(track, grid, f).frames.front().box;
      }
      const auto proj = ProjectBox(box, b.calib_per_frame[f]);
      if (!proj) continue;
      track.visibility[f] = true;
      if (track.category != "pedestrian") continue;
      detail::FillBox(img, *proj, kPedestrianLevel);
      Box2D d = *proj;
      double xs[2] = {d.x_min + rng.Gaussian(0, 2), d.x_max + rng.Gaussian(0, 2)};
      double ys[2] = {d.y_min + rng.Gaussian(0, 2), d.y_max + rng.Gaussian(0, 2)};
      if (xs[0] > xs[1]) std::swap(xs[0], xs[1]);
      if (ys[0] > ys[1]) std::swap(ys[0], ys[1]);
      d = {Quantize9(xs[0]), Quantize9(ys[0]), Quantize9(std::max(xs[1], xs[0] + 1.0)),
           Quantize9(std::max(ys[1], ys[0] + 1.0)), Quantize9(rng.Uniform(0.6, 1.0))};
      b.detections[f].push_back(d);
    }
    out.frames.push_back(std::move(img));
  }
  // Crossers must be visible at their critical frame; pull the label to the
  // nearest visible frame at or before it if the camera lost them.
  for (auto& track : b.tracks) {
    if (!track.behavior || !track.behavior->will_cross) continue;
    int c = *track.behavior->critical_frame;
    while (c > 0 && !track.visibility[c]) --c;
    track.behavior->critical_frame = c;
    track.behavior->crossing_intervals.front().start = c;
  }
  return out;
}

/// Writes `spec.n_bundles` bundles below `out` and returns them as
/// LoadCorpus(out) would.
inline std::vector<SceneBundle> GenerateSynthetic(const SyntheticSpec& spec,
                                                  const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  spec.Validate();
  std::vector<SceneBundle> bundles;
  for (int i = 0; i < spec.n_bundles; ++i) {
    SyntheticBundle sb = GenerateBundle(spec, i);
    const fs::path dir = out / sb.bundle.bundle_id;
    SaveBundle(sb.bundle, dir);
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string());
    for (int f = 0; f < static_cast<int>(sb.frames.size()); ++f)
      WritePpm(dir / FrameImageName(f), sb.frames[f]);
    sb.bundle.root = dir;
    bundles.push_back(std::move(sb.bundle));
  }
  return bundles;
}

}  // namespace pedcross
