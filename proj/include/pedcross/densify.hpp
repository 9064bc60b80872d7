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

// 2Hz -> 10Hz box densification: interpolation in global coordinates,
// pinhole projection into the forward camera, and detection-guided
// refinement of the interpolated image boxes.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/bundle_io.hpp"
#include "pedcross/error.hpp"
#include "pedcross/scene_model.hpp"

namespace pedcross {

struct DenseFrame {
  int frame_index = 0;
  Box3D box;
  std::optional<Box2D> projected;
  std::optional<Box2D> adjusted;
  bool is_keyframe = false;

  bool operator==(const DenseFrame&) const = default;
};

struct DenseTrack {
  std::string track_id;
  std::vector<DenseFrame> frames;

  bool operator==(const DenseTrack&) const = default;

  int first_frame() const { return frames.front().frame_index; }
  int last_frame() const { return frames.back().frame_index; }

  const DenseFrame* Find(int frame_index) const {
    if (frames.empty()) return nullptr;
    const int off = frame_index - first_frame();
    if (off < 0 || off >= static_cast<int>(frames.size())) return nullptr;
    return &frames[off];
  }
};

struct DensifyOptions {
  double iou_threshold = 0.3;
  double blend = 0.5;
  double near_plane = 0.1;  // metres in front of the camera
};

/// Yaw at fraction `alpha` between two headings, taken from the linear blend
/// of their unit vectors (so the path follows the shorter arc and never
/// crosses the +-pi seam). Written relative to `yaw0`.
inline double InterpolateYaw(double yaw0, double yaw1, double alpha) {
  const double delta = NormalizeAngle(yaw1 - yaw0);
  const double rel = std::atan2(alpha * std::sin(delta),
                                (1.0 - alpha) + alpha * std::cos(delta));
  return NormalizeAngle(yaw0 + rel);
}

/// Interpolates the keyframes of `track` onto `grid` (10Hz timestamps).
/// grid[i] is assigned frame index `first_frame + i`. Throws RangeError for a
/// grid timestamp outside the keyframe span.
inline DenseTrack InterpolateTrack(const PedestrianTrack& track,
                                   std::span<const double> grid,
                                   int first_frame = 0) {
  const auto& kfs = track.keyframe_boxes;
  if (kfs.empty()) throw RangeError("track " + track.track_id + " has no keyframes");
  DenseTrack out;
  out.track_id = track.track_id;
  out.frames.reserve(grid.size());
  const double t_first = kfs.front().timestamp;
  const double t_last = kfs.back().timestamp;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    if (t < t_first - kTimeTolerance || t > t_last + kTimeTolerance)
      throw RangeError("grid timestamp " + std::to_string(t) +
                       " outside keyframe span of track " + track.track_id);
    DenseFrame f;
    f.frame_index = first_frame + static_cast<int>(i);

    std::optional<std::size_t> exact;
    for (std::size_t k = 0; k < kfs.size(); ++k)
      if (std::abs(kfs[k].timestamp - t) <= kTimeTolerance) exact = k;
    if (exact) {
      f.box = kfs[*exact];
      f.is_keyframe = true;
      out.frames.push_back(f);
      continue;
    }
    std::size_t seg = 0;
    while (seg + 2 < kfs.size() && kfs[seg + 1].timestamp < t) ++seg;
    const Box3D& a = kfs[seg];
    const Box3D& b = kfs[seg + 1];
    const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);
    f.box.center = a.center + (b.center - a.center) * alpha;
    f.box.size = a.size + (b.size - a.size) * alpha;
    f.box.yaw = InterpolateYaw(a.yaw, b.yaw, alpha);
    f.box.timestamp = t;
    out.frames.push_back(f);
  }
  return out;
}

// Corners in global coordinates; bottom face first, counter-clockwise.
inline std::array<Vec3, 8> BoxCorners(const Box3D& box) {
  const double hl = box.size.y / 2, hw = box.size.x / 2, hh = box.size.z / 2;
  const Mat3 rot = RotationZ(box.yaw);
  std::array<Vec3, 8> out;
  const double sx[4] = {1, -1, -1, 1};
  const double sy[4] = {1, 1, -1, -1};
  for (int i = 0; i < 8; ++i) {
    const Vec3 local{sx[i % 4] * hl, sy[i % 4] * hw, i < 4 ? -hh : hh};
    out[i] = box.center + rot * local;
  }
  return out;
}

/// Projects the oriented box into the image: corners in front of the near
/// plane plus the near-plane crossings of box edges are mapped through the
/// pinhole model and their axis-aligned hull is clipped to the image.
/// Returns nullopt when nothing lies in front of the camera or the clipped
/// hull is degenerate.
inline std::optional<Box2D> ProjectBox(const Box3D& box, const CameraCalib& calib,
                                       double near_plane = 0.1) {
  const auto corners = BoxCorners(box);
  std::array<Vec3, 8> cam;
  for (int i = 0; i < 8; ++i)
    cam[i] = calib.rotation * corners[i] + calib.translation;

  std::vector<Vec3> pts;
  for (const auto& p : cam)
    if (p.z >= near_plane) pts.push_back(p);
  if (pts.size() < 8) {
    static constexpr int kEdges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                          {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                          {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    for (const auto& e : kEdges) {
      const Vec3& a = cam[e[0]];
      const Vec3& b = cam[e[1]];
      if ((a.z < near_plane) == (b.z < near_plane)) continue;
      const double s = (near_plane - a.z) / (b.z - a.z);
      pts.push_back(a + (b - a) * s);
    }
  }
  if (pts.empty()) return std::nullopt;

  const Mat3& k = calib.intrinsics;
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (const auto& p : pts) {
    const double u = k(0, 0) * p.x / p.z + k(0, 2);
    const double v = k(1, 1) * p.y / p.z + k(1, 2);
    x0 = std::min(x0, u);
    x1 = std::max(x1, u);
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
  }
  Box2D out{std::clamp(x0, 0.0, double(calib.image_width)),
            std::clamp(y0, 0.0, double(calib.image_height)),
            std::clamp(x1, 0.0, double(calib.image_width)),
            std::clamp(y1, 0.0, double(calib.image_height)), 1.0};
  if (!(out.x_min < out.x_max && out.y_min < out.y_max)) return std::nullopt;
  return out;
}

/// Greedy one-to-one association over an IoU table (rows: projected boxes,
/// columns: detections) in descending IoU order; ties break on (row, column).
/// Entry i holds the column matched to row i, if any with IoU >= threshold.
inline std::vector<std::optional<std::size_t>> GreedyMatch(
    const std::vector<std::vector<double>>& iou, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    throw RangeError("iou_threshold must lie in (0,1)");
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  std::size_t cols = 0;
  for (std::size_t i = 0; i < iou.size(); ++i) {
    cols = std::max(cols, iou[i].size());
    for (std::size_t j = 0; j < iou[i].size(); ++j)
      if (iou[i][j] >= iou_threshold) pairs.emplace_back(iou[i][j], i, j);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::make_pair(std::get<1>(a), std::get<2>(a)) <
           std::make_pair(std::get<1>(b), std::get<2>(b));
  });
  std::vector<std::optional<std::size_t>> match(iou.size());
  std::vector<bool> used(cols, false);
  for (const auto& [v, i, j] : pairs) {
    if (match[i] || used[j]) continue;
    match[i] = j;
    used[j] = true;
  }
  return match;
}

inline std::vector<std::optional<std::size_t>> MatchDetections(
    std::span<const Box2D> projected, std::span<const Box2D> detections,
    double iou_threshold) {
  std::vector<std::vector<double>> iou(projected.size(),
                                       std::vector<double>(detections.size()));
  for (std::size_t i = 0; i < projected.size(); ++i)
    for (std::size_t j = 0; j < detections.size(); ++j)
      iou[i][j] = IoU(projected[i], detections[j]);
  return GreedyMatch(iou, iou_threshold);
}

// Corner-wise blend; identical to blending centre and size.
inline Box2D BlendBox(const Box2D& projected, const Box2D& detection,
                      double alpha) {
  return {alpha * detection.x_min + (1 - alpha) * projected.x_min,
          alpha * detection.y_min + (1 - alpha) * projected.y_min,
          alpha * detection.x_max + (1 - alpha) * projected.x_max,
          alpha * detection.y_max + (1 - alpha) * projected.y_max, 1.0};
}

/// Refines one track against per-frame detections (indexed by frame).
/// Keyframes and unmatched frames keep the projected box.
inline DenseTrack AdjustBoxes(DenseTrack dense,
                              std::span<const std::vector<Box2D>> detections,
                              double iou_threshold, double blend) {
  if (!(blend >= 0.0 && blend <= 1.0))
    throw RangeError("blend must lie in [0,1]");
  for (auto& f : dense.frames) {
    f.adjusted.reset();
    if (!f.projected) continue;
    f.adjusted = f.projected;
    if (f.is_keyframe || f.frame_index < 0 ||
        f.frame_index >= static_cast<int>(detections.size()))
      continue;
    const Box2D proj = *f.projected;
    const auto m = MatchDetections(std::span<const Box2D>(&proj, 1),
                                   detections[f.frame_index], iou_threshold);
    if (m[0]) f.adjusted = BlendBox(proj, detections[f.frame_index][*m[0]], blend);
  }
  return dense;
}

/// Interpolates, projects and refines every track of a bundle. Detections are
/// associated jointly per frame, so one detection refines at most one track.
inline std::vector<DenseTrack> DensifyBundle(const SceneBundle& bundle,
                                             const DensifyOptions& opt = {}) {
  if (!(opt.blend >= 0.0 && opt.blend <= 1.0))
    throw RangeError("blend must lie in [0,1]");
  std::vector<DenseTrack> out;
  out.reserve(bundle.tracks.size());
  for (const auto& track : bundle.tracks) {
    if (track.keyframe_boxes.empty())
      throw RangeError("track " + track.track_id + " has no keyframes");
    const auto first = bundle.FrameIndexOf(track.keyframe_boxes.front().timestamp);
    const auto last = bundle.FrameIndexOf(track.keyframe_boxes.back().timestamp);
    if (!first || !last)
      throw RangeError("track " + track.track_id + " keyframes off the grid");
    std::vector<double> grid;
    for (int f = *first; f <= *last; ++f)
      grid.push_back(bundle.ego_states[f].timestamp);
    DenseTrack dense = InterpolateTrack(track, grid, *first);
    for (auto& f : dense.frames)
      f.projected = ProjectBox(f.box, bundle.calib_per_frame[f.frame_index],
                               opt.near_plane);
    out.push_back(std::move(dense));
  }

  for (int frame = 0; frame < bundle.frame_count(); ++frame) {
    std::vector<Box2D> proj;
    std::vector<DenseFrame*> owners;
    for (auto& dt : out) {
      if (frame < dt.first_frame() || frame > dt.last_frame()) continue;
      DenseFrame& f = dt.frames[frame - dt.first_frame()];
      if (!f.projected) continue;
      f.adjusted = f.projected;
      if (f.is_keyframe) continue;
      proj.push_back(*f.projected);
      owners.push_back(&f);
    }
    if (proj.empty()) continue;
    const auto& dets = bundle.detections[frame];
    const auto m = MatchDetections(proj, dets, opt.iou_threshold);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) owners[i]->adjusted = BlendBox(proj[i], dets[*m[i]], opt.blend);
  }
  return out;
}

inline nlohmann::json DenseTracksToJson(std::span<const DenseTrack> tracks) {
  using nlohmann::json;
  auto box2 = [](const std::optional<Box2D>& b) -> json {
    if (!b) return nullptr;
    return {Quantize9(b->x_min), Quantize9(b->y_min), Quantize9(b->x_max),
            Quantize9(b->y_max)};
  };
  json out = json::array();
  for (const auto& t : tracks) {
    json frames = json::array();
    for (const auto& f : t.frames)
      frames.push_back({{"frame_index", f.frame_index},
                        {"box", io::ToJson(f.box)},
                        {"projected", box2(f.projected)},
                        {"adjusted", box2(f.adjusted)},
                        {"is_keyframe", f.is_keyframe}});
    out.push_back({{"track_id", t.track_id}, {"frames", frames}});
  }
  return out;
}

inline void WriteDenseTracks(const std::filesystem::path& path,
                             std::span<const DenseTrack> tracks) {
  io::WriteJsonFile(path, DenseTracksToJson(tracks));
}

}  // namespace pedcross
