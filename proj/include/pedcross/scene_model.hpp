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

// Domain types for one recorded scene segment ("bundle"), their structural
// checks, behavioural-label validation and corpus statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pedcross/geometry.hpp"

namespace pedcross {

inline constexpr double kFramePeriod = 0.1;     // 10Hz grid
inline constexpr double kKeyframePeriod = 0.5;  // 2Hz source annotations
inline constexpr double kTimeTolerance = 1e-6;

/// Oriented 3D box in global metres. `size` is (width, length, height);
/// length runs along the heading given by `yaw` about the vertical axis.
struct Box3D {
  Vec3 center;
  Vec3 size;
  double yaw = 0.0;
  double timestamp = 0.0;

  bool operator==(const Box3D&) const = default;
};

/// Axis-aligned image box in pixels. Ground-truth boxes carry confidence 1.
struct Box2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double confidence = 1.0;

  bool operator==(const Box2D&) const = default;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const {
    return std::max(0.0, width()) * std::max(0.0, height());
  }
};

inline double IoU(const Box2D& a, const Box2D& b) {
  const double iw =
      std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih =
      std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Zero-skew pinhole camera. `rotation`/`translation` map global points into
/// the camera frame (x right, y down, z forward): p_cam = R * p + t.
struct CameraCalib {
  Mat3 intrinsics = Mat3::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation;
  int image_width = 0;
  int image_height = 0;

  bool operator==(const CameraCalib&) const = default;
};

struct EgoState {
  Vec3 position;
  Vec3 velocity;
  double heading = 0.0;
  double timestamp = 0.0;

  bool operator==(const EgoState&) const = default;
};

// Inclusive 10Hz frame range.
struct FrameInterval {
  int start = 0;
  int end = 0;

  bool operator==(const FrameInterval&) const = default;
};

struct BehaviorRecord {
  std::string track_id;
  bool will_cross = false;
  std::vector<FrameInterval> crossing_intervals;
  std::optional<int> critical_frame;

  bool operator==(const BehaviorRecord&) const = default;
};

struct PedestrianTrack {
  std::string track_id;
  // Object class; only "pedestrian" tracks count towards pedestrian boxes.
  std::string category = "pedestrian";
  std::vector<Box3D> keyframe_boxes;
  // One entry per bundle frame, forward-centre camera.
  std::vector<bool> visibility;
  std::optional<BehaviorRecord> behavior;

  bool operator==(const PedestrianTrack&) const = default;
};

enum class LayerKind { kDrivableArea, kCrosswalk, kSidewalk };

inline std::string_view LayerKindName(LayerKind k) {
  switch (k) {
    case LayerKind::kDrivableArea:
      return "drivable_area";
    case LayerKind::kCrosswalk:
      return "crosswalk";
    case LayerKind::kSidewalk:
      return "sidewalk";
  }
  return "unknown";
}

inline std::optional<LayerKind> ParseLayerKind(std::string_view s) {
  if (s == "drivable_area") return LayerKind::kDrivableArea;
  if (s == "crosswalk") return LayerKind::kCrosswalk;
  if (s == "sidewalk") return LayerKind::kSidewalk;
  return std::nullopt;
}

using Polygon = std::vector<Vec2>;

struct MapLayer {
  LayerKind kind = LayerKind::kDrivableArea;
  std::vector<Polygon> polygons;

  bool operator==(const MapLayer&) const = default;
};

struct SceneBundle {
  std::string bundle_id;
  std::filesystem::path root;
  std::vector<PedestrianTrack> tracks;
  std::vector<EgoState> ego_states;
  std::vector<CameraCalib> calib_per_frame;
  std::vector<MapLayer> map_layers;
  std::vector<std::string> image_paths;  // relative to root
  std::vector<std::vector<Box2D>> detections;

  bool operator==(const SceneBundle&) const = default;

  int frame_count() const { return static_cast<int>(ego_states.size()); }

  std::vector<double> timestamps() const {
    std::vector<double> ts;
    ts.reserve(ego_states.size());
    for (const auto& e : ego_states) ts.push_back(e.timestamp);
    return ts;
  }

  // Grid index of a timestamp, or nullopt if it is off the 10Hz grid.
  std::optional<int> FrameIndexOf(double t) const {
    if (ego_states.empty()) return std::nullopt;
    const double rel = (t - ego_states.front().timestamp) / kFramePeriod;
    const long idx = std::lround(rel);
    if (idx < 0 || idx >= frame_count()) return std::nullopt;
    if (std::abs(ego_states[idx].timestamp - t) > kTimeTolerance)
      return std::nullopt;
    return static_cast<int>(idx);
  }

  const PedestrianTrack* FindTrack(std::string_view id) const {
    for (const auto& t : tracks)
      if (t.track_id == id) return &t;
    return nullptr;
  }
};

namespace detail {

inline double Cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool OnSegment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool SegmentsIntersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                              const Vec2& q2) {
  const double d1 = Cross(q1, q2, p1), d2 = Cross(q1, q2, p2);
  const double d3 = Cross(p1, p2, q1), d4 = Cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && OnSegment(p1, q1, q2)) return true;
  if (d2 == 0 && OnSegment(p2, q1, q2)) return true;
  if (d3 == 0 && OnSegment(q1, p1, p2)) return true;
  if (d4 == 0 && OnSegment(q2, p1, p2)) return true;
  return false;
}

}  // namespace detail

// True when any two non-adjacent edges touch.
inline bool IsSelfIntersecting(const Polygon& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (detail::SegmentsIntersect(poly[i], poly[(i + 1) % n], poly[j],
                                    poly[(j + 1) % n]))
        return true;
    }
  }
  return false;
}

inline bool IsValidCalib(const CameraCalib& c, std::string* why = nullptr) {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  const Mat3& k = c.intrinsics;
  if (!(k(0, 0) > 0 && k(1, 1) > 0)) return fail("non-positive focal length");
  if (k(0, 1) != 0.0) return fail("non-zero skew");
  if (k(1, 0) != 0 || k(2, 0) != 0 || k(2, 1) != 0 || k(2, 2) != 1.0)
    return fail("intrinsics not upper-triangular pinhole form");
  const Mat3 rtr = c.rotation.Transposed() * c.rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > 1e-6)
        return fail("extrinsic rotation not orthonormal");
  if (std::abs(c.rotation.Determinant() - 1.0) > 1e-6)
    return fail("extrinsic rotation determinant != 1");
  if (c.image_width <= 0 || c.image_height <= 0)
    return fail("non-positive image size");
  return true;
}

/// Structural (type-level) invariants of a bundle; every violation is
/// reported as "field[index]: message". Behavioural labels are checked
/// separately by ValidateLabels.
inline std::vector<std::string> CheckStructure(const SceneBundle& b) {
  std::vector<std::string> out;
  auto add = [&](std::string field, std::size_t idx, const std::string& msg) {
    out.push_back(field + "[" + std::to_string(idx) + "]: " + msg);
  };
  const std::size_t n = b.ego_states.size();
  if (n == 0) out.push_back("ego_states: empty bundle");
  if (b.calib_per_frame.size() != n)
    out.push_back("calib_per_frame: frame count " +
                  std::to_string(b.calib_per_frame.size()) + " != " +
                  std::to_string(n));
  if (b.image_paths.size() != n)
    out.push_back("image_paths: frame count " +
                  std::to_string(b.image_paths.size()) + " != " +
                  std::to_string(n));
  if (b.detections.size() != n)
    out.push_back("detections: frame count " +
                  std::to_string(b.detections.size()) + " != " +
                  std::to_string(n));
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = b.ego_states[i].timestamp - b.ego_states[i - 1].timestamp;
    if (dt <= 0.0) add("ego_states", i, "timestamps not strictly increasing");
    if (std::abs(dt - kFramePeriod) > kTimeTolerance) {
      add("ego_states", i, "not a 10Hz grid");
    }
  }
  for (std::size_t i = 0; i < b.calib_per_frame.size(); ++i) {
    std::string why;
    if (!IsValidCalib(b.calib_per_frame[i], &why))
      add("calib_per_frame", i, why);
  }
  for (std::size_t f = 0; f < b.detections.size(); ++f) {
    for (const auto& d : b.detections[f]) {
      if (!(d.x_min < d.x_max && d.y_min < d.y_max))
        add("detections", f, "degenerate box");
      if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
        add("detections", f, "confidence outside [0,1]");
    }
  }
  for (std::size_t li = 0; li < b.map_layers.size(); ++li) {
    for (const auto& poly : b.map_layers[li].polygons) {
      if (poly.size() < 3)
        add("map_layers", li, "polygon with fewer than 3 vertices");
      else if (IsSelfIntersecting(poly))
        add("map_layers", li, "self-intersecting polygon");
    }
  }
  for (std::size_t ti = 0; ti < b.tracks.size(); ++ti) {
    const auto& t = b.tracks[ti];
    const std::string field = "tracks[" + std::to_string(ti) + "]";
    if (t.keyframe_boxes.empty()) {
      out.push_back(field + ".keyframe_boxes: no keyframes");
      continue;
    }
    if (t.visibility.size() != n)
      out.push_back(field + ".visibility: length " +
                    std::to_string(t.visibility.size()) + " != " +
                    std::to_string(n));
    for (std::size_t k = 0; k < t.keyframe_boxes.size(); ++k) {
      const Box3D& box = t.keyframe_boxes[k];
      if (!(box.size.x > 0 && box.size.y > 0 && box.size.z > 0))
        add(field + ".keyframe_boxes", k, "non-positive size");
      if (!(box.yaw > -std::numbers::pi && box.yaw <= std::numbers::pi))
        add(field + ".keyframe_boxes", k, "yaw outside (-pi, pi]");
      if (k > 0) {
        const double dt = box.timestamp - t.keyframe_boxes[k - 1].timestamp;
        if (std::abs(dt - kKeyframePeriod) > kTimeTolerance)
          add(field + ".keyframe_boxes", k, "keyframes not spaced 0.5 s");
      }
      if (n > 0 && !b.FrameIndexOf(box.timestamp))
        add(field + ".keyframe_boxes", k, "timestamp off the 10Hz grid");
    }
    if (t.behavior && t.behavior->track_id != t.track_id)
      out.push_back(field + ".behavior: track id mismatch");
  }
  return out;
}

/// Behavioural-label checks. Violations are returned, never thrown.
inline std::vector<std::string> ValidateLabels(const SceneBundle& b) {
  std::vector<std::string> out;
  for (const auto& t : b.tracks) {
    if (!t.behavior) continue;
    const BehaviorRecord& r = *t.behavior;
    auto add = [&](const std::string& msg) {
      out.push_back(b.bundle_id + "/" + t.track_id + ": " + msg);
    };
    if (r.will_cross && r.crossing_intervals.empty())
      add("will_cross without crossing interval");
    if (!r.will_cross && !r.crossing_intervals.empty())
      add("crossing interval without will_cross");
    if (r.will_cross && !r.critical_frame)
      add("will_cross without critical_frame");
    if (!r.will_cross && r.critical_frame)
      add("critical_frame without will_cross");
    for (const auto& iv : r.crossing_intervals) {
      if (iv.start > iv.end) add("crossing interval with start > end");
      if (iv.start < 0 || iv.end >= b.frame_count())
        add("crossing interval outside the frame grid");
    }
    std::vector<FrameInterval> sorted = r.crossing_intervals;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& c) { return a.start < c.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].start <= sorted[i - 1].end) {
        add("overlapping crossing intervals");
        break;
      }
    }
    if (r.critical_frame && !sorted.empty() &&
        *r.critical_frame != sorted.front().start)
      add("critical_frame is not the start of the earliest crossing interval");
    if (r.critical_frame) {
      int first = -1, last = -1;
      for (std::size_t f = 0; f < t.visibility.size(); ++f) {
        if (!t.visibility[f]) continue;
        if (first < 0) first = static_cast<int>(f);
        last = static_cast<int>(f);
      }
      if (first < 0 || *r.critical_frame < first || *r.critical_frame > last)
        add("critical_frame outside the visibility span");
    }
  }
  return out;
}

/// Corpus-level annotation counts.
struct CorpusStats {
  std::int64_t with_behavior = 0;
  std::int64_t crossing = 0;
  std::int64_t non_crossing = 0;
  std::int64_t per_frame_behavior = 0;
  std::int64_t pedestrian_boxes = 0;
  std::int64_t other_boxes = 0;

  bool operator==(const CorpusStats&) const = default;

  CorpusStats& operator+=(const CorpusStats& o) {
    with_behavior += o.with_behavior;
    crossing += o.crossing;
    non_crossing += o.non_crossing;
    per_frame_behavior += o.per_frame_behavior;
    pedestrian_boxes += o.pedestrian_boxes;
    other_boxes += o.other_boxes;
    return *this;
  }
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) {
    return a += b;
  }

  bool Consistent() const { return crossing + non_crossing == with_behavior; }
};

// Number of 10Hz frames covered by the track's keyframe span.
inline std::int64_t DenseSpanFrames(const PedestrianTrack& t) {
  if (t.keyframe_boxes.empty()) return 0;
  const double span =
      t.keyframe_boxes.back().timestamp - t.keyframe_boxes.front().timestamp;
  return std::llround(span / kFramePeriod) + 1;
}

inline CorpusStats ComputeCorpusStats(std::span<const SceneBundle> bundles) {
  CorpusStats s;
  for (const auto& b : bundles) {
    for (const auto& t : b.tracks) {
      const std::int64_t frames = DenseSpanFrames(t);
      if (t.category == "pedestrian")
        s.pedestrian_boxes += frames;
      else
        s.other_boxes += frames;
      if (!t.behavior) continue;
      ++s.with_behavior;
      if (t.behavior->will_cross)
        ++s.crossing;
      else
        ++s.non_crossing;
      s.per_frame_behavior += frames;
    }
  }
  return s;
}

}  // namespace pedcross
