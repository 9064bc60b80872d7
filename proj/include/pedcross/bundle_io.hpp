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

// On-disk scene-bundle directory:
//
//   meta.json        {"bundle_id", "frame_count"}
//   tracks.json      [{"track_id", "category", "keyframes": [box3d...],
//                      "visibility": [bool...]}]
//   ego.json         [{"position", "velocity", "heading", "timestamp"}]
//   calib.json       [{"intrinsics", "rotation", "translation",
//                      "image_size": [w, h]}]
//   map.json         [{"kind", "polygons": [[[x, y]...]...]}]
//   detections.json  [[{"box": [x0, y0, x1, y1], "confidence"}...]...]
//   behavior.json    [{"track_id", "will_cross", "crossing_intervals",
//                      "critical_frame"}]
//   images/frame_%05d.ppm
//
// Numbers are written with at most 9 significant digits, so a bundle that was
// itself loaded from disk re-saves to identical text.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/error.hpp"
#include "pedcross/scene_model.hpp"

namespace pedcross {

using json = nlohmann::json;

// Nearest double to the 9-significant-digit decimal form of `v`.
inline double Quantize9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

inline std::string FrameImageName(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "images/frame_%05d.ppm", frame);
  return buf;
}

namespace io {

inline json Num(double v) { return Quantize9(v); }

inline json ToJson(const Vec3& v) { return {Num(v.x), Num(v.y), Num(v.z)}; }
inline json ToJson(const Vec2& v) { return {Num(v.x), Num(v.y)}; }
inline json ToJson(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back({Num(m(r, 0)), Num(m(r, 1)), Num(m(r, 2))});
  return rows;
}
inline json ToJson(const Box3D& b) {
  return {{"center", ToJson(b.center)},
          {"size", ToJson(b.size)},
          {"yaw", Num(b.yaw)},
          {"timestamp", Num(b.timestamp)}};
}
inline json ToJson(const Box2D& b) {
  return {{"box", {Num(b.x_min), Num(b.y_min), Num(b.x_max), Num(b.y_max)}},
          {"confidence", Num(b.confidence)}};
}

inline Vec3 ReadVec3(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
inline Vec2 ReadVec2(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}
inline Mat3 ReadMat3(const json& j) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}
inline Box3D ReadBox3D(const json& j) {
  Box3D b;
  b.center = ReadVec3(j.at("center"));
  b.size = ReadVec3(j.at("size"));
  b.yaw = NormalizeAngle(j.at("yaw").get<double>());
  b.timestamp = j.at("timestamp").get<double>();
  return b;
}
inline Box2D ReadBox2D(const json& j) {
  const json& a = j.at("box");
  Box2D b{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(),
          a.at(3).get<double>(), 1.0};
  if (j.contains("confidence")) b.confidence = j.at("confidence").get<double>();
  return b;
}

inline json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

inline void WriteJsonFile(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << "\n";
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace io

inline json BehaviorToJson(const BehaviorRecord& r) {
  json iv = json::array();
  for (const auto& i : r.crossing_intervals) iv.push_back({i.start, i.end});
  json j = {{"track_id", r.track_id},
            {"will_cross", r.will_cross},
            {"crossing_intervals", iv}};
  j["critical_frame"] =
      r.critical_frame ? json(*r.critical_frame) : json(nullptr);
  return j;
}

inline BehaviorRecord BehaviorFromJson(const json& j) {
  BehaviorRecord r;
  r.track_id = j.at("track_id").get<std::string>();
  r.will_cross = j.at("will_cross").get<bool>();
  for (const auto& iv : j.at("crossing_intervals"))
    r.crossing_intervals.push_back({iv.at(0).get<int>(), iv.at(1).get<int>()});
  if (j.contains("critical_frame") && !j.at("critical_frame").is_null())
    r.critical_frame = j.at("critical_frame").get<int>();
  return r;
}

/// Writes every metadata file of `b` into `dir` (images are not touched).
inline void SaveBundle(const SceneBundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  io::WriteJsonFile(dir / "meta.json", {{"bundle_id", b.bundle_id},
                                        {"frame_count", b.frame_count()}});

  json tracks = json::array();
  json behavior = json::array();
  for (const auto& t : b.tracks) {
    json kfs = json::array();
    for (const auto& k : t.keyframe_boxes) kfs.push_back(io::ToJson(k));
    json vis = json::array();
    for (bool v : t.visibility) vis.push_back(v);
    tracks.push_back({{"track_id", t.track_id},
                      {"category", t.category},
                      {"keyframes", kfs},
                      {"visibility", vis}});
    if (t.behavior) behavior.push_back(BehaviorToJson(*t.behavior));
  }
  io::WriteJsonFile(dir / "tracks.json", tracks);
  io::WriteJsonFile(dir / "behavior.json", behavior);

  json ego = json::array();
  for (const auto& e : b.ego_states)
    ego.push_back({{"position", io::ToJson(e.position)},
                   {"velocity", io::ToJson(e.velocity)},
                   {"heading", io::Num(e.heading)},
                   {"timestamp", io::Num(e.timestamp)}});
  io::WriteJsonFile(dir / "ego.json", ego);

  json calib = json::array();
  for (const auto& c : b.calib_per_frame)
    calib.push_back({{"intrinsics", io::ToJson(c.intrinsics)},
                     {"rotation", io::ToJson(c.rotation)},
                     {"translation", io::ToJson(c.translation)},
                     {"image_size", {c.image_width, c.image_height}}});
  io::WriteJsonFile(dir / "calib.json", calib);

  json map = json::array();
  for (const auto& l : b.map_layers) {
    json polys = json::array();
    for (const auto& p : l.polygons) {
      json pts = json::array();
      for (const auto& v : p) pts.push_back(io::ToJson(v));
      polys.push_back(pts);
    }
    map.push_back({{"kind", std::string(LayerKindName(l.kind))},
                   {"polygons", polys}});
  }
  io::WriteJsonFile(dir / "map.json", map);

  json dets = json::array();
  for (const auto& frame : b.detections) {
    json fj = json::array();
    for (const auto& d : frame) fj.push_back(io::ToJson(d));
    dets.push_back(fj);
  }
  io::WriteJsonFile(dir / "detections.json", dets);
}

/// Loads and structurally validates a bundle directory.
/// Throws LoadError (missing/unparsable file) or ValidationError.
inline SceneBundle LoadBundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SceneBundle b;
  b.root = dir;
  const json meta = io::ReadJsonFile(dir / "meta.json");
  const json tracks = io::ReadJsonFile(dir / "tracks.json");
  const json ego = io::ReadJsonFile(dir / "ego.json");
  const json calib = io::ReadJsonFile(dir / "calib.json");
  const json map = io::ReadJsonFile(dir / "map.json");
  const json dets = io::ReadJsonFile(dir / "detections.json");
  const json behavior = io::ReadJsonFile(dir / "behavior.json");

  int frame_count = 0;
  std::vector<std::string> violations;
  try {
    b.bundle_id = meta.at("bundle_id").get<std::string>();
    frame_count = meta.at("frame_count").get<int>();

    for (const auto& e : ego) {
      EgoState s;
      s.position = io::ReadVec3(e.at("position"));
      s.velocity = io::ReadVec3(e.at("velocity"));
      s.heading = e.at("heading").get<double>();
      s.timestamp = e.at("timestamp").get<double>();
      b.ego_states.push_back(s);
    }
    for (const auto& c : calib) {
      CameraCalib cc;
      cc.intrinsics = io::ReadMat3(c.at("intrinsics"));
      cc.rotation = io::ReadMat3(c.at("rotation"));
      cc.translation = io::ReadVec3(c.at("translation"));
      cc.image_width = c.at("image_size").at(0).get<int>();
      cc.image_height = c.at("image_size").at(1).get<int>();
      b.calib_per_frame.push_back(cc);
    }
    for (const auto& l : map) {
      MapLayer layer;
      const auto kind = ParseLayerKind(l.at("kind").get<std::string>());
      if (!kind) {
        violations.push_back("map_layers: unknown layer kind " +
                             l.at("kind").get<std::string>());
        continue;
      }
      layer.kind = *kind;
      for (const auto& p : l.at("polygons")) {
        Polygon poly;
        for (const auto& v : p) poly.push_back(io::ReadVec2(v));
        layer.polygons.push_back(std::move(poly));
      }
      b.map_layers.push_back(std::move(layer));
    }
    for (const auto& frame : dets) {
      std::vector<Box2D> boxes;
      for (const auto& d : frame) boxes.push_back(io::ReadBox2D(d));
      b.detections.push_back(std::move(boxes));
    }
    for (const auto& t : tracks) {
      PedestrianTrack track;
      track.track_id = t.at("track_id").get<std::string>();
      if (t.contains("category"))
        track.category = t.at("category").get<std::string>();
      for (const auto& k : t.at("keyframes"))
        track.keyframe_boxes.push_back(io::ReadBox3D(k));
      for (const auto& v : t.at("visibility"))
        track.visibility.push_back(v.get<bool>());
      b.tracks.push_back(std::move(track));
    }
    for (std::size_t i = 0; i < behavior.size(); ++i) {
      BehaviorRecord r = BehaviorFromJson(behavior[i]);
      bool attached = false;
      for (auto& t : b.tracks) {
        if (t.track_id != r.track_id) continue;
        if (t.behavior)
          violations.push_back("behavior[" + std::to_string(i) +
                               "]: duplicate record for track " + r.track_id);
        t.behavior = r;
        attached = true;
        break;
      }
      if (!attached)
        violations.push_back("behavior[" + std::to_string(i) +
                             "]: unknown track " + r.track_id);
    }
  } catch (const json::exception& e) {
    throw LoadError(dir.string() + ": malformed metadata: " + e.what());
  }

  for (int f = 0; f < static_cast<int>(b.ego_states.size()); ++f) {
    const std::string rel = FrameImageName(f);
    if (!fs::exists(dir / rel))
      throw LoadError("missing file " + (dir / rel).string());
    b.image_paths.push_back(rel);
  }

  if (frame_count != b.frame_count())
    violations.push_back("meta.frame_count: " + std::to_string(frame_count) +
                         " != ego frame count " +
                         std::to_string(b.frame_count()));
  auto structural = CheckStructure(b);
  violations.insert(violations.end(), structural.begin(), structural.end());
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return b;
}

/// Rounds every stored numeric field to its on-disk representation, so that
/// LoadBundle(SaveBundle(q)) == q for the returned bundle.
inline SceneBundle QuantizeBundle(SceneBundle b) {
  auto q3 = [](Vec3& v) {
    v = {Quantize9(v.x), Quantize9(v.y), Quantize9(v.z)};
  };
  auto qm = [](Mat3& m) {
    for (auto& row : m.m)
      for (double& x : row) x = Quantize9(x);
  };
  for (auto& t : b.tracks)
    for (auto& k : t.keyframe_boxes) {
      q3(k.center);
      q3(k.size);
      k.yaw = NormalizeAngle(Quantize9(k.yaw));
      k.timestamp = Quantize9(k.timestamp);
    }
  for (auto& e : b.ego_states) {
    q3(e.position);
    q3(e.velocity);
    e.heading = Quantize9(e.heading);
    e.timestamp = Quantize9(e.timestamp);
  }
  for (auto& c : b.calib_per_frame) {
    qm(c.intrinsics);
    qm(c.rotation);
    q3(c.translation);
  }
  for (auto& l : b.map_layers)
    for (auto& p : l.polygons)
      for (auto& v : p) v = {Quantize9(v.x), Quantize9(v.y)};
  for (auto& f : b.detections)
    for (auto& d : f) {
      d.x_min = Quantize9(d.x_min);
      d.y_min = Quantize9(d.y_min);
      d.x_max = Quantize9(d.x_max);
      d.y_max = Quantize9(d.y_max);
      d.confidence = Quantize9(d.confidence);
    }
  return b;
}

// Loads every bundle directory (one containing meta.json) under `root`,
// sorted by directory name.
inline std::vector<SceneBundle> LoadCorpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw LoadError("missing corpus directory " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "meta.json"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SceneBundle> out;
  for (const auto& d : dirs) out.push_back(LoadBundle(d));
  return out;
}

}  // namespace pedcross
