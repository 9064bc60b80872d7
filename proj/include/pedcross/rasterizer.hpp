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

// Ego-centred bird's-eye-view rasterisation of the semantic map layers.
//
// Raster convention: the ego sits at the raster centre and its heading
// points up (towards row 0). Pixel (row, col) samples the point
//   right   = (col + 0.5 - side/2) * resolution
//   forward = (side/2 - row - 0.5) * resolution
// in the ego frame. A pixel takes a layer's colour iff its centre is inside
// one of the layer's polygons (even-odd rule); layers are drawn in the order
// drivable_area, crosswalk, sidewalk.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "pedcross/error.hpp"
#include "pedcross/image.hpp"
#include "pedcross/scene_model.hpp"

namespace pedcross {

struct RasterConfig {
  double extent = 30.0;     // metres per side
  double resolution = 0.1;  // metres per pixel
  std::map<LayerKind, Rgb> layer_colors = {
      {LayerKind::kDrivableArea, {128, 128, 128}},
      {LayerKind::kCrosswalk, {255, 255, 0}},
      {LayerKind::kSidewalk, {0, 128, 255}},
  };
  Rgb background = {0, 0, 0};

  // Pixels per side; throws ConfigError unless extent/resolution is a
  // positive integer.
  int side() const {
    if (!(extent > 0 && resolution > 0))
      throw ConfigError("raster extent and resolution must be positive");
    const double n = extent / resolution;
    const long r = std::lround(n);
    if (r < 1 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
      throw ConfigError("raster extent/resolution is not a positive integer");
    return static_cast<int>(r);
  }

  static RasterConfig WithSide(int side, double extent = 30.0) {
    RasterConfig c;
    c.extent = extent;
    c.resolution = extent / side;
    return c;
  }
};

struct MapRaster {
  int frame_index = 0;
  Image pixels;

  bool operator==(const MapRaster&) const = default;
};

inline constexpr std::array<LayerKind, 3> kLayerDrawOrder = {
    LayerKind::kDrivableArea, LayerKind::kCrosswalk, LayerKind::kSidewalk};

namespace detail {

// Even-odd scanline fill of one polygon given in continuous pixel coordinates
// (col, row) where pixel centres sit at half-integers.
inline void FillPolygon(Image& img, std::span<const Vec2> poly, Rgb color) {
  const std::size_t n = poly.size();
  if (n < 3) return;
  double ymin = poly[0].y, ymax = poly[0].y;
  for (const auto& p : poly) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int r0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(ymax)));
  std::vector<double> xs;
  for (int r = r0; r <= r1; ++r) {
    const double yc = r + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      if ((a.y > yc) == (b.y > yc)) continue;
      xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Inside iff an odd number of crossings lie strictly right of the
      // centre, i.e. xs[k] <= xc < xs[k+1].
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int c1 = std::min(
          img.width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int c = c0; c <= c1; ++c) img.set(r, c, color);
    }
  }
}

}  // namespace detail

/// World (x, y) -> continuous pixel coordinates (col, row) for an ego pose.
inline Vec2 WorldToRaster(const Vec2& p, const EgoState& ego, int side,
                          double resolution) {
  const double c = std::cos(ego.heading), s = std::sin(ego.heading);
  const double dx = p.x - ego.position.x, dy = p.y - ego.position.y;
  const double forward = dx * c + dy * s;
  const double right = dx * s - dy * c;
  return {right / resolution + side / 2.0, side / 2.0 - forward / resolution};
}

inline MapRaster RasterizeFrame(std::span<const MapLayer> layers,
                                const EgoState& ego, const RasterConfig& config,
                                int frame_index = 0) {
  const int side = config.side();
  MapRaster out;
  out.frame_index = frame_index;
  out.pixels = Image(side, side, config.background);
  std::vector<Vec2> local;
  for (LayerKind kind : kLayerDrawOrder) {
    const auto color_it = config.layer_colors.find(kind);
    const Rgb color =
        color_it == config.layer_colors.end() ? config.background : color_it->second;
    for (const auto& layer : layers) {
      if (layer.kind != kind) continue;
      for (const auto& poly : layer.polygons) {
        local.clear();
        for (const auto& p : poly)
          local.push_back(WorldToRaster(p, ego, side, config.resolution));
        detail::FillPolygon(out.pixels, local, color);
      }
    }
  }
  return out;
}

/// One raster per observed ego state, each centred on that frame's pose.
inline std::vector<MapRaster> RasterizeObservation(
    std::span<const MapLayer> layers, std::span<const EgoState> ego_states,
    const RasterConfig& config, std::span<const int> frame_indices = {}) {
  if (ego_states.empty()) throw RangeError("no ego states to rasterize");
  std::vector<MapRaster> out;
  out.reserve(ego_states.size());
  for (std::size_t i = 0; i < ego_states.size(); ++i) {
    const int idx = i < frame_indices.size() ? frame_indices[i]
                                             : static_cast<int>(i);
    out.push_back(RasterizeFrame(layers, ego_states[i], config, idx));
  }
  return out;
}

}  // namespace pedcross
