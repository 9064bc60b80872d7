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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pedcross/error.hpp"

namespace pedcross {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill[0];
      pixels[i + 1] = fill[1];
      pixels[i + 2] = fill[2];
    }
  }

  bool operator==(const Image&) const = default;

  std::uint8_t* at(int row, int col) {
    return &pixels[(static_cast<std::size_t>(row) * width + col) * 3];
  }
  const std::uint8_t* at(int row, int col) const {
    return &pixels[(static_cast<std::size_t>(row) * width + col) * 3];
  }
  void set(int row, int col, Rgb c) {
    std::uint8_t* p = at(row, col);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
};

inline void WritePpm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("short write to " + path.string());
}

namespace detail {
inline void SkipPpmSpace(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
    } else {
      return;
    }
  }
}
}  // namespace detail

inline Image ReadPpm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw LoadError(path.string() + ": not a binary P6 PPM");
  int w = 0, h = 0, maxval = 0;
  detail::SkipPpmSpace(in);
  in >> w;
  detail::SkipPpmSpace(in);
  in >> h;
  detail::SkipPpmSpace(in);
  in >> maxval;
  in.get();
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw LoadError(path.string() + ": bad PPM header");
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw LoadError(path.string() + ": truncated PPM data");
  return img;
}

// Bilinear resampling with pixel-centre alignment.
inline Image Resize(const Image& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  Image dst(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int r = 0; r < height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx =
          std::clamp((c + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - wy) * ((1 - wx) * src.at(y0, x0)[ch] +
                                     wx * src.at(y0, x1)[ch]) +
                         wy * ((1 - wx) * src.at(y1, x0)[ch] +
                               wx * src.at(y1, x1)[ch]);
        dst.at(r, c)[ch] = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return dst;
}

}  // namespace pedcross
