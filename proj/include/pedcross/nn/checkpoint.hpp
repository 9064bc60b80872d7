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

// Checkpoint file: one line of compact UTF-8 JSON (the header), a '\n', then
// every parameter value as little-endian IEEE-754 fp64, parameters in header
// order, each row-major.
//
// Header: {"format": "pedcross-checkpoint", "version": 1,
//          "layers": [LayerSpec...], "parameters": [{"name", "shape"}...],
//          "value_count": N, "extra": {...}}

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedcross/error.hpp"
#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/layers.hpp"

namespace pedcross::nn {

namespace detail {
inline std::uint64_t ToLittleEndian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return r;
  }
  return v;
}
}  // namespace detail

inline void SaveCheckpoint(const std::filesystem::path& path,
                           std::span<const LayerSpec> layers,
                           std::span<Parameter* const> params,
                           const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json header;
  header["format"] = "pedcross-checkpoint";
  header["version"] = 1;
  header["layers"] = nlohmann::json::array();
  for (const auto& l : layers) header["layers"].push_back(ToJson(l));
  header["parameters"] = nlohmann::json::array();
  std::size_t count = 0;
  for (const Parameter* p : params) {
    header["parameters"].push_back({{"name", p->name}, {"shape", p->value.shape()}});
    count += p->value.size();
  }
  header["value_count"] = count;
  header["extra"] = extra;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << header.dump() << '\n';
  for (const Parameter* p : params)
    for (double v : p->value.values()) {
      std::uint64_t bits = detail::ToLittleEndian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  if (!out) throw IoError("short write to " + path.string());
}

inline nlohmann::json ReadCheckpointHeader(std::istream& in,
                                           const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw LoadError(name + ": empty checkpoint");
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", "") != "pedcross-checkpoint")
      throw LoadError(name + ": not a pedcross checkpoint");
    return header;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(name + ": bad checkpoint header: " + e.what());
  }
}

/// Restores values into `params`; names and shapes must match the header.
inline nlohmann::json LoadCheckpoint(const std::filesystem::path& path,
                                     std::span<Parameter* const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing file " + path.string());
  nlohmann::json header = ReadCheckpointHeader(in, path.string());
  const auto& entries = header.at("parameters");
  if (entries.size() != params.size())
    throw LoadError(path.string() + ": checkpoint has " +
                    std::to_string(entries.size()) + " parameters, model has " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != params[i]->name ||
        e.at("shape").get<Shape>() != params[i]->value.shape())
      throw LoadError(path.string() + ": parameter " + std::to_string(i) +
                      " mismatch (" + e.at("name").get<std::string>() + ")");
  }
  for (Parameter* p : params)
    for (double& v : p->value.values()) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      if (!in) throw LoadError(path.string() + ": truncated parameter data");
      v = std::bit_cast<double>(detail::ToLittleEndian(bits));
    }
  return header;
}

}  // namespace pedcross::nn
