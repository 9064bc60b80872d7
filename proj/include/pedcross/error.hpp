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

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pedcross {

// Base of every error raised by the library. `kind()` is a short stable tag
// used by the CLI for its one-line machine-parsable error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PEDCROSS_DEFINE_ERROR(Name, tag)                                 \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(tag, what) {}         \
  };

PEDCROSS_DEFINE_ERROR(LoadError, "load")
PEDCROSS_DEFINE_ERROR(RangeError, "range")
PEDCROSS_DEFINE_ERROR(ShapeError, "shape")
PEDCROSS_DEFINE_ERROR(ConfigError, "config")
PEDCROSS_DEFINE_ERROR(StateError, "state")
PEDCROSS_DEFINE_ERROR(LabelError, "label")
PEDCROSS_DEFINE_ERROR(SplitError, "split")
PEDCROSS_DEFINE_ERROR(WeightError, "weight")
PEDCROSS_DEFINE_ERROR(TrainingError, "training")
PEDCROSS_DEFINE_ERROR(IoError, "io")

#undef PEDCROSS_DEFINE_ERROR

// Validation collects every violation before throwing.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error("validation", Join(violations)),
        violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  static std::string Join(const std::vector<std::string>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) os << "; ";
      os << items[i];
    }
    return os.str();
  }

  std::vector<std::string> violations_;
};

}  // namespace pedcross
