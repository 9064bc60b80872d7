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

#include <cmath>
#include <span>

#include "pedcross/nn/autodiff.hpp"

namespace pedcross::nn {

struct RmsPropOptions {
  double learning_rate = 5e-5;
  double rho = 0.9;
  double epsilon = 1e-7;
};

// cache <- rho * cache + (1 - rho) * g^2
// theta <- theta - lr * g / (sqrt(cache) + eps)
inline void RmsPropStep(std::span<Parameter* const> params,
                        const RmsPropOptions& opt) {
  for (Parameter* p : params) {
    double* theta = p->value.data();
    double* cache = p->cache.data();
    const double* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      cache[i] = opt.rho * cache[i] + (1.0 - opt.rho) * g[i] * g[i];
      theta[i] -= opt.learning_rate * g[i] / (std::sqrt(cache[i]) + opt.epsilon);
    }
  }
}

inline void ZeroGrad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->ZeroGrad();
}

}  // namespace pedcross::nn
