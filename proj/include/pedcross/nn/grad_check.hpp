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

// Central finite-difference check of tape gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/optim.hpp"
#include "pedcross/random.hpp"

namespace pedcross::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Entries checked per parameter; 0 checks every entry. Sampled entries
  // are drawn without replacement from Xorshift64(seed).
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
  // When x+-step lands on a different side of a ReLU or clamp than x, the
  // loss is not smooth over the stencil; the step is divided by 10 until it
  // is, down to min_step.
  double min_step = 1e-9;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
  std::size_t entries_refined = 0;  // needed a smaller step
  std::size_t entries_on_kink = 0;  // no smooth stencil down to min_step

  bool Passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// `loss_fn` must build a deterministic scalar loss on the given tape from
/// the parameters in `params` (fixed dropout masks or eval mode).
/// Error per entry: |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
inline GradCheckResult GradCheck(const std::function<Var(Tape&)>& loss_fn,
                                 std::span<Parameter* const> params,
                                 const GradCheckOptions& opt = {}) {
  ZeroGrad(params);
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.Backward(loss);
  }
  struct Eval {
    double loss;
    std::vector<bool> branches;
  };
  auto eval = [&]() {
    Tape tape;
    tape.RecordBranches(true);
    const double loss = loss_fn(tape).value()[0];
    return Eval{loss, tape.branches()};
  };
  GradCheckResult result;
  Xorshift64 rng(opt.seed);
  for (Parameter* p : params) {
    std::vector<std::size_t> idx(p->value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opt.max_entries_per_param && idx.size() > opt.max_entries_per_param) {
      Shuffle(idx, rng);
      idx.resize(opt.max_entries_per_param);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      const std::vector<bool> at = eval().branches;
      double step = opt.step, fd = 0.0;
      bool smooth = false;
      for (;;) {
        p->value[i] = saved + step;
        const Eval up = eval();
        p->value[i] = saved - step;
        const Eval down = eval();
        p->value[i] = saved;
        fd = (up.loss - down.loss) / (2.0 * step);
        smooth = up.branches == at && down.branches == at;
        if (smooth || step / 10.0 < opt.min_step) break;
        step /= 10.0;
      }
      if (step != opt.step) ++result.entries_refined;
      if (!smooth) ++result.entries_on_kink;
      const double ad = p->grad[i];
      const double err =
          std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace pedcross::nn
