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
#include <numeric>
#include <span>
#include <vector>

#include "pedcross/error.hpp"

namespace pedcross {

struct BinaryMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;

  bool operator==(const BinaryMetrics&) const = default;
};

/// Mann-Whitney form of ROC AUC: the probability that a random positive
/// outscores a random negative, ties counted half. Uses mid-ranks over the
/// sorted scores. Returns 0.5 when either class is absent.
inline double RankAuc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw RangeError("auc: score/label count mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        pos_rank_sum += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) /
         (np * static_cast<double>(n_neg));
}

// A score >= threshold predicts the positive class.
inline BinaryMetrics ComputeMetrics(std::span<const double> scores,
                                    std::span<const int> labels,
                                    double threshold = 0.5) {
  if (scores.empty()) throw RangeError("metrics need a non-empty test set");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    else if (pred) ++fp;
    else if (labels[i]) ++fn;
    else ++tn;
  }
  BinaryMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  m.auc = RankAuc(scores, labels);
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall =
      tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + recall > 0.0
             ? 2.0 * m.precision * recall / (m.precision + recall)
             : 0.0;
  return m;
}

}  // namespace pedcross
