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
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

namespace pedcross {

/// Seeded xorshift64* generator. Every random decision in the library
/// (weight init, dropout masks, shuffles, synthetic data) draws from this so
/// that outputs are reproducible across platforms and standard libraries.
///
/// Seeding: state = splitmix64(seed); a zero state is replaced by
/// 0x9E3779B97F4A7C15. Step: x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
/// output x * 0x2545F4914F6CDD1D.
class Xorshift64 {
 public:
  using result_type = std::uint64_t;

  explicit Xorshift64(std::uint64_t seed = 0) { Seed(seed); }

  void Seed(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    state_ = z ^ (z >> 31);
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1) with 53 bits.
  double Uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). Modulo reduction; bias is below 2^-40 for the
  // sizes used here.
  std::uint64_t Below(std::uint64_t n) { return (*this)() % n; }

  // Box-Muller, one value per call.
  double Gaussian(double mean = 0.0, double stddev = 1.0) {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * std::numbers::pi * u2);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::uint64_t state_ = 0;
};

// Fisher-Yates from the back, j = Below(i + 1).
template <typename T>
void Shuffle(std::vector<T>& items, Xorshift64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.Below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace pedcross
