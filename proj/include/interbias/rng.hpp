// interbias/rng.hpp

// Copyright 2026  The InterBias Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INTERBIAS_RNG_HPP_
#define INTERBIAS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace interbias {

/// SplitMix64 (Steele, Lea & Flood, 2014). The whole state is one u64 and
/// every draw is pure integer arithmetic, so a given (seed, label) pair
/// produces the same stream on any platform. Labeled sub-streams keep the
/// corpus, noise and parameter-init draws independent of each other.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : seed_(seed), state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo
  /// bias.
  int next_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("next_int: lo > hi");
    uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  /// Standard normal via Marsaglia's polar method. Pairs are cached, so the
  /// draw sequence is a deterministic function of the stream state.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  /// Derives an independent stream from the construction seed and a label.
  /// Derivation ignores the current state, so stream("x") is the same no
  /// matter how many draws were made from this generator.
  SplitMix64 stream(std::string_view label) const {
    return SplitMix64(mix(seed_ ^ fnv1a(label)));
  }

  uint64_t seed() const { return seed_; }

 private:
  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace interbias

#endif  // INTERBIAS_RNG_HPP_
