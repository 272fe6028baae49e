/*
 * Copyright 2026 The ordiag Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Portable seeded randomness.
//
// Every seeded draw in ordiag goes through SplitMix64 (Steele, Lea & Flood,
// 2014) with the constants below, and every derived quantity (bounded
// integers, unit reals, shuffles) is defined here rather than through
// <random> distributions, whose outputs differ between standard libraries.
// Reimplementing these few functions in another language reproduces the
// samples bit for bit:
//
//   next():      state += 0x9E3779B97F4A7C15; z = state;
//                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                return z ^ (z >> 31);
//   uniform01(): (next() >> 11) * 2^-53
//   below(n):    rejection sampling on next() with limit = 2^64 - (2^64 mod n)
//   shuffle:     Fisher-Yates from the back, j = below(i + 1)
//   substream:   SplitMix64(mix(seed, salt)) where mix is one next() step of
//                a generator seeded with seed ^ (salt * 0x9E3779B97F4A7C15)

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace ordiag {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // 2^64 mod n; zero when n divides 2^64 and every draw is acceptable.
    const std::uint64_t rem = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next();
      if (rem == 0 || x < 0 - rem) return x % n;
    }
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  SplitMix64 g(seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  return g.next();
}

// FNV-1a, used to turn identifiers into substream salts.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline SplitMix64 substream(std::uint64_t seed, std::uint64_t salt) {
  return SplitMix64(mix_seed(seed, salt));
}

inline SplitMix64 substream(std::uint64_t seed, std::string_view salt) {
  return SplitMix64(mix_seed(seed, fnv1a64(salt)));
}

}  // namespace ordiag
