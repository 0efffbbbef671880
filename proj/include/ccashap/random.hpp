/*
 * Copyright 2026 The ccashap Authors.
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

#ifndef CCASHAP_RANDOM_HPP_
#define CCASHAP_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace ccashap {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t MixSeed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t HashName(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed of the named sub-stream `stream`, item `index`, of a root seed.
constexpr std::uint64_t DeriveSeed(std::uint64_t root, std::string_view stream,
                                   std::uint64_t index = 0) {
  return MixSeed(MixSeed(root ^ HashName(stream)) + index);
}

inline Rng MakeRng(std::uint64_t root, std::string_view stream,
                   std::uint64_t index = 0) {
  return Rng(DeriveSeed(root, stream, index));
}

// Uniform integer in [0, bound). Multiply-shift, independent of the standard
// library's distribution implementation.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

// Uniform double in [0, 1) with 53 random bits.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename It>
void Shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(
        UniformIndex(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(first[i], first[j]);
  }
}

}  // namespace ccashap

#endif  // CCASHAP_RANDOM_HPP_
