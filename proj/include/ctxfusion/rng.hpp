// Copyright 2026 The ctxfusion Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CTXFUSION_RNG_HPP
#define CTXFUSION_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ctxfusion {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a master seed and a path of stream identifiers into one seed, so that
/// e.g. (seed, scene 12, branch 3) always maps to the same generator no matter
/// what else was drawn before.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(master);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

// Stream tags, so that scene generation and branch simulation never share a
// stream even when their numeric ids coincide.
namespace stream {
inline constexpr std::uint64_t kScene = 0x5343454e45ULL;
inline constexpr std::uint64_t kBranch = 0x4252414e4348ULL;
inline constexpr std::uint64_t kStem = 0x5354454dULL;
inline constexpr std::uint64_t kGate = 0x47415445ULL;
inline constexpr std::uint64_t kTrial = 0x545249414cULL;
}  // namespace stream

}  // namespace ctxfusion

#endif  // CTXFUSION_RNG_HPP
