// Copyright 2026 The pab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PAB_RANDOM_H_
#define PAB_RANDOM_H_

#include <cstdint>
#include <random>

namespace pab {

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t MixSeed(std::uint64_t x);

// Seed for child stream `stream` of `parent`. Replication r of a scenario
// uses DeriveSeed(master, r); agent n within it uses DeriveSeed(that, n + 1);
// the environment uses DeriveSeed(that, 0).
std::uint64_t DeriveSeed(std::uint64_t parent, std::uint64_t stream);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
inline double ToUnitInterval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextBits() { return engine_(); }
  double Uniform() { return ToUnitInterval(engine_()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pab

#endif  // PAB_RANDOM_H_
