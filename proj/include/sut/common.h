// Copyright 2026 The Shuffle Uniformity Testing Authors
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

#ifndef SUT_COMMON_H_
#define SUT_COMMON_H_

#include <span>
#include <utility>

#include "sut/probcore.h"

namespace sut {

enum class Verdict { kUniform, kNotUniform };

inline const char* VerdictName(Verdict v) {
  return v == Verdict::kUniform ? "uniform" : "not uniform";
}

// Fisher-Yates: a uniformly random permutation, drawn from `rng`.
template <typename T>
void ShuffleInPlace(std::span<T> items, RandomSource& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.UniformInt(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace sut

#endif  // SUT_COMMON_H_
