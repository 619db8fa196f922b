// Copyright 2026 The tailknn Authors.
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
#include <fmt/format.h>

#include "tailknn/vindex.hpp"

namespace tailknn::vindex {

float l2_sqr(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(fmt::format("l2_sqr: dimension mismatch ({} vs {})", a.size(), b.size()));
  }
  float acc = 0.0f;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const float t = a[d] - b[d];
    acc += t * t;
  }
  return acc;
}

}  // namespace tailknn::vindex
