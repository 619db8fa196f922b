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
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "tailknn/vindex.hpp"

namespace tailknn::vindex::detail {

// Bounded max-heap keeping the k smallest (distance, id) pairs under
// lexicographic order, so equal distances resolve to the lower id.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  bool full() const { return heap_.size() == k_; }
  float bound() const { return full() ? heap_.front().first : std::numeric_limits<float>::infinity(); }

  void push(float distance, std::uint32_t id) {
    const Entry e{distance, id};
    if (heap_.size() < k_) {
      heap_.push_back(e);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (e < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = e;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  template <typename ValueOf>
  NeighborSet sorted(ValueOf value_of) const {
    std::vector<Entry> entries = heap_;
    std::sort(entries.begin(), entries.end());
    NeighborSet out;
    out.reserve(entries.size());
    for (const auto& [d, id] : entries) out.push_back({id, d, value_of(id)});
    return out;
  }

 private:
  using Entry = std::pair<float, std::uint32_t>;
  std::size_t k_;
  std::vector<Entry> heap_;
};

}  // namespace tailknn::vindex::detail
