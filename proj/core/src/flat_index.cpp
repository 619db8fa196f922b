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
#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/vindex.hpp"
#include "kernels.hpp"
#include "topk.hpp"

namespace tailknn::vindex {
namespace {

using detail::block_l2;
using detail::block_l2_x4;

constexpr std::size_t kB = FlatIndex::kBlock;
static_assert(kB == detail::kBlock);
constexpr std::size_t kQueryTile = 32;
constexpr std::size_t kChunkBlocks = 256;
constexpr std::size_t kGroup = 4;  // queries per block_l2_x4 call

}  // namespace

FlatIndex::FlatIndex(std::size_t dim, std::vector<float> keys, std::vector<TokenId> values)
    : dim_(dim), keys_(std::move(keys)), values_(std::move(values)) {
  if (dim_ == 0) throw std::invalid_argument("FlatIndex: dim must be >= 1");
  if (keys_.size() % dim_ != 0) {
    throw std::invalid_argument(fmt::format("FlatIndex: {} floats is not a multiple of dim {}", keys_.size(), dim_));
  }
  size_ = keys_.size() / dim_;
  if (!values_.empty() && values_.size() != size_) {
    throw std::invalid_argument(fmt::format("FlatIndex: {} values for {} keys", values_.size(), size_));
  }
  blocks_ = detail::to_blocks(keys_, dim_);
}

std::span<const float> FlatIndex::key(std::uint32_t id) const {
  if (id >= size_) throw std::out_of_range(fmt::format("FlatIndex: id {} >= size {}", id, size_));
  return std::span<const float>(keys_).subspan(std::size_t{id} * dim_, dim_);
}

NeighborSet FlatIndex::search(std::span<const float> query, std::size_t k) const {
  return std::move(search_batch(query, k).front());
}

std::vector<NeighborSet> FlatIndex::search_batch(std::span<const float> queries, std::size_t k,
                                                 std::span<const std::uint32_t> exclude) const {
  if (k == 0) throw std::invalid_argument("FlatIndex::search: k must be >= 1");
  if (queries.size() % dim_ != 0) {
    throw std::invalid_argument(fmt::format("FlatIndex::search: query length {} is not a multiple of dim {}",
                                            queries.size(), dim_));
  }
  const std::size_t nq = queries.size() / dim_;
  if (!exclude.empty() && exclude.size() != nq) {
    throw std::invalid_argument("FlatIndex::search_batch: exclude must have one id per query");
  }
  const std::size_t nblocks = (size_ + kB - 1) / kB;
  const std::size_t kk = std::min(k, size_ - (exclude.empty() ? 0 : std::min<std::size_t>(size_, 1)));
  auto value_of = [this](std::uint32_t id) { return values_.empty() ? TokenId{0} : values_[id]; };

  std::vector<NeighborSet> results(nq);
  if (kk == 0) return results;
  float dist[kGroup][kB];
  for (std::size_t q0 = 0; q0 < nq; q0 += kQueryTile) {
    const std::size_t q1 = std::min(nq, q0 + kQueryTile);
    std::vector<detail::TopK> heaps(q1 - q0, detail::TopK(kk));
    for (std::size_t b0 = 0; b0 < nblocks; b0 += kChunkBlocks) {
      const std::size_t b1 = std::min(nblocks, b0 + kChunkBlocks);
      for (std::size_t q = q0; q < q1;) {
        const std::size_t group = q1 - q >= kGroup ? kGroup : 1;
        const float* qv[kGroup];
        for (std::size_t g = 0; g < group; ++g) qv[g] = queries.data() + (q + g) * dim_;
        for (std::size_t b = b0; b < b1; ++b) {
          const float* block = blocks_.data() + b * dim_ * kB;
          if (group == kGroup) {
            block_l2_x4(qv, block, dim_, dist);
          } else {
            block_l2(qv[0], block, dim_, dist[0]);
          }
          const std::size_t base = b * kB;
          const std::size_t lanes = std::min(kB, size_ - base);
          for (std::size_t g = 0; g < group; ++g) {
            auto& heap = heaps[q + g - q0];
            const std::uint32_t skip = exclude.empty() ? UINT32_MAX : exclude[q + g];
            const float bound = heap.bound();
            if (heap.full() && *std::min_element(dist[g], dist[g] + lanes) >= bound) continue;
            for (std::size_t j = 0; j < lanes; ++j) {
              // Ids arrive in increasing order, so a tie with the bound loses.
              if (dist[g][j] >= bound && heap.full()) continue;
              const auto id = static_cast<std::uint32_t>(base + j);
              if (id == skip) continue;
              heap.push(dist[g][j], id);
            }
          }
        }
        q += group;
      }
    }
    for (std::size_t q = q0; q < q1; ++q) results[q] = heaps[q - q0].sorted(value_of);
  }
  return results;
}

}  // namespace tailknn::vindex
