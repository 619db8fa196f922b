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
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

namespace tailknn::vindex::detail {

// Vectors are stored in blocks of kBlock transposed rows: element d of row j
// of a block sits at block[d * kBlock + j]. Each lane of a kernel below
// accumulates its own row in dimension order with separate subtract,
// multiply and add steps, which is exactly the l2_sqr sequence, so every
// distance matches l2_sqr bit for bit.
inline constexpr std::size_t kBlock = 16;

typedef float Lanes __attribute__((vector_size(kBlock * sizeof(float))));

inline Lanes load_lanes(const float* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

/// Row-major n x dim -> ceil(n / kBlock) transposed blocks, zero padded.
inline std::vector<float> to_blocks(std::span<const float> rows, std::size_t dim) {
  const std::size_t n = rows.size() / dim;
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<float> blocks(nblocks * dim * kBlock, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    float* block = blocks.data() + (i / kBlock) * dim * kBlock;
    for (std::size_t d = 0; d < dim; ++d) block[d * kBlock + i % kBlock] = rows[i * dim + d];
  }
  return blocks;
}

inline void block_l2(const float* query, const float* block, std::size_t dim, float* out) {
  Lanes acc = {};
  for (std::size_t d = 0; d < dim; ++d) {
    const Lanes t = query[d] - load_lanes(block + d * kBlock);
    acc += t * t;
  }
  std::memcpy(out, &acc, sizeof(acc));
}

// Four queries against one block: independent accumulators keep the FP
// pipeline busy while sharing each row load.
inline void block_l2_x4(const float* const* q, const float* block, std::size_t dim, float (*out)[kBlock]) {
  Lanes a0 = {}, a1 = {}, a2 = {}, a3 = {};
  for (std::size_t d = 0; d < dim; ++d) {
    const Lanes row = load_lanes(block + d * kBlock);
    const Lanes t0 = q[0][d] - row;
    const Lanes t1 = q[1][d] - row;
    const Lanes t2 = q[2][d] - row;
    const Lanes t3 = q[3][d] - row;
    a0 += t0 * t0;
    a1 += t1 * t1;
    a2 += t2 * t2;
    a3 += t3 * t3;
  }
  std::memcpy(out[0], &a0, sizeof(Lanes));
  std::memcpy(out[1], &a1, sizeof(Lanes));
  std::memcpy(out[2], &a2, sizeof(Lanes));
  std::memcpy(out[3], &a3, sizeof(Lanes));
}

/// Distances from `query` to all n rows held in `blocks`.
inline void all_l2(const float* query, const float* blocks, std::size_t dim, std::size_t n, float* out) {
  float tmp[kBlock];
  for (std::size_t b = 0; b * kBlock < n; ++b) {
    block_l2(query, blocks + b * dim * kBlock, dim, tmp);
    const std::size_t lanes = std::min(kBlock, n - b * kBlock);
    std::memcpy(out + b * kBlock, tmp, lanes * sizeof(float));
  }
}

/// Nearest of n blocked rows for each of nq row-major queries; ties go to the
/// lower row index.
inline void nearest_rows(const float* queries, std::size_t nq, const float* blocks, std::size_t dim,
                         std::size_t n, std::uint32_t* label, float* distance) {
  float dist[4][kBlock];
  std::size_t q = 0;
  auto scan = [&](std::size_t g, std::size_t base) {
    const std::size_t lanes = std::min(kBlock, n - base);
    float low = dist[g][0];
    for (std::size_t j = 1; j < lanes; ++j) low = std::min(low, dist[g][j]);
    // Later rows only win on a strictly smaller distance.
    if (low >= distance[q + g]) return;
    for (std::size_t j = 0; j < lanes; ++j) {
      if (dist[g][j] < distance[q + g]) {
        distance[q + g] = dist[g][j];
        label[q + g] = static_cast<std::uint32_t>(base + j);
      }
    }
  };
  for (; q < nq; ) {
    const std::size_t group = nq - q >= 4 ? 4 : 1;
    const float* qv[4];
    for (std::size_t g = 0; g < group; ++g) {
      qv[g] = queries + (q + g) * dim;
      distance[q + g] = std::numeric_limits<float>::infinity();
      label[q + g] = 0;
    }
    for (std::size_t b = 0; b * kBlock < n; ++b) {
      const float* block = blocks + b * dim * kBlock;
      if (group == 4) {
        block_l2_x4(qv, block, dim, dist);
      } else {
        block_l2(qv[0], block, dim, dist[0]);
      }
      for (std::size_t g = 0; g < group; ++g) scan(g, b * kBlock);
    }
    q += group;
  }
}

}  // namespace tailknn::vindex::detail
