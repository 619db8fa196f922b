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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tailknn/common.hpp"

namespace tailknn::vindex {

struct Neighbor {
  std::uint32_t id = 0;
  float distance = 0.0f;  // squared L2 (exact or ADC, depending on the index)
  TokenId value = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ascending by distance, ties by lower id.
using NeighborSet = std::vector<Neighbor>;

/// Squared L2 with a fixed left-to-right float accumulation. Every exact
/// distance in the library reproduces this value bit for bit.
float l2_sqr(std::span<const float> a, std::span<const float> b);

/// Exact squared-L2 search over an immutable key matrix.
///
/// Keys are kept twice: row-major for addressing and in blocks of 16
/// transposed rows so that one query is compared against 16 keys per SIMD
/// step. Each lane still accumulates its own key in dimension order, so
/// distances equal l2_sqr exactly.
class FlatIndex {
 public:
  static constexpr std::size_t kBlock = 16;

  FlatIndex() = default;
  /// `values` may be empty, in which case neighbors report value 0.
  FlatIndex(std::size_t dim, std::vector<float> keys, std::vector<TokenId> values = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return size_; }
  std::span<const float> key(std::uint32_t id) const;
  std::span<const float> keys() const { return keys_; }
  std::span<const TokenId> values() const { return values_; }

  /// The min(k, size()) nearest keys; k must be >= 1.
  NeighborSet search(std::span<const float> query, std::size_t k) const;

  /// Row-major batch of queries. When `exclude` is non-empty, query i skips
  /// key id exclude[i] (nearest-other search).
  std::vector<NeighborSet> search_batch(std::span<const float> queries, std::size_t k,
                                        std::span<const std::uint32_t> exclude = {}) const;

 private:
  std::size_t dim_ = 0;
  std::size_t size_ = 0;
  std::vector<float> keys_;
  std::vector<float> blocks_;
  std::vector<TokenId> values_;
};

struct KMeansResult {
  std::vector<float> centroids;          // c x dim
  std::vector<std::uint32_t> assignment;  // nearest centroid per input vector
  std::vector<double> distortion;         // sum of squared distances, per Lloyd step
};

/// Lloyd's algorithm with k-means++ seeding. An empty cluster is re-seeded at
/// the point currently farthest from its own centroid. Stops after `iters`
/// update steps or when the relative distortion improvement drops below
/// 1e-6; the recorded distortion never increases. Throws
/// std::invalid_argument when c is 0 or exceeds the number of vectors.
KMeansResult kmeans(std::span<const float> vectors, std::size_t dim, std::size_t c, std::size_t iters,
                    std::uint64_t seed);

/// Per-subspace codebooks: M subspaces of dim/M coordinates, 2^nbits
/// centroids each.
class PqCodebook {
 public:
  PqCodebook() = default;
  PqCodebook(std::size_t dim, std::size_t m, std::size_t nbits, std::vector<float> centroids);

  /// Independent k-means in every subspace. Requires dim % m == 0,
  /// 1 <= nbits <= 8 and 2^nbits <= number of vectors.
  static PqCodebook train(std::span<const float> vectors, std::size_t dim, std::size_t m, std::size_t nbits,
                          std::uint64_t seed, std::size_t iters = 25);

  std::size_t dim() const { return dim_; }
  std::size_t m() const { return m_; }
  std::size_t nbits() const { return nbits_; }
  std::size_t ksub() const { return std::size_t{1} << nbits_; }
  std::size_t dsub() const { return dim_ / m_; }
  std::span<const float> centroids() const { return centroids_; }
  std::span<const float> centroid(std::size_t sub, std::size_t j) const;

  /// Nearest centroid per subspace, ties to the lower index.
  void encode(std::span<const float> v, std::span<std::uint8_t> code) const;
  std::vector<std::uint8_t> encode(std::span<const float> v) const;
  /// Throws std::out_of_range for an index >= 2^nbits.
  void decode(std::span<const std::uint8_t> code, std::span<float> out) const;
  std::vector<float> decode(std::span<const std::uint8_t> code) const;

  /// table[sub * ksub + j] = squared distance from the query's sub-vector to
  /// centroid j of that subspace.
  void adc_table(std::span<const float> query, std::span<float> table) const;

 private:
  std::size_t dim_ = 0;
  std::size_t m_ = 0;
  std::size_t nbits_ = 0;
  std::vector<float> centroids_;  // m x ksub x dsub
  std::vector<float> blocks_;     // per subspace, centroids in 16-row transposed blocks
};

struct IvfPqConfig {
  std::uint32_t centroids = 256;
  std::uint32_t code_size = 8;  // PQ subspaces, one byte each
  std::uint32_t nbits = 8;
  std::uint64_t train_sample = 0;  // 0 = train on every key
  std::uint32_t kmeans_iters = 25;
  std::uint64_t seed = 0;
};

struct InvertedList {
  std::vector<std::uint32_t> ids;
  std::vector<std::uint8_t> codes;  // ids.size() x code_size
  std::vector<TokenId> values;
};

/// Inverted file over a flat coarse quantizer with product-quantized
/// residuals (key minus its coarse centroid). Search probes the nprobe
/// closest lists and ranks candidates by asymmetric distance: the query
/// residual stays exact and is compared against decoded codes through a
/// per-list lookup table.
class IvfPqIndex {
 public:
  IvfPqIndex() = default;

  static IvfPqIndex build(std::span<const float> keys, std::size_t dim, std::span<const TokenId> values,
                          const IvfPqConfig& config);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return locations_.size(); }
  std::size_t nlist() const { return lists_.size(); }
  const PqCodebook& codebook() const { return pq_; }
  std::span<const float> coarse_centroid(std::size_t list) const;
  const InvertedList& list(std::size_t i) const { return lists_.at(i); }
  /// (list, offset) of a stored id.
  std::pair<std::uint32_t, std::uint32_t> locate(std::uint32_t id) const;

  NeighborSet search(std::span<const float> query, std::size_t k, std::size_t nprobe) const;

  /// Coarse centroid + decoded residual.
  std::vector<float> reconstruct(std::uint32_t id) const;
  /// Euclidean distance between `original` and reconstruct(id).
  double reconstruction_error(std::uint32_t id, std::span<const float> original) const;

  /// Magic "TLIVFPQ1"; header u32 D, u32 C, u32 M, u32 nbits, u64 N; then
  /// C x D coarse centroids, M x 2^nbits x D/M codebook, and per list a u64
  /// length followed by (u32 id, M code bytes, u32 value) entries.
  void save(const std::string& path) const;
  static IvfPqIndex load(const std::string& path);

 private:
  void index_locations();

  std::size_t dim_ = 0;
  std::vector<float> coarse_;
  FlatIndex coarse_index_;
  PqCodebook pq_;
  std::vector<InvertedList> lists_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> locations_;
};

}  // namespace tailknn::vindex
