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
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/rng.hpp"
#include "tailknn/vindex.hpp"
#include "kernels.hpp"

namespace tailknn::vindex {
namespace {

void check_shape(std::size_t dim, std::size_t m, std::size_t nbits) {
  if (m == 0 || dim == 0 || dim % m != 0) {
    throw std::invalid_argument(fmt::format("PQ: dimension {} is not divisible into {} subspaces", dim, m));
  }
  if (nbits < 1 || nbits > 8) throw std::invalid_argument(fmt::format("PQ: nbits {} outside [1, 8]", nbits));
}

}  // namespace

PqCodebook::PqCodebook(std::size_t dim, std::size_t m, std::size_t nbits, std::vector<float> centroids)
    : dim_(dim), m_(m), nbits_(nbits), centroids_(std::move(centroids)) {
  check_shape(dim, m, nbits);
  if (centroids_.size() != m_ * ksub() * dsub()) {
    throw std::invalid_argument(fmt::format("PQ: expected {} centroid floats, got {}", m_ * ksub() * dsub(),
                                            centroids_.size()));
  }
  const std::size_t ds = dsub();
  for (std::size_t sub = 0; sub < m_; ++sub) {
    const auto part = detail::to_blocks(std::span<const float>(centroids_).subspan(sub * ksub() * ds, ksub() * ds), ds);
    blocks_.insert(blocks_.end(), part.begin(), part.end());
  }
}

namespace {

std::size_t sub_block_floats(std::size_t ksub, std::size_t dsub) {
  return (ksub + detail::kBlock - 1) / detail::kBlock * detail::kBlock * dsub;
}

}  // namespace

PqCodebook PqCodebook::train(std::span<const float> vectors, std::size_t dim, std::size_t m, std::size_t nbits,
                             std::uint64_t seed, std::size_t iters) {
  check_shape(dim, m, nbits);
  const std::size_t n = vectors.size() / dim;
  const std::size_t ksub = std::size_t{1} << nbits;
  if (ksub > n) {
    throw std::invalid_argument(fmt::format("PQ: {} training vectors cannot fit 2^{} centroids", n, nbits));
  }
  const std::size_t dsub = dim / m;
  std::vector<float> centroids;
  centroids.reserve(m * ksub * dsub);
  std::vector<float> slice(n * dsub);
  for (std::size_t sub = 0; sub < m; ++sub) {
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(i * dim + sub * dsub), dsub,
                  slice.begin() + static_cast<std::ptrdiff_t>(i * dsub));
    }
    auto fit = kmeans(slice, dsub, ksub, iters, mix_seed(seed, sub));
    centroids.insert(centroids.end(), fit.centroids.begin(), fit.centroids.end());
  }
  return PqCodebook(dim, m, nbits, std::move(centroids));
}

std::span<const float> PqCodebook::centroid(std::size_t sub, std::size_t j) const {
  return std::span<const float>(centroids_).subspan((sub * ksub() + j) * dsub(), dsub());
}

void PqCodebook::encode(std::span<const float> v, std::span<std::uint8_t> code) const {
  if (v.size() != dim_ || code.size() != m_) throw std::invalid_argument("PQ encode: bad buffer sizes");
  const std::size_t ds = dsub();
  const std::size_t stride = sub_block_floats(ksub(), ds);
  for (std::size_t sub = 0; sub < m_; ++sub) {
    std::uint32_t best = 0;
    float best_d = 0.0f;
    detail::nearest_rows(v.data() + sub * ds, 1, blocks_.data() + sub * stride, ds, ksub(), &best, &best_d);
    code[sub] = static_cast<std::uint8_t>(best);
  }
}

std::vector<std::uint8_t> PqCodebook::encode(std::span<const float> v) const {
  std::vector<std::uint8_t> code(m_);
  encode(v, code);
  return code;
}

void PqCodebook::decode(std::span<const std::uint8_t> code, std::span<float> out) const {
  if (code.size() != m_ || out.size() != dim_) throw std::invalid_argument("PQ decode: bad buffer sizes");
  const std::size_t ds = dsub();
  for (std::size_t sub = 0; sub < m_; ++sub) {
    if (code[sub] >= ksub()) {
      throw std::out_of_range(fmt::format("PQ decode: code {} in subspace {} exceeds 2^{}", code[sub], sub, nbits_));
    }
    const auto c = centroid(sub, code[sub]);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(sub * ds));
  }
}

std::vector<float> PqCodebook::decode(std::span<const std::uint8_t> code) const {
  std::vector<float> out(dim_);
  decode(code, out);
  return out;
}

void PqCodebook::adc_table(std::span<const float> query, std::span<float> table) const {
  if (query.size() != dim_ || table.size() != m_ * ksub()) throw std::invalid_argument("adc_table: bad buffer sizes");
  const std::size_t ds = dsub();
  const std::size_t stride = sub_block_floats(ksub(), ds);
  for (std::size_t sub = 0; sub < m_; ++sub) {
    detail::all_l2(query.data() + sub * ds, blocks_.data() + sub * stride, ds, ksub(), table.data() + sub * ksub());
  }
}

}  // namespace tailknn::vindex
