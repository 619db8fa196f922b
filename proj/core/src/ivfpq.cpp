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
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/rng.hpp"
#include "tailknn/vindex.hpp"
#include "topk.hpp"

namespace tailknn::vindex {

IvfPqIndex IvfPqIndex::build(std::span<const float> keys, std::size_t dim, std::span<const TokenId> values,
                             const IvfPqConfig& config) {
  if (dim == 0 || keys.size() % dim != 0) throw std::invalid_argument("IvfPqIndex: bad key buffer");
  const std::size_t n = keys.size() / dim;
  if (values.size() != n) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: {} values for {} keys", values.size(), n));
  }
  if (n > UINT32_MAX) throw std::invalid_argument("IvfPqIndex: more than 2^32 keys");
  if (config.centroids == 0 || config.centroids > n) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: {} coarse centroids for {} keys", config.centroids, n));
  }
  if (config.code_size == 0 || dim % config.code_size != 0) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: dimension {} not divisible by code size {}", dim,
                                            config.code_size));
  }
  if (config.nbits < 1 || config.nbits > 8) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: nbits {} outside [1, 8]", config.nbits));
  }

  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), std::size_t{0});
  if (config.train_sample != 0 && config.train_sample < n) {
    Rng rng(mix_seed(config.seed, 1));
    for (std::size_t i = 0; i < config.train_sample; ++i) {
      std::swap(sample[i], sample[i + static_cast<std::size_t>(rng.below(n - i))]);
    }
    sample.resize(config.train_sample);
    std::sort(sample.begin(), sample.end());
  }
  if (config.centroids > sample.size()) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: {} coarse centroids for a training sample of {}",
                                            config.centroids, sample.size()));
  }
  if ((std::size_t{1} << config.nbits) > sample.size()) {
    throw std::invalid_argument(fmt::format("IvfPqIndex: training sample of {} cannot fit 2^{} PQ centroids",
                                            sample.size(), config.nbits));
  }
  std::vector<float> train(sample.size() * dim);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    std::copy_n(keys.begin() + static_cast<std::ptrdiff_t>(sample[i] * dim), dim,
                train.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }

  IvfPqIndex index;
  index.dim_ = dim;
  index.coarse_ = kmeans(train, dim, config.centroids, config.kmeans_iters, mix_seed(config.seed, 2)).centroids;
  index.coarse_index_ = FlatIndex(dim, index.coarse_);

  std::vector<std::uint32_t> label(n);
  constexpr std::size_t kBatch = 4096;
  for (std::size_t i0 = 0; i0 < n; i0 += kBatch) {
    const std::size_t i1 = std::min(n, i0 + kBatch);
    const auto res = index.coarse_index_.search_batch(keys.subspan(i0 * dim, (i1 - i0) * dim), 1);
    for (std::size_t i = i0; i < i1; ++i) label[i] = res[i - i0].front().id;
  }

  auto residual_into = [&](std::size_t id, std::span<float> out) {
    const auto c = index.coarse_centroid(label[id]);
    for (std::size_t d = 0; d < dim; ++d) out[d] = keys[id * dim + d] - c[d];
  };
  for (std::size_t i = 0; i < sample.size(); ++i) {
    residual_into(sample[i], std::span<float>(train).subspan(i * dim, dim));
  }
  index.pq_ = PqCodebook::train(train, dim, config.code_size, config.nbits, mix_seed(config.seed, 3),
                                config.kmeans_iters);

  index.lists_.resize(config.centroids);
  std::vector<float> residual(dim);
  std::vector<std::uint8_t> code(config.code_size);
  for (std::size_t id = 0; id < n; ++id) {
    residual_into(id, residual);
    index.pq_.encode(residual, code);
    auto& list = index.lists_[label[id]];
    list.ids.push_back(static_cast<std::uint32_t>(id));
    list.codes.insert(list.codes.end(), code.begin(), code.end());
    list.values.push_back(values[id]);
  }
  index.index_locations();
  return index;
}

void IvfPqIndex::index_locations() {
  std::size_t n = 0;
  for (const auto& l : lists_) n += l.ids.size();
  constexpr std::pair<std::uint32_t, std::uint32_t> kMissing{UINT32_MAX, UINT32_MAX};
  locations_.assign(n, kMissing);
  for (std::size_t li = 0; li < lists_.size(); ++li) {
    const auto& ids = lists_[li].ids;
    for (std::size_t off = 0; off < ids.size(); ++off) {
      if (ids[off] >= n || locations_[ids[off]] != kMissing) {
        throw DataError(fmt::format("IVFPQ: id {} in list {} is out of range or stored twice", ids[off], li));
      }
      locations_[ids[off]] = {static_cast<std::uint32_t>(li), static_cast<std::uint32_t>(off)};
    }
  }
}

std::span<const float> IvfPqIndex::coarse_centroid(std::size_t list) const {
  return std::span<const float>(coarse_).subspan(list * dim_, dim_);
}

std::pair<std::uint32_t, std::uint32_t> IvfPqIndex::locate(std::uint32_t id) const {
  if (id >= locations_.size()) {
    throw std::out_of_range(fmt::format("IVFPQ: id {} >= index size {}", id, locations_.size()));
  }
  return locations_[id];
}

NeighborSet IvfPqIndex::search(std::span<const float> query, std::size_t k, std::size_t nprobe) const {
  if (query.size() != dim_) {
    throw std::invalid_argument(fmt::format("IVFPQ search: query dim {} != {}", query.size(), dim_));
  }
  if (k == 0) throw std::invalid_argument("IVFPQ search: k must be >= 1");
  if (nprobe < 1 || nprobe > lists_.size()) {
    throw std::invalid_argument(fmt::format("IVFPQ search: nprobe {} outside [1, {}]", nprobe, lists_.size()));
  }
  const auto probes = coarse_index_.search(query, nprobe);
  std::size_t candidates = 0;
  for (const auto& p : probes) candidates += lists_[p.id].ids.size();
  if (candidates == 0) return {};

  const std::size_t m = pq_.m();
  const std::size_t ksub = pq_.ksub();
  detail::TopK heap(std::min(k, candidates));
  std::vector<float> residual(dim_);
  std::vector<float> table(m * ksub);
  for (const auto& p : probes) {
    const auto& list = lists_[p.id];
    if (list.ids.empty()) continue;
    const auto c = coarse_centroid(p.id);
    for (std::size_t d = 0; d < dim_; ++d) residual[d] = query[d] - c[d];
    pq_.adc_table(residual, table);
    const std::uint8_t* code = list.codes.data();
    for (std::size_t e = 0; e < list.ids.size(); ++e, code += m) {
      float dist = 0.0f;
      for (std::size_t sub = 0; sub < m; ++sub) dist += table[sub * ksub + code[sub]];
      heap.push(dist, list.ids[e]);
    }
  }
  return heap.sorted([this](std::uint32_t id) {
    const auto [li, off] = locations_[id];
    return lists_[li].values[off];
  });
}

std::vector<float> IvfPqIndex::reconstruct(std::uint32_t id) const {
  const auto [li, off] = locate(id);
  const std::size_t m = pq_.m();
  std::vector<float> out =
      pq_.decode(std::span<const std::uint8_t>(lists_[li].codes).subspan(std::size_t{off} * m, m));
  const auto c = coarse_centroid(li);
  for (std::size_t d = 0; d < dim_; ++d) out[d] += c[d];
  return out;
}

double IvfPqIndex::reconstruction_error(std::uint32_t id, std::span<const float> original) const {
  if (original.size() != dim_) {
    throw std::invalid_argument(fmt::format("reconstruction_error: key dim {} != {}", original.size(), dim_));
  }
  const auto approx = reconstruct(id);
  double acc = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double t = static_cast<double>(original[d]) - approx[d];
    acc += t * t;
  }
  return std::sqrt(acc);
}

}  // namespace tailknn::vindex
