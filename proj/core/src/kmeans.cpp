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
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/rng.hpp"
#include "tailknn/vindex.hpp"
#include "kernels.hpp"

namespace tailknn::vindex {
namespace {

struct Assignment {
  std::vector<std::uint32_t> label;
  std::vector<float> distance;
  double distortion = 0.0;
};

Assignment assign(std::span<const float> vectors, std::size_t dim, const std::vector<float>& centroids) {
  const auto blocks = detail::to_blocks(centroids, dim);
  Assignment a;
  const std::size_t n = vectors.size() / dim;
  a.label.resize(n);
  a.distance.resize(n);
  detail::nearest_rows(vectors.data(), n, blocks.data(), dim, centroids.size() / dim, a.label.data(),
                       a.distance.data());
  for (float d : a.distance) a.distortion += d;
  return a;
}

std::vector<float> plus_plus_seed(std::span<const float> vectors, std::size_t dim, std::size_t c, Rng& rng) {
  const std::size_t n = vectors.size() / dim;
  auto row = [&](std::size_t i) { return vectors.subspan(i * dim, dim); };
  const auto blocks = detail::to_blocks(vectors, dim);
  std::vector<float> centroids;
  centroids.reserve(c * dim);
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<float> fresh(n);

  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t k = 0; k < c; ++k) {
    chosen[pick] = true;
    const auto centre = row(pick);
    centroids.insert(centroids.end(), centre.begin(), centre.end());
    if (k + 1 == c) break;
    detail::all_l2(centre.data(), blocks.data(), dim, n, fresh.data());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min<double>(d2[i], fresh[i]);
      total += d2[i];
    }
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      // Every point coincides with a chosen centroid: take the first unused.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const float> vectors, std::size_t dim, std::size_t c, std::size_t iters,
                    std::uint64_t seed) {
  if (dim == 0 || vectors.size() % dim != 0) throw std::invalid_argument("kmeans: bad vector buffer");
  const std::size_t n = vectors.size() / dim;
  if (c == 0 || c > n) {
    throw std::invalid_argument(fmt::format("kmeans: cannot fit {} centroids to {} vectors", c, n));
  }
  Rng rng(seed);
  KMeansResult result;
  result.centroids = plus_plus_seed(vectors, dim, c, rng);
  Assignment current = assign(vectors, dim, result.centroids);
  result.distortion.push_back(current.distortion);

  std::vector<double> sums(c * dim);
  std::vector<std::uint64_t> sizes(c);
  for (std::size_t it = 0; it < iters && current.distortion > 0.0; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t l = current.label[i];
      ++sizes[l];
      for (std::size_t d = 0; d < dim; ++d) sums[l * dim + d] += vectors[i * dim + d];
    }
    std::vector<float> next(c * dim);
    std::vector<float> spread = current.distance;
    for (std::size_t l = 0; l < c; ++l) {
      if (sizes[l] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          next[l * dim + d] = static_cast<float>(sums[l * dim + d] / static_cast<double>(sizes[l]));
        }
        continue;
      }
      const auto far = static_cast<std::size_t>(std::max_element(spread.begin(), spread.end()) - spread.begin());
      std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                  next.begin() + static_cast<std::ptrdiff_t>(l * dim));
      spread[far] = -1.0f;
    }
    Assignment updated = assign(vectors, dim, next);
    // Rounding the means to float can in principle cost a few ulps; never
    // accept a step that makes things worse.
    if (updated.distortion > current.distortion) break;
    const double gain = current.distortion - updated.distortion;
    result.centroids = std::move(next);
    current = std::move(updated);
    result.distortion.push_back(current.distortion);
    if (gain <= 1e-6 * result.distortion[result.distortion.size() - 2]) break;
  }
  result.assignment = std::move(current.label);
  return result;
}

}  // namespace tailknn::vindex
