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
#include <numbers>
#include <stdexcept>

#include "tailknn/synth.hpp"

namespace tailknn::synth {

ZipfSampler::ZipfSampler(std::uint32_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("ZipfSampler: n must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("ZipfSampler: alpha must be > 0");
  cdf_.resize(n);
  double acc = 0.0;
  for (std::uint32_t r = 0; r < n; ++r) {
    acc += std::pow(static_cast<double>(r) + 1.0, -alpha);
    cdf_[r] = acc;
  }
  for (auto& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

std::uint32_t ZipfSampler::operator()(Rng& rng) const {
  const double u = rng.uniform01();
  return static_cast<std::uint32_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
}

double ZipfSampler::prob(std::uint32_t rank) const {
  return rank == 0 ? cdf_.at(0) : cdf_.at(rank) - cdf_.at(rank - 1);
}

double standard_normal(Rng& rng) {
  double u1 = rng.uniform01();
  while (u1 == 0.0) u1 = rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

corpus::Corpus generate_zipf_corpus(const ZipfCorpusParams& p) {
  if (p.vocab_size < 2) throw std::invalid_argument("generate_zipf_corpus: vocab_size must be >= 2");
  if (p.mean_doc_len == 0) throw std::invalid_argument("generate_zipf_corpus: mean_doc_len must be >= 1");
  for (double w : {p.successor_weight, p.trigger_weight, p.pair_weight}) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("generate_zipf_corpus: probabilities must be in [0, 1]");
  }
  if (p.trigger_weight + p.pair_weight > 1.0) {
    throw std::invalid_argument("generate_zipf_corpus: trigger_weight + pair_weight must be <= 1");
  }
  const std::uint32_t types = p.vocab_size - 1;
  const ZipfSampler zipf(types, p.alpha);
  auto to_id = [](std::uint32_t rank) { return static_cast<TokenId>(rank + 1); };
  const std::uint32_t content_rank = std::min(p.content_rank, types - 1);
  const ZipfSampler content_zipf(types - content_rank, p.alpha);

  // Successor lists and trigger phrases are pure functions of the seed.
  std::vector<TokenId> successors;
  if (p.successor_weight > 0.0) {
    if (p.successors == 0) throw std::invalid_argument("generate_zipf_corpus: successors must be >= 1");
    successors.resize(static_cast<std::size_t>(p.vocab_size) * p.successors);
    for (TokenId t = 0; t < p.vocab_size; ++t) {
      Rng rng(mix_seed(p.seed, 0x5cc0000ULL + t));
      for (std::uint32_t j = 0; j < p.successors; ++j) successors[t * p.successors + j] = to_id(zipf(rng));
    }
  }
  std::vector<TokenId> triggers;
  if (p.trigger_weight > 0.0) {
    if (p.triggers == 0 || p.trigger_len == 0) {
      throw std::invalid_argument("generate_zipf_corpus: trigger phrases need a count and a length");
    }
    const ZipfSampler head(std::max<std::uint32_t>(1, std::min(p.trigger_rank, types)), p.alpha);
    Rng rng(mix_seed(p.seed, 0x7a16));
    for (std::uint32_t j = 0; j < p.triggers * p.trigger_len; ++j) triggers.push_back(to_id(head(rng)));
  }

  corpus::Corpus out;
  out.vocab_size = p.vocab_size;
  Rng rng(mix_seed(p.seed, 0xd0c5));
  std::uint64_t produced = 0;
  while (produced < p.tokens) {
    const std::uint64_t lo = std::max<std::uint64_t>(1, p.mean_doc_len / 2);
    const std::uint64_t len = std::min(lo + rng.below(p.mean_doc_len + 1), p.tokens - produced);
    corpus::Document doc;
    doc.reserve(len + p.trigger_len + 1);
    while (doc.size() < len) {
      if (!doc.empty() && rng.uniform01() < p.successor_weight) {
        doc.push_back(successors[doc.back() * p.successors + rng.below(p.successors)]);
        continue;
      }
      const std::uint32_t rank = zipf(rng);
      if (rank >= content_rank) {
        const double u = rng.uniform01();
        if (u < p.trigger_weight) {
          // Each content type keeps to its own phrase.
          const auto phrase = splitmix64(mix_seed(p.seed, rank)) % p.triggers * p.trigger_len;
          doc.insert(doc.end(), triggers.begin() + static_cast<std::ptrdiff_t>(phrase),
                     triggers.begin() + static_cast<std::ptrdiff_t>(phrase + p.trigger_len));
        } else if (u < p.trigger_weight + p.pair_weight) {
          doc.push_back(to_id(content_rank + content_zipf(rng)));
        }
      }
      doc.push_back(to_id(rank));
    }
    doc.resize(len);
    produced += len;
    out.docs.push_back(std::move(doc));
  }
  return out;
}

std::vector<float> gaussian_mixture(const GaussianMixtureParams& p) {
  if (p.dim == 0 || p.components == 0) throw std::invalid_argument("gaussian_mixture: empty shape");
  Rng rng(mix_seed(p.seed, 0x6a55));
  std::vector<double> centers(p.components * p.dim);
  for (auto& c : centers) c = p.center_scale * standard_normal(rng);
  std::vector<double> sd(p.dim);
  for (std::size_t d = 0; d < p.dim; ++d) sd[d] = std::pow(p.spectrum_decay, static_cast<double>(d));
  std::vector<float> out(p.n * p.dim);
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t c = rng.below(p.components);
    for (std::size_t d = 0; d < p.dim; ++d) {
      out[i * p.dim + d] = static_cast<float>(centers[c * p.dim + d] + sd[d] * standard_normal(rng));
    }
  }
  return out;
}

}  // namespace tailknn::synth
