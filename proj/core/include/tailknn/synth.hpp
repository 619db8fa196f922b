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

#include <cstdint>
#include <vector>

#include "tailknn/corpus.hpp"
#include "tailknn/rng.hpp"

namespace tailknn::synth {

/// Draws ranks 0..n-1 with P(r) proportional to (r + 1)^-alpha.
class ZipfSampler {
 public:
  ZipfSampler(std::uint32_t n, double alpha);

  std::uint32_t operator()(Rng& rng) const;
  double prob(std::uint32_t rank) const;
  std::uint32_t size() const { return static_cast<std::uint32_t>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

/// Standard normal via Box-Muller on Rng::uniform01, so draws are identical on
/// every platform.
double standard_normal(Rng& rng);

/// Token id t (1..vocab_size-1) has Zipf rank t-1; id 0 stays the unknown
/// token and is never emitted.
///
/// Each step either copies a preferred successor of the previous token
/// (probability successor_weight; every token owns `successors` of them,
/// drawn from the Zipf law) or draws a fresh token from the Zipf law. A fresh
/// token of rank >= content_rank is a content token; it is preceded by its
/// own one of `triggers` fixed phrases of trigger_len frequent tokens with
/// probability trigger_weight, or by another content token with probability
/// pair_weight.
struct ZipfCorpusParams {
  std::uint32_t vocab_size = 2000;
  double alpha = 1.1;
  std::uint64_t tokens = 500000;
  std::uint32_t mean_doc_len = 500;
  double successor_weight = 0.5;
  std::uint32_t successors = 2;
  std::uint32_t content_rank = 100;
  double trigger_weight = 0.5;
  std::uint32_t triggers = 128;
  std::uint32_t trigger_len = 3;
  std::uint32_t trigger_rank = 20;  // trigger phrases use ranks below this
  double pair_weight = 0.4;
  std::uint64_t seed = 0;
};

corpus::Corpus generate_zipf_corpus(const ZipfCorpusParams& params);

/// Points around `components` Gaussian centres. Centres are drawn with
/// standard deviation `center_scale`, and every component shares a diagonal
/// covariance whose standard deviation decays geometrically over the
/// dimensions (first dimension 1, ratio `spectrum_decay`).
struct GaussianMixtureParams {
  std::size_t n = 100000;
  std::size_t dim = 64;
  std::size_t components = 64;
  double center_scale = 1.0;
  double spectrum_decay = 0.95;
  std::uint64_t seed = 0;
};

std::vector<float> gaussian_mixture(const GaussianMixtureParams& params);

}  // namespace tailknn::synth
