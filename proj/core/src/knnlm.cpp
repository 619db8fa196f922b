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
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/knnlm.hpp"

namespace tailknn::knnlm {

std::uint64_t corpus_hash(const corpus::Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(corpus.vocab_size);
  mix(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    mix(doc.size());
    for (TokenId t : doc) mix(t);
  }
  return h;
}

Datastore build_datastore(const corpus::Corpus& corpus, const baselm::ContextEncoder& encoder) {
  Datastore ds;
  ds.dim = encoder.dim();
  ds.source_hash = corpus_hash(corpus);
  const std::uint64_t n = corpus.token_count();
  ds.keys.reserve(n * ds.dim);
  ds.values.reserve(n);
  for (const auto& doc : corpus.docs) {
    const auto keys = encoder.encode_document(doc);
    ds.keys.insert(ds.keys.end(), keys.begin(), keys.end());
    ds.values.insert(ds.values.end(), doc.begin(), doc.end());
  }
  return ds;
}

Datastore build_datastore(baselm::EmbeddingReader& stream, std::uint32_t expected_dim) {
  if (expected_dim != 0 && stream.dim() != expected_dim) {
    throw DataError(fmt::format("embedding stream has dimension {}, expected {}", stream.dim(), expected_dim));
  }
  Datastore ds;
  ds.dim = stream.dim();
  ds.keys.reserve(stream.size() * ds.dim);
  ds.values.reserve(stream.size());
  baselm::EmbeddingRecord rec;
  while (stream.next(rec)) {
    ds.keys.insert(ds.keys.end(), rec.key.begin(), rec.key.end());
    ds.values.push_back(rec.target);
  }
  return ds;
}

void save_datastore(const std::string& path, const Datastore& ds) {
  baselm::write_key_file(path, ds.dim, ds.keys, ds.values);
}

Datastore load_datastore(const std::string& path, std::uint32_t expected_dim) {
  baselm::EmbeddingReader reader(path, expected_dim);
  return build_datastore(reader, expected_dim);
}

void KnnConfig::validate() const {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument(fmt::format("knn: temperature {} must be positive and finite", temperature));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument(fmt::format("knn: lambda {} outside [0, 1]", lambda));
  }
  if (nprobe == 0) throw std::invalid_argument("knn: nprobe must be >= 1");
}

double SparseDist::operator()(TokenId token) const {
  auto it = std::lower_bound(probs.begin(), probs.end(), std::pair<TokenId, double>{token, -1.0});
  return (it != probs.end() && it->first == token) ? it->second : 0.0;
}

SparseDist knn_prob(std::span<const vindex::Neighbor> neighbors, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("knn_prob: temperature must be > 0");
  SparseDist out;
  if (neighbors.empty()) return out;
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& n : neighbors) dmin = std::min<double>(dmin, n.distance);

  std::vector<std::pair<TokenId, double>> weights;
  weights.reserve(neighbors.size());
  for (const auto& n : neighbors) {
    double w = std::exp(-(static_cast<double>(n.distance) - dmin) / temperature);
    // A retrieved token keeps non-zero mass even when its weight underflows.
    if (w == 0.0) w = std::numeric_limits<double>::denorm_min();
    weights.emplace_back(n.value, w);
  }
  std::sort(weights.begin(), weights.end());
  double total = 0.0;
  for (const auto& [tok, w] : weights) {
    total += w;
    if (!out.probs.empty() && out.probs.back().first == tok) {
      out.probs.back().second += w;
    } else {
      out.probs.emplace_back(tok, w);
    }
  }
  for (auto& entry : out.probs) entry.second /= total;
  return out;
}

double interpolate(double p_knn, double p_lm, double lambda) {
  if (lambda == 0.0) return p_lm;
  if (lambda == 1.0) return p_knn;
  // Same value as lambda * p_knn + (1 - lambda) * p_lm, written so that
  // p_knn == p_lm returns p_lm exactly and the sign of (p - p_lm) always
  // follows the sign of (p_knn - p_lm).
  return p_lm + lambda * (p_knn - p_lm);
}

std::vector<double> interpolate(const SparseDist& knn, std::span<const double> lm, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("interpolate: lambda outside [0, 1]");
  std::vector<double> out(lm.begin(), lm.end());
  if (knn.empty()) return out;
  auto it = knn.probs.begin();
  for (std::size_t t = 0; t < out.size(); ++t) {
    double pk = 0.0;
    if (it != knn.probs.end() && it->first == t) pk = (it++)->second;
    out[t] = interpolate(pk, lm[t], lambda);
  }
  if (it != knn.probs.end()) {
    throw std::invalid_argument(fmt::format("interpolate: kNN token {} outside the LM vocabulary", it->first));
  }
  return out;
}

bool contains_value(const vindex::NeighborSet& neighbors, TokenId token) {
  return std::any_of(neighbors.begin(), neighbors.end(), [token](const auto& n) { return n.value == token; });
}

vindex::NeighborSet FlatRetriever::do_search(std::span<const float> query, std::size_t k) const {
  return index_.search(query, k);
}

IvfPqRetriever::IvfPqRetriever(const vindex::IvfPqIndex& index, std::size_t nprobe, const Datastore* rescore_keys)
    : index_(index), nprobe_(std::min(nprobe, index.nlist())), rescore_(rescore_keys) {
  if (rescore_ != nullptr && (rescore_->size() != index.size() || rescore_->dim != index.dim())) {
    throw DataError("exact rescoring needs the datastore the index was built from");
  }
}

vindex::NeighborSet IvfPqRetriever::do_search(std::span<const float> query, std::size_t k) const {
  auto out = index_.search(query, k, nprobe_);
  if (rescore_ != nullptr) {
    for (auto& n : out) n.distance = vindex::l2_sqr(query, rescore_->key(n.id));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
  }
  return out;
}

}  // namespace tailknn::knnlm
