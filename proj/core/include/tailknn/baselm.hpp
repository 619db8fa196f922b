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
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tailknn/common.hpp"
#include "tailknn/corpus.hpp"

namespace tailknn::baselm {

/// Interpolated Witten-Bell n-gram model:
///
///   p_m(w | h) = (c(h, w) + T(h) * p_{m-1}(w | h')) / (c(h) + T(h))
///
/// where T(h) is the number of distinct continuations of h and h' drops the
/// oldest token. Unseen histories fall through to the lower order and the
/// chain ends in the uniform distribution over the vocabulary, so every
/// probability is strictly positive. Histories never cross document
/// boundaries.
class NgramLM {
 public:
  static constexpr int kMaxOrder = 5;

  /// Throws std::invalid_argument if order is outside [1, 5] or the corpus
  /// has no documents.
  static NgramLM train(const corpus::Corpus& corpus, int order);

  int order() const { return order_; }
  std::uint32_t vocab_size() const { return vocab_size_; }

  /// p(token | context); only the last order-1 context tokens matter.
  double prob(std::span<const TokenId> context, TokenId token) const;
  /// Full next-token distribution over the vocabulary.
  std::vector<double> dist(std::span<const TokenId> context) const;
  /// exp of the mean negative log-probability over every token position.
  double perplexity(const corpus::Corpus& corpus) const;

 private:
  struct HistoryStats {
    std::uint64_t total = 0;
    // Sorted by token id.
    std::vector<std::pair<TokenId, std::uint64_t>> continuations;
  };

  const HistoryStats* find(std::span<const TokenId> history) const;

  int order_ = 1;
  std::uint32_t vocab_size_ = 1;
  // levels_[m - 1] holds histories of length m - 1.
  std::vector<std::unordered_map<corpus::NGram, HistoryStats>> levels_;
};

struct EncoderParams {
  std::uint32_t dim = 64;
  std::uint32_t window = 8;
  double decay = 0.7;
  std::uint64_t seed = 0;
};

/// Stand-in for a transformer's hidden state: a decay-weighted average of
/// per-token pseudorandom unit vectors over the last `window` tokens,
///
///   v = sum_i decay^(i-1) e(x_{t-i}) / sum_i decay^(i-1),
///
/// with e(t) derived from a counter hash of (seed, t). Arithmetic is carried
/// in double and rounded to float once, so outputs are bit-reproducible.
class ContextEncoder {
 public:
  /// Precomputes token vectors for ids below `vocab_size`; other ids are
  /// computed on demand.
  ContextEncoder(EncoderParams params, std::uint32_t vocab_size);

  const EncoderParams& params() const { return params_; }
  std::uint32_t dim() const { return params_.dim; }

  std::vector<float> token_vector(TokenId token) const;
  /// Empty context encodes to the zero vector. `out` must hold dim() floats.
  void encode(std::span<const TokenId> context, std::span<float> out) const;
  std::vector<float> encode(std::span<const TokenId> context) const;
  /// Row t is the encoding of doc[0, t): one key per token position.
  std::vector<float> encode_document(const corpus::Document& doc) const;

 private:
  void token_vector_into(TokenId token, std::span<double> out) const;

  EncoderParams params_;
  std::uint32_t table_size_ = 0;
  std::vector<double> table_;
};

// ---- key/value embedding files ----------------------------------------------
//
// Layout (little-endian): magic "TLKNNDS1", u32 D, u64 N, N*D f32 keys,
// N u32 values. Shared with the datastore.

inline constexpr std::string_view kKeyFileMagic = "TLKNNDS1";
inline constexpr std::uint64_t kKeyFileHeaderBytes = 8 + 4 + 8;

void write_key_file(const std::string& path, std::uint32_t dim, std::span<const float> keys,
                    std::span<const TokenId> values);

struct EmbeddingRecord {
  std::vector<float> key;
  TokenId target = 0;
  std::uint64_t position = 0;
};

/// Streams records out of a key file without loading it whole. The header
/// and file size are validated on open; any mismatch throws DataError naming
/// the offending record or byte offset.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::string& path, std::uint32_t expected_dim = 0);

  std::uint32_t dim() const { return dim_; }
  std::uint64_t size() const { return count_; }
  /// Fills `record`; false after the last record.
  bool next(EmbeddingRecord& record);

 private:
  std::string path_;
  std::ifstream keys_;
  std::ifstream values_;
  std::uint32_t dim_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t cursor_ = 0;
};

}  // namespace tailknn::baselm
