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

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tailknn/baselm.hpp"
#include "tailknn/corpus.hpp"
#include "tailknn/vindex.hpp"

namespace tailknn::knnlm {

/// One (context key, next token) pair per token position of the source text.
struct Datastore {
  std::uint32_t dim = 0;
  std::vector<float> keys;  // size() x dim, row-major
  std::vector<TokenId> values;
  std::uint64_t source_hash = 0;  // FNV-1a over the source corpus, 0 if imported

  std::size_t size() const { return values.size(); }
  std::span<const float> key(std::size_t i) const {
    return std::span<const float>(keys).subspan(i * dim, dim);
  }
};

std::uint64_t corpus_hash(const corpus::Corpus& corpus);

/// Contexts restart at every document boundary; the first position of a
/// document has the empty context.
Datastore build_datastore(const corpus::Corpus& corpus, const baselm::ContextEncoder& encoder);
/// Import path for externally produced keys. Throws DataError when the stream
/// dimension differs from `expected_dim` (0 accepts any).
Datastore build_datastore(baselm::EmbeddingReader& stream, std::uint32_t expected_dim = 0);

void save_datastore(const std::string& path, const Datastore& ds);
Datastore load_datastore(const std::string& path, std::uint32_t expected_dim = 0);

struct KnnConfig {
  std::size_t k = 1024;
  double temperature = 10.0;
  double lambda = 0.25;
  std::size_t nprobe = 32;
  bool exact_rescore = false;

  /// Throws std::invalid_argument on k == 0, temperature <= 0, lambda outside
  /// [0, 1] or nprobe == 0.
  void validate() const;
};

/// Probability mass on retrieved tokens only; everything else is zero.
struct SparseDist {
  std::vector<std::pair<TokenId, double>> probs;  // sorted by token id

  /// True when no neighbor was retrieved; interpolation then uses p_LM alone.
  bool empty() const { return probs.empty(); }
  double operator()(TokenId token) const;
};

/// Distance-weighted vote over neighbor values:
///   p(v) ∝ sum over neighbors with value v of exp(-d / temperature).
/// The minimum distance is subtracted first so the closest neighbor has
/// weight 1 at any temperature.
SparseDist knn_prob(std::span<const vindex::Neighbor> neighbors, double temperature);

/// lambda * p_knn + (1 - lambda) * p_lm over the whole vocabulary. An empty
/// kNN distribution returns p_lm unchanged.
std::vector<double> interpolate(const SparseDist& knn, std::span<const double> lm, double lambda);
double interpolate(double p_knn, double p_lm, double lambda);

bool contains_value(const vindex::NeighborSet& neighbors, TokenId token);

/// Search backend used at inference time. Counts calls so callers can verify
/// how often the index was consulted.
class Retriever {
 public:
  virtual ~Retriever() = default;

  vindex::NeighborSet search(std::span<const float> query, std::size_t k) const {
    ++calls_;
    return do_search(query, k);
  }
  std::uint64_t calls() const { return calls_; }

 protected:
  virtual vindex::NeighborSet do_search(std::span<const float> query, std::size_t k) const = 0;

 private:
  mutable std::uint64_t calls_ = 0;
};

class FlatRetriever final : public Retriever {
 public:
  explicit FlatRetriever(const vindex::FlatIndex& index) : index_(index) {}

 protected:
  vindex::NeighborSet do_search(std::span<const float> query, std::size_t k) const override;

 private:
  const vindex::FlatIndex& index_;
};

/// ADC search; with `rescore_keys` set, the retrieved candidates are re-ranked
/// by exact distance to the original keys.
class IvfPqRetriever final : public Retriever {
 public:
  IvfPqRetriever(const vindex::IvfPqIndex& index, std::size_t nprobe, const Datastore* rescore_keys = nullptr);

 protected:
  vindex::NeighborSet do_search(std::span<const float> query, std::size_t k) const override;

 private:
  const vindex::IvfPqIndex& index_;
  std::size_t nprobe_;
  const Datastore* rescore_;
};

inline constexpr std::size_t kContextOrders = 5;

struct EvalRecord {
  std::uint64_t position = 0;
  TokenId target = 0;
  std::uint64_t freq_datastore = 0;
  std::optional<std::uint64_t> freq_pretrain;
  double p_lm = 0.0;
  double p_knn = 0.0;
  double p_interp = 0.0;
  bool hit = false;
  std::array<std::uint64_t, kContextOrders> ctx_ngram_count{};
};

struct EvalResult {
  double ppl_base = 0.0;
  double ppl_knnlm = 0.0;  // +inf when some position received probability 0
  std::vector<EvalRecord> records;
};

/// Read-only artifacts shared by evaluation and sweeps.
struct EvalContext {
  const baselm::NgramLM& lm;
  const baselm::ContextEncoder& encoder;
  const Retriever& retriever;
  const corpus::FrequencyTable& datastore_freq;
  const corpus::FrequencyTable* pretrain_freq = nullptr;
  const corpus::NGramCounts* train_ngrams = nullptr;  // orders 1..5 for context counts
};

/// Scores every test position with the base LM and with kNN-LM and keeps a
/// per-position record for the diagnostics.
EvalResult eval_ppl(const EvalContext& ctx, const KnnConfig& config, const corpus::Corpus& test);

/// Columns: position,target_id,freq_datastore,freq_pretrain,p_lm,p_knn,
/// p_interp,hit,ctx_ngram_count_n1..n5. Missing pre-training frequency is an
/// empty field.
void write_records_csv(const std::string& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records_csv(const std::string& path);

}  // namespace tailknn::knnlm
