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
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tailknn/common.hpp"

namespace tailknn::corpus {

/// Splits UTF-8 text into word and punctuation tokens. Whitespace separates
/// tokens, a maximal run of letters/digits is one token, and every other
/// codepoint (punctuation, symbols) is a token on its own. No case folding.
/// Throws std::invalid_argument on malformed UTF-8.
std::vector<std::string> tokenize(std::string_view text);

/// Dense id <-> string mapping. Id 0 is always the unknown token.
class Vocabulary {
 public:
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Returns the id of `token`, inserting it at the end if new.
  TokenId add(std::string_view token);
  /// Id of `token`, or kUnkId when absent.
  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return entries_.size(); }
  std::span<const std::string> entries() const { return entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Ids are assigned in first-occurrence order (documents in order) to tokens
/// seen at least `min_count` times; everything else maps to UNK.
Vocabulary build_vocab(std::span<const std::vector<std::string>> docs, std::uint64_t min_count);

using Document = std::vector<TokenId>;

struct Corpus {
  std::uint32_t vocab_size = 1;
  std::vector<Document> docs;

  std::uint64_t token_count() const;
  /// Throws DataError if any id is outside the vocabulary.
  void validate() const;
};

Corpus encode(std::span<const std::vector<std::string>> docs, const Vocabulary& vocab);

enum class FrequencySource { kDatastore, kPretraining };

/// Per-type occurrence counts over a dense id domain.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  FrequencyTable(FrequencySource source, std::size_t domain);

  void add(TokenId id, std::uint64_t n = 1);
  /// Absent or out-of-domain ids read as zero.
  std::uint64_t count(TokenId id) const { return id < counts_.size() ? counts_[id] : 0; }
  std::uint64_t total() const { return total_; }
  std::size_t domain() const { return counts_.size(); }
  std::span<const std::uint64_t> counts() const { return counts_; }
  FrequencySource source() const { return source_; }
  std::uint64_t max_count() const;

 private:
  FrequencySource source_ = FrequencySource::kDatastore;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

FrequencyTable count_tokens(const Corpus& corpus, FrequencySource source = FrequencySource::kDatastore);

/// An n-gram key: token ids stored as code units of a u32 string, which gives
/// hashing and ordering for free.
using NGram = std::u32string;

NGram make_ngram(std::span<const TokenId> ids);

struct NGramTable {
  std::size_t n = 0;
  std::unordered_map<NGram, std::uint64_t> counts;

  std::uint64_t count(const NGram& key) const;
};

/// Sliding-window counts inside each document. Throws std::invalid_argument
/// for n == 0.
NGramTable count_ngrams(const Corpus& corpus, std::size_t n);

/// Tables for every order 1..max_order over one corpus.
class NGramCounts {
 public:
  NGramCounts(const Corpus& corpus, std::size_t max_order);

  std::size_t max_order() const { return tables_.size(); }
  const NGramTable& order(std::size_t n) const { return tables_.at(n - 1); }
  /// Count of `context` (any length up to max_order); an empty context counts
  /// every token position.
  std::uint64_t count(std::span<const TokenId> context) const;
  std::uint64_t total_tokens() const { return total_tokens_; }

 private:
  std::vector<NGramTable> tables_;
  std::uint64_t total_tokens_ = 0;
};

/// Mean over n = 1..4 (orders with at least one occurrence in `doc`) of the
/// share of the doc's n-gram occurrences whose corpus-wide count is 1.
/// `tables` must cover orders 1..4 and include `doc` itself.
double rare_ngram_ratio(const Document& doc, const NGramCounts& tables);

struct SplitResult {
  Corpus train;
  Corpus valid;
  Corpus test;
  std::uint64_t seed = 0;
  std::uint64_t target_eval_tokens = 0;
  /// Original document indices of each part, in the order stored.
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> valid_index;
  std::vector<std::size_t> test_index;
};

/// Rare-n-gram resplit: rank documents by rare_ngram_ratio (descending, ties
/// by original order), take from the top until the taken token count reaches
/// `target_eval_tokens`, shuffle the taken documents with `seed` and deal
/// them alternately to valid and test. Remaining documents form train, in
/// original order. Throws std::invalid_argument when the target exceeds the
/// corpus size.
SplitResult resplit(const Corpus& corpus, std::uint64_t target_eval_tokens, std::uint64_t seed);

/// Same dealing as resplit but with a seeded random document order instead of
/// the rare-n-gram ranking. Used as the control split.
SplitResult random_split(const Corpus& corpus, std::uint64_t target_eval_tokens, std::uint64_t seed);

/// For every test position (documents in order), the training count of the
/// preceding n tokens within the document. Positions with fewer than n
/// predecessors use the shorter prefix; the first position of a document
/// reports the total token count (the empty context).
std::vector<std::uint64_t> context_ngram_frequency(const Corpus& test, const NGramCounts& train,
                                                   std::size_t n);

// ---- files -----------------------------------------------------------------

/// Blank-line separated documents; lines of one block are joined with '\n'.
std::vector<std::string> read_text_documents(const std::string& path);

/// Binary token-id corpus, magic "TLCORP1".
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

/// One token per line, line number = id.
void write_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocab(const std::string& path);

/// TSV `token_id<TAB>count` with a leading `#total=<N>` line. Zero counts
/// are not written.
void write_frequency_tsv(const std::string& path, const FrequencyTable& table);
/// The domain grows to cover the largest id read (at least `min_domain`).
FrequencyTable read_frequency_tsv(const std::string& path, FrequencySource source,
                                  std::size_t min_domain = 0);

}  // namespace tailknn::corpus
