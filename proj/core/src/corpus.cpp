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
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "tailknn/corpus.hpp"
#include "tailknn/rng.hpp"

namespace tailknn::corpus {

Vocabulary::Vocabulary() { add(kUnkToken); }

TokenId Vocabulary::add(std::string_view token) {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(entries_.size());
  entries_.emplace_back(token);
  ids_.emplace(entries_.back(), id);
  return id;
}

TokenId Vocabulary::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= entries_.size()) throw std::out_of_range(fmt::format("token id {} out of range", id));
  return entries_[id];
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> docs, std::uint64_t min_count) {
  if (min_count == 0) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string_view, std::uint64_t> counts;
  std::vector<std::string_view> first_seen;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) {
      auto [it, inserted] = counts.try_emplace(tok, 0);
      if (inserted) first_seen.push_back(tok);
      ++it->second;
    }
  }
  Vocabulary vocab;
  for (auto tok : first_seen) {
    if (counts[tok] >= min_count) vocab.add(tok);
  }
  return vocab;
}

std::uint64_t Corpus::token_count() const {
  std::uint64_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

void Corpus::validate() const {
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t j = 0; j < docs[i].size(); ++j) {
      if (docs[i][j] >= vocab_size) {
        throw DataError(fmt::format("document {} position {}: token id {} >= vocabulary size {}", i, j,
                                    docs[i][j], vocab_size));
      }
    }
  }
}

Corpus encode(std::span<const std::vector<std::string>> docs, const Vocabulary& vocab) {
  Corpus out;
  out.vocab_size = static_cast<std::uint32_t>(vocab.size());
  out.docs.reserve(docs.size());
  for (const auto& doc : docs) {
    Document ids;
    ids.reserve(doc.size());
    for (const auto& tok : doc) ids.push_back(vocab.lookup(tok));
    out.docs.push_back(std::move(ids));
  }
  return out;
}

FrequencyTable::FrequencyTable(FrequencySource source, std::size_t domain)
    : source_(source), counts_(domain, 0) {}

void FrequencyTable::add(TokenId id, std::uint64_t n) {
  if (id >= counts_.size()) counts_.resize(static_cast<std::size_t>(id) + 1, 0);
  counts_[id] += n;
  total_ += n;
}

std::uint64_t FrequencyTable::max_count() const {
  return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

FrequencyTable count_tokens(const Corpus& corpus, FrequencySource source) {
  FrequencyTable table(source, corpus.vocab_size);
  for (const auto& doc : corpus.docs) {
    for (TokenId t : doc) table.add(t);
  }
  return table;
}

NGram make_ngram(std::span<const TokenId> ids) {
  NGram key(ids.size(), U'\0');
  std::transform(ids.begin(), ids.end(), key.begin(), [](TokenId t) { return static_cast<char32_t>(t); });
  return key;
}

std::uint64_t NGramTable::count(const NGram& key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

NGramTable count_ngrams(const Corpus& corpus, std::size_t n) {
  if (n == 0) throw std::invalid_argument("count_ngrams: order must be >= 1");
  NGramTable table;
  table.n = n;
  for (const auto& doc : corpus.docs) {
    if (doc.size() < n) continue;
    const std::span<const TokenId> ids(doc);
    for (std::size_t i = 0; i + n <= doc.size(); ++i) ++table.counts[make_ngram(ids.subspan(i, n))];
  }
  return table;
}

NGramCounts::NGramCounts(const Corpus& corpus, std::size_t max_order) : total_tokens_(corpus.token_count()) {
  if (max_order == 0) throw std::invalid_argument("NGramCounts: max_order must be >= 1");
  tables_.reserve(max_order);
  for (std::size_t n = 1; n <= max_order; ++n) tables_.push_back(count_ngrams(corpus, n));
}

std::uint64_t NGramCounts::count(std::span<const TokenId> context) const {
  if (context.empty()) return total_tokens_;
  return order(context.size()).count(make_ngram(context));
}

double rare_ngram_ratio(const Document& doc, const NGramCounts& tables) {
  constexpr std::size_t kMaxOrder = 4;
  if (tables.max_order() < kMaxOrder) {
    throw std::invalid_argument("rare_ngram_ratio: tables must cover orders 1..4");
  }
  const std::span<const TokenId> ids(doc);
  double sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= kMaxOrder && n <= doc.size(); ++n) {
    const auto& table = tables.order(n);
    const std::size_t occurrences = doc.size() - n + 1;
    std::size_t singletons = 0;
    for (std::size_t i = 0; i < occurrences; ++i) {
      if (table.count(make_ngram(ids.subspan(i, n))) == 1) ++singletons;
    }
    sum += static_cast<double>(singletons) / static_cast<double>(occurrences);
    ++orders;
  }
  return orders == 0 ? 0.0 : sum / orders;
}

namespace {

// Takes documents in `ranking` order until the target is reached, then deals
// them to valid/test after a seeded shuffle.
SplitResult split_by_ranking(const Corpus& corpus, const std::vector<std::size_t>& ranking,
                             std::uint64_t target, std::uint64_t seed) {
  const std::uint64_t total = corpus.token_count();
  if (target > total) {
    throw std::invalid_argument(
        fmt::format("resplit: target of {} eval tokens exceeds the corpus size of {}", target, total));
  }
  std::vector<std::size_t> taken;
  std::uint64_t cumulative = 0;
  for (std::size_t i = 0; i < ranking.size() && cumulative < target; ++i) {
    taken.push_back(ranking[i]);
    cumulative += corpus.docs[ranking[i]].size();
  }

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(taken));

  SplitResult out;
  out.seed = seed;
  out.target_eval_tokens = target;
  out.train.vocab_size = out.valid.vocab_size = out.test.vocab_size = corpus.vocab_size;
  std::vector<bool> is_eval(corpus.docs.size(), false);
  for (std::size_t i = 0; i < taken.size(); ++i) {
    is_eval[taken[i]] = true;
    auto& part = (i % 2 == 0) ? out.valid : out.test;
    auto& index = (i % 2 == 0) ? out.valid_index : out.test_index;
    part.docs.push_back(corpus.docs[taken[i]]);
    index.push_back(taken[i]);
  }
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    if (is_eval[d]) continue;
    out.train.docs.push_back(corpus.docs[d]);
    out.train_index.push_back(d);
  }
  return out;
}

}  // namespace

SplitResult resplit(const Corpus& corpus, std::uint64_t target_eval_tokens, std::uint64_t seed) {
  const NGramCounts tables(corpus, 4);
  std::vector<double> score(corpus.docs.size());
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) score[d] = rare_ngram_ratio(corpus.docs[d], tables);

  std::vector<std::size_t> ranking(corpus.docs.size());
  std::iota(ranking.begin(), ranking.end(), std::size_t{0});
  std::stable_sort(ranking.begin(), ranking.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return split_by_ranking(corpus, ranking, target_eval_tokens, seed);
}

SplitResult random_split(const Corpus& corpus, std::uint64_t target_eval_tokens, std::uint64_t seed) {
  std::vector<std::size_t> ranking(corpus.docs.size());
  std::iota(ranking.begin(), ranking.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5eed));
  rng.shuffle(std::span<std::size_t>(ranking));
  return split_by_ranking(corpus, ranking, target_eval_tokens, seed);
}

std::vector<std::uint64_t> context_ngram_frequency(const Corpus& test, const NGramCounts& train,
                                                   std::size_t n) {
  if (n == 0 || n > train.max_order()) {
    throw std::invalid_argument(
        fmt::format("context_ngram_frequency: order {} outside 1..{}", n, train.max_order()));
  }
  std::vector<std::uint64_t> out;
  out.reserve(test.token_count());
  for (const auto& doc : test.docs) {
    const std::span<const TokenId> ids(doc);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::size_t len = std::min(n, i);
      out.push_back(train.count(ids.subspan(i - len, len)));
    }
  }
  return out;
}

}  // namespace tailknn::corpus
