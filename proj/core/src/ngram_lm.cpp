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
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/baselm.hpp"

namespace tailknn::baselm {

using corpus::make_ngram;

NgramLM NgramLM::train(const corpus::Corpus& corpus, int order) {
  if (order < 1 || order > kMaxOrder) {
    throw std::invalid_argument(fmt::format("NgramLM: order {} outside [1, {}]", order, kMaxOrder));
  }
  if (corpus.docs.empty()) throw std::invalid_argument("NgramLM: cannot train on an empty corpus");

  NgramLM lm;
  lm.order_ = order;
  lm.vocab_size_ = corpus.vocab_size;
  lm.levels_.resize(static_cast<std::size_t>(order));

  std::vector<std::unordered_map<corpus::NGram, std::unordered_map<TokenId, std::uint64_t>>> raw(lm.levels_.size());
  for (const auto& doc : corpus.docs) {
    const std::span<const TokenId> ids(doc);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      for (std::size_t m = 1; m <= lm.levels_.size() && m - 1 <= i; ++m) {
        ++raw[m - 1][make_ngram(ids.subspan(i - (m - 1), m - 1))][doc[i]];
      }
    }
  }
  for (std::size_t m = 0; m < raw.size(); ++m) {
    auto& level = lm.levels_[m];
    level.reserve(raw[m].size());
    for (auto& [history, conts] : raw[m]) {
      HistoryStats stats;
      stats.continuations.assign(conts.begin(), conts.end());
      std::sort(stats.continuations.begin(), stats.continuations.end());
      for (const auto& c : stats.continuations) stats.total += c.second;
      level.emplace(history, std::move(stats));
    }
  }
  return lm;
}

const NgramLM::HistoryStats* NgramLM::find(std::span<const TokenId> history) const {
  const auto& level = levels_[history.size()];
  auto it = level.find(make_ngram(history));
  return it == level.end() ? nullptr : &it->second;
}

double NgramLM::prob(std::span<const TokenId> context, TokenId token) const {
  if (token >= vocab_size_) {
    throw std::out_of_range(fmt::format("NgramLM::prob: token {} >= vocabulary size {}", token, vocab_size_));
  }
  const std::size_t usable = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  const auto history = context.last(usable);
  double p = 1.0 / vocab_size_;
  for (std::size_t len = 0; len <= usable; ++len) {
    const HistoryStats* stats = find(history.last(len));
    if (stats == nullptr) continue;
    auto it = std::lower_bound(stats->continuations.begin(), stats->continuations.end(),
                               std::pair<TokenId, std::uint64_t>{token, 0});
    const double c = (it != stats->continuations.end() && it->first == token) ? static_cast<double>(it->second) : 0.0;
    const double types = static_cast<double>(stats->continuations.size());
    p = (c + types * p) / (static_cast<double>(stats->total) + types);
  }
  return p;
}

std::vector<double> NgramLM::dist(std::span<const TokenId> context) const {
  const std::size_t usable = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  const auto history = context.last(usable);
  std::vector<double> p(vocab_size_, 1.0 / vocab_size_);
  for (std::size_t len = 0; len <= usable; ++len) {
    const HistoryStats* stats = find(history.last(len));
    if (stats == nullptr) continue;
    const double types = static_cast<double>(stats->continuations.size());
    const double denom = static_cast<double>(stats->total) + types;
    const double keep = types / denom;
    for (double& v : p) v *= keep;
    for (const auto& [tok, c] : stats->continuations) p[tok] += static_cast<double>(c) / denom;
  }
  return p;
}

double NgramLM::perplexity(const corpus::Corpus& corpus) const {
  double nll = 0.0;
  std::uint64_t n = 0;
  for (const auto& doc : corpus.docs) {
    const std::span<const TokenId> ids(doc);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      nll -= std::log(prob(ids.first(i), doc[i]));
      ++n;
    }
  }
  return n == 0 ? 1.0 : std::exp(nll / static_cast<double>(n));
}

}  // namespace tailknn::baselm
