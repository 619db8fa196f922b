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
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/knnlm.hpp"

namespace tailknn::knnlm {

EvalResult eval_ppl(const EvalContext& ctx, const KnnConfig& config, const corpus::Corpus& test) {
  config.validate();
  if (ctx.encoder.dim() == 0) throw std::invalid_argument("eval_ppl: encoder has zero dimension");
  test.validate();
  if (test.vocab_size > ctx.lm.vocab_size()) {
    throw DataError(fmt::format("test vocabulary ({}) is larger than the LM vocabulary ({})", test.vocab_size,
                                ctx.lm.vocab_size()));
  }

  EvalResult result;
  result.records.reserve(test.token_count());
  std::vector<float> query(ctx.encoder.dim());
  double nll_base = 0.0;
  double nll_knn = 0.0;
  std::uint64_t position = 0;

  for (const auto& doc : test.docs) {
    const std::span<const TokenId> tokens(doc);
    for (std::size_t i = 0; i < doc.size(); ++i, ++position) {
      const auto context = tokens.first(i);
      const TokenId target = doc[i];
      ctx.encoder.encode(context, query);
      const auto neighbors = ctx.retriever.search(query, config.k);
      const auto knn = knn_prob(neighbors, config.temperature);

      EvalRecord rec;
      rec.position = position;
      rec.target = target;
      rec.freq_datastore = ctx.datastore_freq.count(target);
      if (ctx.pretrain_freq != nullptr) rec.freq_pretrain = ctx.pretrain_freq->count(target);
      rec.p_lm = ctx.lm.prob(context, target);
      rec.p_knn = knn(target);
      rec.p_interp = knn.empty() ? rec.p_lm : interpolate(rec.p_knn, rec.p_lm, config.lambda);
      rec.hit = contains_value(neighbors, target);
      if (ctx.train_ngrams != nullptr) {
        const std::size_t orders = std::min(kContextOrders, ctx.train_ngrams->max_order());
        for (std::size_t n = 1; n <= orders; ++n) {
          rec.ctx_ngram_count[n - 1] = ctx.train_ngrams->count(context.last(std::min(n, i)));
        }
      }
      nll_base -= std::log(rec.p_lm);
      nll_knn -= std::log(rec.p_interp);
      result.records.push_back(rec);
    }
  }
  if (position == 0) throw DataError("eval_ppl: test corpus has no tokens");
  const auto t = static_cast<double>(position);
  result.ppl_base = std::exp(nll_base / t);
  result.ppl_knnlm = std::exp(nll_knn / t);
  return result;
}

namespace {

constexpr std::string_view kRecordsHeader =
    "position,target_id,freq_datastore,freq_pretrain,p_lm,p_knn,p_interp,hit,"
    "ctx_ngram_count_n1,ctx_ngram_count_n2,ctx_ngram_count_n3,ctx_ngram_count_n4,ctx_ngram_count_n5";

template <typename T>
T parse_field(std::string_view field, const std::string& path, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(fmt::format("{}:{}: cannot parse field '{}'", path, line, field));
  }
  return value;
}

}  // namespace

void write_records_csv(const std::string& path, std::span<const EvalRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open {} for writing", path));
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{}\n", kRecordsHeader);
  for (const auto& r : records) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},", r.position, r.target, r.freq_datastore);
    if (r.freq_pretrain) fmt::format_to(std::back_inserter(buf), "{}", *r.freq_pretrain);
    fmt::format_to(std::back_inserter(buf), ",{:.17g},{:.17g},{:.17g},{}", r.p_lm, r.p_knn, r.p_interp,
                   r.hit ? 1 : 0);
    for (auto c : r.ctx_ngram_count) fmt::format_to(std::back_inserter(buf), ",{}", c);
    buf.push_back('\n');
    if (buf.size() > (1 << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(fmt::format("write to {} failed", path));
}

std::vector<EvalRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path));
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) {
    throw DataError(fmt::format("{}: not an evaluation record file (unexpected header)", path));
  }
  std::vector<EvalRecord> records;
  std::vector<std::string_view> fields;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8 + kContextOrders) {
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path, lineno, 8 + kContextOrders,
                                  fields.size()));
    }
    EvalRecord r;
    r.position = parse_field<std::uint64_t>(fields[0], path, lineno);
    r.target = parse_field<TokenId>(fields[1], path, lineno);
    r.freq_datastore = parse_field<std::uint64_t>(fields[2], path, lineno);
    if (!fields[3].empty()) r.freq_pretrain = parse_field<std::uint64_t>(fields[3], path, lineno);
    r.p_lm = parse_field<double>(fields[4], path, lineno);
    r.p_knn = parse_field<double>(fields[5], path, lineno);
    r.p_interp = parse_field<double>(fields[6], path, lineno);
    const auto hit = parse_field<int>(fields[7], path, lineno);
    if (hit != 0 && hit != 1) throw DataError(fmt::format("{}:{}: hit flag must be 0 or 1", path, lineno));
    r.hit = hit == 1;
    for (std::size_t n = 0; n < kContextOrders; ++n) {
      r.ctx_ngram_count[n] = parse_field<std::uint64_t>(fields[8 + n], path, lineno);
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace tailknn::knnlm
