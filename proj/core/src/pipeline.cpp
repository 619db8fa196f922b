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
#include <filesystem>
#include <fstream>
#include <memory>

#include <fmt/format.h>

#include "tailknn/baselm.hpp"
#include "tailknn/corpus.hpp"
#include "tailknn/diagnostics.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/pipeline.hpp"
#include "tailknn/synth.hpp"
#include "tailknn/vindex.hpp"

namespace tailknn::pipeline {
namespace {

using config::IndexKind;
using config::PipelineConfig;

constexpr std::uint64_t kRareThreshold = 10;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open {} for writing", path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError(fmt::format("write to {} failed", path));
}

void prepare(const PipelineConfig& cfg, std::string_view command) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError(fmt::format("cannot create output directory {}: {}", cfg.out_dir, ec.message()));
  write_text(artifact(cfg, fmt::format("{}.config.toml", command)), cfg.to_text());
}

// Base LM, encoder, datastore and retriever shared by eval and sweep.
struct Loaded {
  corpus::Corpus train;
  corpus::Corpus test;
  knnlm::Datastore ds;
  corpus::FrequencyTable ds_freq;
  std::unique_ptr<baselm::NgramLM> lm;
  std::unique_ptr<baselm::ContextEncoder> encoder;
  std::unique_ptr<vindex::FlatIndex> flat;
  std::unique_ptr<vindex::IvfPqIndex> ivfpq;
  std::unique_ptr<knnlm::Retriever> retriever;
  std::unique_ptr<corpus::FrequencyTable> pretrain;
  std::unique_ptr<corpus::NGramCounts> ngrams;
};

corpus::FrequencyTable value_counts(const knnlm::Datastore& ds, std::size_t domain) {
  corpus::FrequencyTable freq(corpus::FrequencySource::kDatastore, domain);
  for (TokenId v : ds.values) freq.add(v);
  return freq;
}

std::unique_ptr<Loaded> load_for_inference(const PipelineConfig& cfg, bool context_counts) {
  auto a = std::make_unique<Loaded>();
  a->train = corpus::read_corpus(artifact(cfg, "train.bin"));
  a->test = corpus::read_corpus(artifact(cfg, "test.bin"));
  a->ds = knnlm::load_datastore(artifact(cfg, "datastore.bin"), cfg.encoder.dim);
  if (a->ds.size() != a->train.token_count()) {
    throw DataError(fmt::format("datastore.bin holds {} entries but train.bin has {} tokens; rerun build",
                                a->ds.size(), a->train.token_count()));
  }
  a->ds_freq = value_counts(a->ds, a->train.vocab_size);
  a->lm = std::make_unique<baselm::NgramLM>(baselm::NgramLM::train(a->train, cfg.lm_order));
  a->encoder = std::make_unique<baselm::ContextEncoder>(cfg.encoder, a->train.vocab_size);
  if (cfg.index_kind == IndexKind::kFlat) {
    a->flat = std::make_unique<vindex::FlatIndex>(a->ds.dim, a->ds.keys, a->ds.values);
    a->retriever = std::make_unique<knnlm::FlatRetriever>(*a->flat);
  } else {
    a->ivfpq = std::make_unique<vindex::IvfPqIndex>(vindex::IvfPqIndex::load(artifact(cfg, "index.bin")));
    if (a->ivfpq->size() != a->ds.size()) throw DataError("index.bin and datastore.bin differ in size");
    a->retriever = std::make_unique<knnlm::IvfPqRetriever>(*a->ivfpq, cfg.knn.nprobe,
                                                           cfg.knn.exact_rescore ? &a->ds : nullptr);
  }
  if (!cfg.pretrain_freq.empty()) {
    a->pretrain = std::make_unique<corpus::FrequencyTable>(
        corpus::read_frequency_tsv(cfg.pretrain_freq, corpus::FrequencySource::kPretraining, a->train.vocab_size));
  }
  if (context_counts) {
    a->ngrams = std::make_unique<corpus::NGramCounts>(a->train, knnlm::kContextOrders);
  }
  return a;
}

knnlm::EvalContext context_of(const Loaded& a) {
  return knnlm::EvalContext{*a.lm, *a.encoder, *a.retriever, a.ds_freq, a.pretrain.get(), a.ngrams.get()};
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); }

}  // namespace

std::string artifact(const PipelineConfig& cfg, std::string_view name) {
  return (std::filesystem::path(cfg.out_dir) / std::string(name)).string();
}

void cmd_synth(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) throw config::ConfigError("synth needs paths.corpus as its output path");
  prepare(cfg, "synth");
  auto params = cfg.synth;
  params.seed = cfg.seed;
  const auto corpus = synth::generate_zipf_corpus(params);
  std::ofstream out(cfg.corpus, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open {} for writing", cfg.corpus));
  fmt::memory_buffer buf;
  for (const auto& doc : corpus.docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      fmt::format_to(std::back_inserter(buf), "{}t{}", i == 0 ? "" : " ", doc[i] - 1);
    }
    fmt::format_to(std::back_inserter(buf), "\n\n");
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(fmt::format("write to {} failed", cfg.corpus));
  fmt::print("synth: {} documents, {} tokens -> {}\n", corpus.docs.size(), corpus.token_count(), cfg.corpus);
}

void cmd_resplit(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) throw config::ConfigError("resplit needs paths.corpus");
  prepare(cfg, "resplit");
  const auto texts = corpus::read_text_documents(cfg.corpus);
  std::vector<std::vector<std::string>> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) docs.push_back(corpus::tokenize(t));
  const auto vocab = corpus::build_vocab(docs, cfg.min_count);
  const auto all = corpus::encode(docs, vocab);
  if (cfg.target_eval_tokens >= all.token_count()) {
    throw DataError(fmt::format("resplit.target_eval_tokens {} must be below the corpus size {}", cfg.target_eval_tokens,
                                all.token_count()));
  }
  const auto split = corpus::resplit(all, cfg.target_eval_tokens, cfg.seed);

  corpus::write_vocab(artifact(cfg, "vocab.txt"), vocab);
  corpus::write_corpus(artifact(cfg, "train.bin"), split.train);
  corpus::write_corpus(artifact(cfg, "valid.bin"), split.valid);
  corpus::write_corpus(artifact(cfg, "test.bin"), split.test);

  const auto train_freq = corpus::count_tokens(split.train);
  const diagnostics::FrequencyBins bins(std::max<std::uint64_t>(train_freq.max_count(), 1), cfg.bins_per_decade);
  const corpus::Corpus* parts[] = {&split.train, &split.valid, &split.test};
  const char* names[] = {"train", "valid", "test"};

  std::string stats = "split,docs,tokens,rare_tokens,rare_share\n";
  std::vector<std::vector<std::uint64_t>> hist(3, std::vector<std::uint64_t>(bins.size(), 0));
  for (int p = 0; p < 3; ++p) {
    std::uint64_t rare = 0;
    for (const auto& doc : parts[p]->docs) {
      for (TokenId t : doc) {
        const auto c = train_freq.count(t);
        if (c < kRareThreshold) ++rare;
        ++hist[p][bins.bin_of(c)];
      }
    }
    const auto tokens = parts[p]->token_count();
    stats += fmt::format("{},{},{},{},{:.17g}\n", names[p], parts[p]->docs.size(), tokens, rare,
                         tokens == 0 ? 0.0 : static_cast<double>(rare) / static_cast<double>(tokens));
  }
  write_text(artifact(cfg, "split_stats.csv"), stats);

  std::string histogram = "bin_lo,bin_hi,train,valid,test\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    histogram += fmt::format("{},{},{},{},{}\n", bins.lo(b), bins.hi(b), hist[0][b], hist[1][b], hist[2][b]);
  }
  write_text(artifact(cfg, "rare_histogram.csv"), histogram);

  fmt::print("resplit: vocab {}, train {} / valid {} / test {} tokens\n", vocab.size(),
             split.train.token_count(), split.valid.token_count(), split.test.token_count());
}

void cmd_build(const PipelineConfig& cfg) {
  prepare(cfg, "build");
  const auto train = corpus::read_corpus(artifact(cfg, "train.bin"));
  knnlm::Datastore ds;
  if (cfg.keys_import.empty()) {
    const baselm::ContextEncoder encoder(cfg.encoder, train.vocab_size);
    ds = knnlm::build_datastore(train, encoder);
  } else {
    baselm::EmbeddingReader reader(cfg.keys_import, cfg.encoder.dim);
    ds = knnlm::build_datastore(reader, cfg.encoder.dim);
    if (ds.size() != train.token_count()) {
      throw DataError(fmt::format("imported keys hold {} entries but train.bin has {} tokens", ds.size(),
                                  train.token_count()));
    }
  }
  if (ds.size() == 0) throw DataError("train split is empty");
  knnlm::save_datastore(artifact(cfg, "datastore.bin"), ds);

  if (cfg.index_kind == IndexKind::kIvfPq) {
    auto params = cfg.ivfpq;
    params.seed = cfg.seed;
    const auto index = vindex::IvfPqIndex::build(ds.keys, ds.dim, ds.values, params);
    index.save(artifact(cfg, "index.bin"));
    fmt::print("build: {} entries, dim {}, ivfpq {} lists\n", ds.size(), ds.dim, index.nlist());
  } else {
    fmt::print("build: {} entries, dim {}, flat index\n", ds.size(), ds.dim);
  }
}

void cmd_eval(const PipelineConfig& cfg) {
  prepare(cfg, "eval");
  const auto a = load_for_inference(cfg, true);
  const auto result = knnlm::eval_ppl(context_of(*a), cfg.knn, a->test);
  std::uint64_t hits = 0;
  for (const auto& r : result.records) hits += r.hit ? 1 : 0;
  const double hit_rate = static_cast<double>(hits) / static_cast<double>(result.records.size());
  write_text(artifact(cfg, "eval_summary.csv"),
             fmt::format("split,tokens,ppl_base,ppl_knnlm,hit_rate\ntest,{},{:.17g},{:.17g},{:.17g}\n",
                         result.records.size(), result.ppl_base, result.ppl_knnlm, hit_rate));
  knnlm::write_records_csv(artifact(cfg, "records.csv"), result.records);
  fmt::print("eval: {} positions, ppl base {:.4f}, knn-lm {:.4f}, hit rate {:.4f}\n", result.records.size(),
             result.ppl_base, result.ppl_knnlm, hit_rate);
}

void cmd_diagnose(const PipelineConfig& cfg) {
  prepare(cfg, "diagnose");
  const auto records = knnlm::read_records_csv(artifact(cfg, "records.csv"));
  const auto train = corpus::read_corpus(artifact(cfg, "train.bin"));
  const auto ds = knnlm::load_datastore(artifact(cfg, "datastore.bin"), cfg.encoder.dim);
  const auto freq = value_counts(ds, train.vocab_size);
  for (const auto& r : records) {
    if (r.target >= train.vocab_size) throw DataError("records.csv refers to ids outside the vocabulary");
  }
  std::unique_ptr<vindex::IvfPqIndex> index;
  if (cfg.index_kind == IndexKind::kIvfPq) {
    index = std::make_unique<vindex::IvfPqIndex>(vindex::IvfPqIndex::load(artifact(cfg, "index.bin")));
    if (index->size() != ds.size()) throw DataError("index.bin and datastore.bin differ in size");
  }

  const diagnostics::FrequencyBins bins(std::max<std::uint64_t>(freq.max_count(), 1), cfg.bins_per_decade);
  diagnostics::emit_report(diagnostics::probability_report(records, freq, bins),
                           artifact(cfg, "prob_by_datastore_freq.csv"));

  // Pre-training frequencies come from the records themselves.
  const bool have_pretrain = !records.empty() && records.front().freq_pretrain.has_value();
  diagnostics::DiagnosticsReport pretrain_report;
  if (have_pretrain) {
    std::vector<std::uint64_t> counts;
    counts.reserve(records.size());
    for (const auto& r : records) {
      if (!r.freq_pretrain) throw DataError("records.csv mixes rows with and without freq_pretrain");
      counts.push_back(*r.freq_pretrain);
    }
    const auto max_count = *std::max_element(counts.begin(), counts.end());
    const diagnostics::FrequencyBins pbins(std::max<std::uint64_t>(max_count, 1), cfg.bins_per_decade);
    pretrain_report = diagnostics::expected_prob_by_bin(records, counts, pbins);
  }
  diagnostics::emit_report(pretrain_report, artifact(cfg, "prob_by_pretrain_freq.csv"));

  diagnostics::DatastoreOptions options;
  options.contamination_per_type = cfg.contamination_per_type;
  options.seed = cfg.seed;
  options.contamination = ds.size() >= 2;
  const auto types = diagnostics::datastore_type_stats(ds, train.vocab_size, index.get(), options);
  diagnostics::emit_report(diagnostics::datastore_report(types, bins), artifact(cfg, "datastore_by_freq.csv"));

  std::vector<std::optional<double>> error_by_type(train.vocab_size);
  for (const auto& t : types) error_by_type[t.token] = t.mean_pq_error;
  const auto gains = diagnostics::gain_vs_error(records, error_by_type);
  diagnostics::emit_type_table(gains, freq, artifact(cfg, "per_type.csv"));

  const auto tertiles = diagnostics::categorize_tertiles(freq);
  diagnostics::emit_tertiles(diagnostics::tertile_report(records, tertiles), artifact(cfg, "tertiles.csv"));

  // Target frequency against context n-gram frequency, one row per order.
  std::string corr = "analysis,method,n,value\n";
  std::vector<double> target_freq;
  for (const auto& r : records) target_freq.push_back(static_cast<double>(r.freq_datastore));
  for (std::size_t n = 1; n <= knnlm::kContextOrders; ++n) {
    std::vector<double> ctx;
    std::vector<std::uint64_t> counts;
    for (const auto& r : records) {
      ctx.push_back(static_cast<double>(r.ctx_ngram_count[n - 1]));
      counts.push_back(r.ctx_ngram_count[n - 1]);
    }
    std::optional<double> value;
    if (records.size() >= 2) value = diagnostics::correlate(target_freq, ctx, diagnostics::CorrelationMethod::kPearson);
    corr += fmt::format("target_freq_vs_context_ngram_n{},pearson,{},{}\n", n, records.size(), fmt_opt(value));

    const auto max_count = counts.empty() ? 1 : *std::max_element(counts.begin(), counts.end());
    const diagnostics::FrequencyBins cbins(std::max<std::uint64_t>(max_count, 1), cfg.bins_per_decade);
    diagnostics::emit_report(diagnostics::expected_prob_by_bin(records, counts, cbins),
                             artifact(cfg, fmt::format("prob_by_context_ngram_n{}.csv", n)));
  }
  corr += fmt::format("gain_vs_pq_error,pearson,{},{}\n", gains.tokens.size(), fmt_opt(gains.pearson));
  corr += fmt::format("gain_vs_pq_error,spearman,{},{}\n", gains.tokens.size(), fmt_opt(gains.spearman));
  write_text(artifact(cfg, "correlations.csv"), corr);

  fmt::print("diagnose: {} records, {} types, {} frequency bins\n", records.size(), types.size(), bins.size());
}

void cmd_sweep(const PipelineConfig& cfg) {
  prepare(cfg, "sweep");
  const auto a = load_for_inference(cfg, false);
  const auto tertiles = diagnostics::categorize_tertiles(a->ds_freq);
  std::vector<std::size_t> ks(cfg.sweep_k.begin(), cfg.sweep_k.end());
  const auto rows = diagnostics::sweep(context_of(*a), ks, cfg.sweep_tau, a->test, tertiles);
  diagnostics::emit_sweep(rows, artifact(cfg, "sweep.csv"));
  fmt::print("sweep: {} k x {} tau over {} positions, {} searches\n", ks.size(), cfg.sweep_tau.size(),
             a->test.token_count(), a->retriever->calls());
}

}  // namespace tailknn::pipeline
