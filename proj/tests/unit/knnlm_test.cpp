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

#include <cmath>
#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/rng.hpp"

namespace tailknn::knnlm {
namespace {

using vindex::Neighbor;

corpus::Corpus make_corpus(std::uint32_t vocab, std::vector<corpus::Document> docs) {
  corpus::Corpus c;
  c.vocab_size = vocab;
  c.docs = std::move(docs);
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tailknn_knnlm_" + name)).string();
}

std::vector<Neighbor> random_neighbors(Rng& rng, std::size_t k, std::uint32_t vocab) {
  std::vector<Neighbor> n(k);
  for (std::size_t i = 0; i < k; ++i) {
    n[i].id = static_cast<std::uint32_t>(i);
    n[i].distance = static_cast<float>(rng.uniform01() * 50.0);
    n[i].value = static_cast<TokenId>(rng.below(vocab));
  }
  return n;
}

TEST(BuildDatastore, SingleTokenCorpus) {
  const baselm::ContextEncoder enc({}, 6);
  const auto ds = build_datastore(make_corpus(6, {{5}}), enc);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.values[0], 5u);
  EXPECT_EQ(std::vector<float>(ds.keys.begin(), ds.keys.end()), std::vector<float>(64, 0.0f));
}

TEST(BuildDatastore, OneEntryPerPositionWithDocumentReset) {
  const baselm::ContextEncoder enc({}, 10);
  const auto c = make_corpus(10, {{1, 2, 3}, {4, 5}, {}, {6}});
  const auto ds = build_datastore(c, enc);
  ASSERT_EQ(ds.size(), c.token_count());
  EXPECT_EQ(ds.values, (std::vector<TokenId>{1, 2, 3, 4, 5, 6}));
  // Entry 3 starts the second document: empty context.
  for (float x : ds.key(3)) EXPECT_EQ(x, 0.0f);
  EXPECT_EQ(std::vector<float>(ds.key(4).begin(), ds.key(4).end()), enc.encode(std::vector<TokenId>{4}));
  EXPECT_EQ(ds.source_hash, corpus_hash(c));
}

TEST(BuildDatastore, ValueCountsEqualTokenCounts) {
  Rng rng(1);
  auto c = make_corpus(40, {});
  for (int d = 0; d < 30; ++d) {
    corpus::Document doc(rng.below(50));
    for (auto& t : doc) t = static_cast<TokenId>(rng.below(40));
    c.docs.push_back(doc);
  }
  const auto ds = build_datastore(c, baselm::ContextEncoder({}, 40));
  const auto table = corpus::count_tokens(c);
  std::vector<std::uint64_t> recount(40, 0);
  for (TokenId v : ds.values) ++recount[v];
  for (TokenId t = 0; t < 40; ++t) EXPECT_EQ(recount[t], table.count(t));
}

TEST(BuildDatastore, ImportStreamAndDimensionCheck) {
  const auto path = temp_path("keys.bin");
  std::vector<float> keys = {1, 2, 3, 4, 5, 6};
  baselm::write_key_file(path, 3, keys, std::vector<TokenId>{7, 8});
  baselm::EmbeddingReader reader(path);
  const auto ds = build_datastore(reader, 3);
  EXPECT_EQ(ds.values, (std::vector<TokenId>{7, 8}));
  EXPECT_EQ(ds.keys, keys);
  EXPECT_EQ(ds.source_hash, 0u);
  baselm::EmbeddingReader again(path);
  EXPECT_THROW(build_datastore(again, 4), DataError);
}

TEST(Datastore, SaveLoadRoundTrip) {
  const baselm::ContextEncoder enc({}, 10);
  const auto ds = build_datastore(make_corpus(10, {{1, 2, 3}, {4}}), enc);
  const auto path = temp_path("ds.bin");
  save_datastore(path, ds);
  EXPECT_EQ(std::filesystem::file_size(path), baselm::kKeyFileHeaderBytes + 4 * (64 * 4 + 4));
  const auto back = load_datastore(path, 64);
  EXPECT_EQ(back.keys, ds.keys);
  EXPECT_EQ(back.values, ds.values);
  EXPECT_THROW(load_datastore(path, 32), DataError);
}

TEST(KnnProb, SingleNeighbor) {
  const auto p = knn_prob(std::vector<Neighbor>{{0, 123.0f, 4}}, 10.0);
  EXPECT_DOUBLE_EQ(p(4), 1.0);
  EXPECT_DOUBLE_EQ(p(3), 0.0);
}

TEST(KnnProb, TwoNeighborsHandEvaluated) {
  const double tau = 10.0;
  const auto d = static_cast<float>(tau * std::log(3.0));
  const auto p = knn_prob(std::vector<Neighbor>{{0, 0.0f, 1}, {1, d, 2}}, tau);
  EXPECT_NEAR(p(1), 0.75, 1e-6);
  EXPECT_NEAR(p(2), 0.25, 1e-6);
}

TEST(KnnProb, InfiniteTemperatureIsRelativeCount) {
  const auto p = knn_prob(std::vector<Neighbor>{{0, 0.0f, 1}, {1, 3.0f, 1}, {2, 9.0f, 2}, {3, 40.0f, 3}}, 1e9);
  EXPECT_NEAR(p(1), 0.5, 1e-6);
  EXPECT_NEAR(p(2), 0.25, 1e-6);
  EXPECT_NEAR(p(3), 0.25, 1e-6);
}

TEST(KnnProb, EmptyNeighborSetIsFlagged) {
  const auto p = knn_prob(std::vector<Neighbor>{}, 1.0);
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(p(0), 0.0);
}

TEST(KnnProb, NormalizedOverRetrievedValues) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = random_neighbors(rng, 1 + rng.below(64), 20);
    const auto p = knn_prob(n, 0.1 + rng.uniform01() * 20.0);
    double sum = 0.0;
    for (const auto& [t, v] : p.probs) {
      EXPECT_GT(v, 0.0);
      EXPECT_TRUE(contains_value(n, t));
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(KnnProb, MatchesDirectSoftmax) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = random_neighbors(rng, 1 + rng.below(30), 8);
    const double tau = 1.0 + rng.uniform01() * 30.0;
    std::vector<double> w(8, 0.0);
    double total = 0.0;
    for (const auto& x : n) {
      const double e = std::exp(-static_cast<double>(x.distance) / tau);
      w[x.value] += e;
      total += e;
    }
    const auto p = knn_prob(n, tau);
    for (TokenId t = 0; t < 8; ++t) EXPECT_NEAR(p(t), w[t] / total, 1e-12);
  }
}

TEST(KnnProb, TemperatureMovesTowardUniform) {
  const std::vector<Neighbor> n = {{0, 1.0f, 1}, {1, 4.0f, 2}};
  double prev = 1.0;
  for (double tau : {0.5, 1.0, 2.0, 5.0, 20.0, 100.0}) {
    const double pa = knn_prob(n, tau)(1);
    EXPECT_LT(pa, prev);
    EXPECT_GT(pa, 0.5);
    prev = pa;
  }
}

TEST(KnnProb, JointScalingInvariance) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto n = random_neighbors(rng, 1 + rng.below(20), 6);
    const double tau = 1.0 + rng.uniform01() * 10.0;
    const auto base = knn_prob(n, tau);
    for (auto& x : n) x.distance *= 4.0f;  // exact power-of-two scaling
    const auto scaled = knn_prob(n, tau * 4.0);
    for (TokenId t = 0; t < 6; ++t) EXPECT_NEAR(base(t), scaled(t), 1e-9);
  }
}

TEST(KnnProb, UnderflowKeepsRetrievedMassPositive) {
  const auto p = knn_prob(std::vector<Neighbor>{{0, 0.0f, 1}, {1, 1e6f, 2}}, 1e-3);
  EXPECT_GT(p(2), 0.0);
  EXPECT_NEAR(p(1), 1.0, 1e-12);
}

TEST(Interpolate, Examples) {
  EXPECT_EQ(interpolate(0.9, 0.3, 0.0), 0.3);
  EXPECT_EQ(interpolate(0.9, 0.3, 1.0), 0.9);
  EXPECT_NEAR(interpolate(0.137, 0.518, 0.25), 0.42275, 1e-12);
}

TEST(Interpolate, DenseFormSumsToOneAndFallsBack) {
  const std::vector<double> lm = {0.1, 0.2, 0.3, 0.4};
  SparseDist knn;
  knn.probs = {{1, 0.25}, {3, 0.75}};
  const auto p = interpolate(knn, lm, 0.25);
  double sum = 0.0;
  for (TokenId t = 0; t < 4; ++t) {
    EXPECT_NEAR(p[t], 0.25 * knn(t) + 0.75 * lm[t], 1e-15);
    sum += p[t];
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(interpolate(SparseDist{}, lm, 0.7), lm);
  const auto only_knn = interpolate(knn, lm, 1.0);
  EXPECT_EQ(only_knn, (std::vector<double>{0.0, 0.25, 0.0, 0.75}));
  EXPECT_THROW(interpolate(knn, lm, 1.5), std::invalid_argument);
}

TEST(Interpolate, DominanceOverGrid) {
  for (int a = 0; a <= 100; ++a) {
    for (int b = 0; b <= 100; ++b) {
      for (int l = 1; l <= 19; ++l) {
        const double pk = a / 100.0;
        const double pl = b / 100.0;
        const double p = interpolate(pk, pl, l * 0.05);
        ASSERT_EQ(p > pl, pk > pl) << pk << " " << pl << " " << l;
      }
    }
  }
}

TEST(KnnConfig, Validation) {
  KnnConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.k, 1024u);
  EXPECT_EQ(c.temperature, 10.0);
  EXPECT_EQ(c.lambda, 0.25);
  c.k = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.lambda = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

struct Fixture {
  corpus::Corpus train;
  baselm::ContextEncoder encoder;
  Datastore ds;
  vindex::FlatIndex flat;
  corpus::FrequencyTable freq;

  explicit Fixture(corpus::Corpus c, std::uint32_t vocab)
      : train(std::move(c)),
        encoder({}, vocab),
        ds(build_datastore(train, encoder)),
        flat(ds.dim, ds.keys, ds.values),
        freq(corpus::count_tokens(train)) {}
};

TEST(EvalPpl, UniformLmWithZeroLambdaGivesVocabularySize) {
  Fixture f(make_corpus(7, {{1, 2, 3, 4}}), 7);
  const auto uniform = baselm::NgramLM::train(make_corpus(7, {{}}), 1);
  FlatRetriever retriever(f.flat);
  KnnConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.0;
  const auto r = eval_ppl({uniform, f.encoder, retriever, f.freq}, cfg, make_corpus(7, {{1, 5, 6}, {2}}));
  EXPECT_NEAR(r.ppl_base, 7.0, 1e-12);
  EXPECT_EQ(r.ppl_knnlm, r.ppl_base);
  EXPECT_EQ(r.records.size(), 4u);
  EXPECT_EQ(retriever.calls(), 4u);
}

TEST(EvalPpl, HeldInTextHitsAtRepeatedContexts) {
  // Ten tokens; with window 8 the contexts are all distinct except the two
  // empty document-initial ones.
  const auto c = make_corpus(6, {{1, 2, 3, 1, 2}, {4, 5, 1, 2, 3}});
  Fixture f(c, 6);
  const auto lm = baselm::NgramLM::train(c, 2);
  FlatRetriever retriever(f.flat);
  KnnConfig cfg;
  cfg.k = 1;
  const auto r = eval_ppl({lm, f.encoder, retriever, f.freq}, cfg, c);
  ASSERT_EQ(r.records.size(), 10u);
  for (const auto& rec : r.records) {
    // Position 5 shares the empty context with position 0, whose entry
    // (id 0, value 1) wins the tie; every other context finds itself.
    if (rec.position == 5) {
      EXPECT_FALSE(rec.hit);
    } else {
      EXPECT_TRUE(rec.hit) << rec.position;
    }
    EXPECT_EQ(rec.hit, rec.p_knn > 0.0);
    EXPECT_EQ(rec.freq_datastore, f.freq.count(rec.target));
  }
}

TEST(EvalPpl, LambdaOneWithMissIsInfinite) {
  Fixture f(make_corpus(5, {{1, 1, 1}}), 5);
  const auto lm = baselm::NgramLM::train(f.train, 1);
  FlatRetriever retriever(f.flat);
  KnnConfig cfg;
  cfg.k = 1;
  cfg.lambda = 1.0;
  const auto r = eval_ppl({lm, f.encoder, retriever, f.freq}, cfg, make_corpus(5, {{2}}));
  EXPECT_TRUE(std::isinf(r.ppl_knnlm));
  EXPECT_THROW(eval_ppl({lm, f.encoder, retriever, f.freq}, cfg, make_corpus(5, {{}})), DataError);
}

TEST(EvalPpl, ContextCountsAndPretrainFrequency) {
  const auto c = make_corpus(6, {{1, 2, 1, 2, 3}});
  Fixture f(c, 6);
  const auto lm = baselm::NgramLM::train(c, 3);
  const corpus::NGramCounts ngrams(c, 5);
  corpus::FrequencyTable pre(corpus::FrequencySource::kPretraining, 6);
  pre.add(2, 1000);
  FlatRetriever retriever(f.flat);
  KnnConfig cfg;
  cfg.k = 3;
  const auto r = eval_ppl({lm, f.encoder, retriever, f.freq, &pre, &ngrams}, cfg, make_corpus(6, {{1, 2, 3}}));
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[1].freq_pretrain, std::optional<std::uint64_t>(1000));
  EXPECT_EQ(r.records[0].freq_pretrain, std::optional<std::uint64_t>(0));
  // Position 2 has context (1, 2): count(2) = 2, count(1 2) = 2, longer
  // orders fall back to the available prefix.
  EXPECT_EQ(r.records[2].ctx_ngram_count, (std::array<std::uint64_t, 5>{2, 2, 2, 2, 2}));
  EXPECT_EQ(r.records[0].ctx_ngram_count, (std::array<std::uint64_t, 5>{5, 5, 5, 5, 5}));
  const auto expected_base = std::exp(
      -(std::log(r.records[0].p_lm) + std::log(r.records[1].p_lm) + std::log(r.records[2].p_lm)) / 3.0);
  EXPECT_NEAR(r.ppl_base, expected_base, 1e-12);
}

TEST(Retrievers, RescoreGivesExactDistances) {
  Rng rng(5);
  std::vector<float> keys(2000 * 8);
  for (auto& x : keys) x = static_cast<float>(rng.uniform01());
  Datastore ds;
  ds.dim = 8;
  ds.keys = keys;
  ds.values.assign(2000, 1);
  vindex::IvfPqConfig cfg;
  cfg.centroids = 8;
  cfg.code_size = 2;
  cfg.nbits = 4;
  const auto index = vindex::IvfPqIndex::build(ds.keys, 8, ds.values, cfg);
  const IvfPqRetriever adc(index, 100);  // clamped to nlist
  const IvfPqRetriever exact(index, 8, &ds);
  const std::vector<float> q(8, 0.5f);
  const auto a = adc.search(q, 10);
  const auto e = exact.search(q, 10);
  ASSERT_EQ(a.size(), 10u);
  ASSERT_EQ(e.size(), 10u);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_EQ(e[i].distance, vindex::l2_sqr(q, ds.key(e[i].id)));
    if (i > 0) {
      EXPECT_LE(e[i - 1].distance, e[i].distance);
    }
  }
  Datastore wrong = ds;
  wrong.values.pop_back();
  wrong.keys.resize(wrong.keys.size() - 8);
  EXPECT_THROW(IvfPqRetriever(index, 8, &wrong), DataError);
}

TEST(RecordsCsv, RoundTripIsExact) {
  std::vector<EvalRecord> recs(3);
  recs[0] = {0, 5, 12, std::nullopt, 0.1, 0.0, 0.075, false, {1, 2, 3, 4, 5}};
  recs[1] = {1, 6, 0, 77, 1.0 / 3.0, 2.0 / 7.0, 0.123456789012345678, true, {9, 8, 7, 6, 5}};
  recs[2] = {2, 0, 3, std::nullopt, 5e-300, 1.0, std::nextafter(1.0, 0.0), true, {}};
  const auto path = temp_path("records.csv");
  write_records_csv(path, recs);
  const auto back = read_records_csv(path);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].position, recs[i].position);
    EXPECT_EQ(back[i].target, recs[i].target);
    EXPECT_EQ(back[i].freq_datastore, recs[i].freq_datastore);
    EXPECT_EQ(back[i].freq_pretrain, recs[i].freq_pretrain);
    EXPECT_EQ(back[i].p_lm, recs[i].p_lm);
    EXPECT_EQ(back[i].p_knn, recs[i].p_knn);
    EXPECT_EQ(back[i].p_interp, recs[i].p_interp);
    EXPECT_EQ(back[i].hit, recs[i].hit);
    EXPECT_EQ(back[i].ctx_ngram_count, recs[i].ctx_ngram_count);
  }
  std::ofstream(path) << "not,a,header\n";
  EXPECT_THROW(read_records_csv(path), DataError);
}

}  // namespace
}  // namespace tailknn::knnlm
