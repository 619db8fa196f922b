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

// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "tailknn/baselm.hpp"
#include "tailknn/corpus.hpp"
#include "tailknn/diagnostics.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/rng.hpp"
#include "tailknn/synth.hpp"
#include "tailknn/vindex.hpp"

namespace {

using namespace tailknn;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int g_failures = 0;

void report(int id, const char* name, double limit_s, double elapsed_s, const Outcome& o) {
  const bool pass = o.pass && elapsed_s < limit_s;
  if (!pass) ++g_failures;
  std::printf("%s [%2d] %s: %s (%.1f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
              elapsed_s, limit_s);
  std::fflush(stdout);
}

void run(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  const Stopwatch sw;
  const Outcome o = fn();
  report(id, name, limit_s, sw.seconds(), o);
}

std::vector<float> uniform_matrix(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<float> v(n * dim);
  for (auto& x : v) x = static_cast<float>(rng.uniform01() * 2.0 - 1.0);
  return v;
}

// Multiples of 1/4 in [-2, 2]: sums of squared differences are exact in float.
std::vector<float> grid_matrix(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<float> v(n * dim);
  for (auto& x : v) x = static_cast<float>(static_cast<int>(rng.below(17)) - 8) / 4.0f;
  return v;
}

bool same(const vindex::NeighborSet& got, const std::vector<oracle::Hit>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].id != want[i].id || got[i].distance != want[i].dist) return false;
  }
  return true;
}

// ---- 1 ---------------------------------------------------------------------

Outcome exact_search_oracle() {
  constexpr std::size_t kDim = 64;
  constexpr std::size_t kQueries = 4;
  Rng rng(101);
  std::size_t checks = 0;
  std::size_t mismatches = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(5000);
    // Every third instance uses grid data, which produces distance ties.
    const auto keys = inst % 3 == 2 ? grid_matrix(n, kDim, rng) : uniform_matrix(n, kDim, rng);
    const auto queries = inst % 3 == 2 ? grid_matrix(kQueries, kDim, rng) : uniform_matrix(kQueries, kDim, rng);
    const vindex::FlatIndex index(kDim, keys);
    for (std::size_t k : {1, 16, 256}) {
      for (std::size_t q = 0; q < kQueries; ++q) {
        const float* query = queries.data() + q * kDim;
        const auto got = index.search(std::span<const float>(query, kDim), k);
        ++checks;
        if (!same(got, oracle::brute_knn(keys, kDim, query, k))) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt::format("{} searches over 100 instances, {} mismatches", checks, mismatches)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome knn_prob_suite() {
  Rng rng(202);
  double worst_norm = 0.0;
  double worst_limit = 0.0;
  double worst_scale = 0.0;
  for (int set = 0; set < 10000; ++set) {
    const std::size_t k = 1 + rng.below(256);
    vindex::NeighborSet nb(k);
    for (std::size_t i = 0; i < k; ++i) {
      nb[i].id = static_cast<std::uint32_t>(i);
      nb[i].value = static_cast<TokenId>(rng.below(40));
      nb[i].distance = static_cast<float>(rng.uniform01() * 100.0);
    }
    const double tau = std::pow(10.0, rng.uniform01() * 4.0 - 2.0);
    const auto p = knnlm::knn_prob(nb, tau);
    double total = 0.0;
    for (const auto& [tok, v] : p.probs) total += v;
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));

    const auto flat = knnlm::knn_prob(nb, 1e9);
    for (TokenId v = 0; v < 40; ++v) {
      const auto count = std::count_if(nb.begin(), nb.end(), [v](const auto& n) { return n.value == v; });
      worst_limit = std::max(worst_limit, std::abs(flat(v) - static_cast<double>(count) / static_cast<double>(k)));
    }

    // Powers of two keep the scaled float distances exact.
    const double s = std::ldexp(1.0, static_cast<int>(rng.below(9)) - 4);
    auto scaled = nb;
    for (auto& n : scaled) n.distance = static_cast<float>(n.distance * s);
    const auto ps = knnlm::knn_prob(scaled, tau * s);
    if (ps.probs.size() != p.probs.size()) return {false, "scaling changed the support"};
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
      worst_scale = std::max(worst_scale, std::abs(ps.probs[i].second - p.probs[i].second));
    }
  }
  const bool pass = worst_norm < 1e-9 && worst_limit < 1e-6 && worst_scale < 1e-9;
  return {pass, fmt::format("10000 sets, max |sum-1| {:.2e}, max |p-count/k| at tau 1e9 {:.2e}, "
                            "max scaling drift {:.2e}",
                            worst_norm, worst_limit, worst_scale)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome dominance_grid() {
  std::size_t cases = 0;
  std::size_t violations = 0;
  for (int a = 0; a <= 100; ++a) {
    for (int b = 0; b <= 100; ++b) {
      for (int l = 1; l <= 19; ++l) {
        const double p_knn = a / 100.0;
        const double p_lm = b / 100.0;
        const double p = knnlm::interpolate(p_knn, p_lm, l / 20.0);
        ++cases;
        if ((p > p_lm) != (p_knn > p_lm)) ++violations;
      }
    }
  }
  return {violations == 0, fmt::format("{} grid points, {} violations", cases, violations)};
}

// ---- 4 ---------------------------------------------------------------------

struct ExactnessTally {
  std::size_t errors_nonzero = 0;
  std::size_t searches = 0;
  std::size_t mismatches = 0;
};

void check_degenerate(std::span<const float> keys, std::size_t dim, const vindex::IvfPqConfig& cfg, Rng& rng,
                      ExactnessTally& tally) {
  const std::size_t n = keys.size() / dim;
  std::vector<TokenId> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<TokenId>(i % 97);
  const auto index = vindex::IvfPqIndex::build(keys, dim, values, cfg);
  const vindex::FlatIndex flat(dim, std::vector<float>(keys.begin(), keys.end()), values);
  for (std::uint32_t id = 0; id < n; ++id) {
    if (index.reconstruction_error(id, flat.key(id)) != 0.0) ++tally.errors_nonzero;
  }
  const auto queries = grid_matrix(50, dim, rng);
  for (std::size_t q = 0; q < 50; ++q) {
    const std::span<const float> x(queries.data() + q * dim, dim);
    for (std::size_t k : {1, 16, 100}) {
      ++tally.searches;
      if (index.search(x, k, index.nlist()) != flat.search(x, k)) ++tally.mismatches;
    }
  }
}

Outcome pq_degenerate_exactness() {
  constexpr std::size_t kDim = 16;
  constexpr std::size_t kM = 4;
  constexpr std::size_t kSub = kDim / kM;
  Rng rng(404);
  ExactnessTally tally;
  for (int rep = 0; rep < 3; ++rep) {
    // One coarse list. Keys come in +/- pairs so the coarse centroid is
    // exactly zero, and each subspace draws from 128 grid subvectors and
    // their negations, so 2^8 codewords cover every distinct subvector.
    const auto pool = grid_matrix(128, kSub, rng);
    std::vector<float> keys;
    for (std::size_t i = 0; i < 1000; ++i) {
      std::vector<float> key(kDim);
      for (std::size_t s = 0; s < kM; ++s) {
        const std::size_t pick = rng.below(128);
        const float sign = rng.below(2) == 0 ? 1.0f : -1.0f;
        for (std::size_t d = 0; d < kSub; ++d) key[s * kSub + d] = sign * pool[pick * kSub + d];
      }
      keys.insert(keys.end(), key.begin(), key.end());
      for (float& x : key) x = -x;
      keys.insert(keys.end(), key.begin(), key.end());
    }
    vindex::IvfPqConfig single;
    single.centroids = 1;
    single.code_size = kM;
    single.nbits = 8;
    single.seed = static_cast<std::uint64_t>(rep);
    check_degenerate(keys, kDim, single, rng, tally);

    // One coarse list per distinct key (each key appears three times), so
    // every residual is zero.
    const auto distinct = grid_matrix(300, kDim, rng);
    std::vector<float> dup;
    for (int copy = 0; copy < 3; ++copy) dup.insert(dup.end(), distinct.begin(), distinct.end());
    vindex::IvfPqConfig per_key;
    per_key.centroids = 300;
    per_key.code_size = kM;
    per_key.nbits = 2;
    per_key.seed = static_cast<std::uint64_t>(rep);
    check_degenerate(dup, kDim, per_key, rng, tally);
  }
  const bool pass = tally.errors_nonzero == 0 && tally.mismatches == 0;
  return {pass, fmt::format("{} nonzero reconstruction errors, {} of {} searches differ from flat",
                            tally.errors_nonzero, tally.mismatches, tally.searches)};
}

// ---- 5 ---------------------------------------------------------------------

Outcome ivfpq_recall() {
  constexpr std::size_t kDim = 64;
  constexpr std::size_t kQueries = 500;
  constexpr std::size_t kTop = 16;
  double sum32 = 0.0;
  double sum_set32 = 0.0;
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::GaussianMixtureParams gp;
    gp.center_scale = 4.0;
    gp.spectrum_decay = 0.5;
    // Keys and queries come from the same mixture; the last kQueries points
    // are held out as queries.
    gp.n = 100000 + kQueries;
    gp.seed = seed;
    const auto pool = synth::gaussian_mixture(gp);
    const std::span<const float> keys = std::span<const float>(pool).first(100000 * kDim);
    const std::span<const float> queries = std::span<const float>(pool).subspan(100000 * kDim);

    vindex::IvfPqConfig cfg;
    cfg.centroids = 256;
    cfg.code_size = 8;
    cfg.nbits = 8;
    cfg.train_sample = 32768;
    cfg.seed = seed;
    const std::vector<TokenId> values(100000, 0);
    const auto index = vindex::IvfPqIndex::build(keys, kDim, values, cfg);
    const vindex::FlatIndex flat(kDim, std::vector<float>(keys.begin(), keys.end()));

    double r1 = 0.0;
    double r32 = 0.0;
    for (std::size_t q = 0; q < kQueries; ++q) {
      const auto x = queries.subspan(q * kDim, kDim);
      const auto exact = flat.search(x, kTop);
      const auto in = [](const vindex::NeighborSet& s, std::uint32_t id) {
        return std::any_of(s.begin(), s.end(), [id](const auto& n) { return n.id == id; });
      };
      const auto a1 = index.search(x, kTop, 1);
      const auto a32 = index.search(x, kTop, 32);
      r1 += in(a1, exact.front().id) ? 1.0 : 0.0;
      r32 += in(a32, exact.front().id) ? 1.0 : 0.0;
      std::size_t overlap = 0;
      for (const auto& e : exact) overlap += in(a32, e.id) ? 1 : 0;
      sum_set32 += static_cast<double>(overlap) / kTop;
    }
    r1 /= kQueries;
    r32 /= kQueries;
    sum32 += r32;
    if (r32 >= r1) ++monotone;
  }
  const double mean32 = sum32 / 20.0;
  const bool pass = mean32 >= 0.85 && monotone == 20;
  return {pass, fmt::format("mean recall@16 at nprobe 32 = {:.4f} (top-16 overlap {:.4f}), "
                            "nprobe 32 >= nprobe 1 on {}/20 seeds",
                            mean32, sum_set32 / (20.0 * kQueries), monotone)};
}

// ---- 6, 7, 9 ---------------------------------------------------------------

struct TrendRun {
  std::optional<double> hit, contamination, cv, pq_error;
  std::uint64_t hit_violations = 0;
  std::uint64_t records = 0;
};

struct HeldIn {
  double ppl_base = 0.0;
  double ppl_knnlm = 0.0;
  double ppl_base_l0 = 0.0;
  double ppl_knnlm_l0 = 0.0;
  std::uint64_t tokens = 0;
  double seconds = 0.0;       // pipeline plus held-in evaluation
  double eval_seconds = 0.0;  // held-in evaluation only
};

TrendRun pipeline(std::uint64_t seed, HeldIn* held_in) {
  const Stopwatch sw;
  synth::ZipfCorpusParams zp;
  zp.tokens = 540000;
  zp.seed = seed;
  const auto corpus = synth::generate_zipf_corpus(zp);
  const auto split = corpus::resplit(corpus, 40000, seed);
  const baselm::ContextEncoder encoder({}, corpus.vocab_size);
  const auto ds = knnlm::build_datastore(split.train, encoder);
  vindex::IvfPqConfig ic;
  ic.train_sample = 65536;
  ic.seed = seed;
  const auto index = vindex::IvfPqIndex::build(ds.keys, ds.dim, ds.values, ic);
  const auto lm = baselm::NgramLM::train(split.train, 3);
  const auto freq = corpus::count_tokens(split.train);
  const knnlm::IvfPqRetriever retriever(index, 32);
  knnlm::KnnConfig kc;
  kc.k = 64;
  kc.temperature = 10.0;
  kc.lambda = 0.25;
  const knnlm::EvalContext ctx{lm, encoder, retriever, freq};
  const auto res = knnlm::eval_ppl(ctx, kc, split.test);

  const diagnostics::FrequencyBins bins(freq.max_count(), 8);
  const auto prob = diagnostics::probability_report(res.records, freq, bins);
  diagnostics::DatastoreOptions opts;
  opts.contamination_per_type = 4;
  opts.seed = seed;
  const auto types = diagnostics::datastore_type_stats(ds, corpus.vocab_size, &index, opts);
  const auto store = diagnostics::datastore_report(types, bins);

  TrendRun out;
  out.hit = diagnostics::bin_trend(prob, diagnostics::Metric::kHitRate);
  out.contamination = diagnostics::bin_trend(store, diagnostics::Metric::kContamination);
  out.cv = diagnostics::bin_trend(store, diagnostics::Metric::kCv);
  out.pq_error = diagnostics::bin_trend(store, diagnostics::Metric::kPqError);
  for (const auto& r : res.records) {
    if (r.hit != (r.p_knn > 0.0)) ++out.hit_violations;
  }
  out.records = res.records.size();

  if (held_in != nullptr) {
    const Stopwatch eval_sw;
    // Every seventh training document until 20k tokens.
    corpus::Corpus held;
    held.vocab_size = split.train.vocab_size;
    for (std::size_t i = 0; i < split.train.docs.size() && held.token_count() < 20000; i += 7) {
      held.docs.push_back(split.train.docs[i]);
    }
    const auto r = knnlm::eval_ppl(ctx, kc, held);
    kc.lambda = 0.0;
    const auto r0 = knnlm::eval_ppl(ctx, kc, held);
    *held_in = {r.ppl_base, r.ppl_knnlm, r0.ppl_base, r0.ppl_knnlm, held.token_count(), sw.seconds(),
                eval_sw.seconds()};
  }
  return out;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:+.2f}", *v) : "n/a"; }

}  // namespace

int main() {
  std::printf("tailknn acceptance\n");
  std::fflush(stdout);
  run(1, "exact-search oracle", 60, exact_search_oracle);
  run(2, "kNN distribution suite", 10, knn_prob_suite);
  run(3, "interpolation dominance", 1, dominance_grid);
  run(4, "PQ degenerate exactness", 30, pq_degenerate_exactness);
  run(5, "IVFPQ recall", 300, ivfpq_recall);

  // Criterion 7 reuses the first trend seed's pipeline; criterion 9 checks
  // the records of every trend run.
  HeldIn held;
  std::vector<TrendRun> runs;
  {
    const Stopwatch sw;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      runs.push_back(pipeline(seed, seed == 1 ? &held : nullptr));
      const auto& r = runs.back();
      std::printf("     seed %llu: hit %s, contamination %s, cv %s, pq error %s\n",
                  static_cast<unsigned long long>(seed), fmt_opt(r.hit).c_str(), fmt_opt(r.contamination).c_str(),
                  fmt_opt(r.cv).c_str(), fmt_opt(r.pq_error).c_str());
      std::fflush(stdout);
    }
    const double trend_seconds = sw.seconds() - held.eval_seconds;
    int hit = 0, cont = 0, cv = 0, pq = 0;
    for (const auto& r : runs) {
      hit += r.hit && *r.hit > 0.0;
      cont += r.contamination && *r.contamination < 0.0;
      cv += r.cv && *r.cv < 0.0;
      pq += r.pq_error && *r.pq_error < 0.0;
    }
    const bool pass = hit >= 4 && cont >= 4 && cv >= 4 && pq >= 4;
    report(6, "frequency trends", 600, trend_seconds,
           {pass, fmt::format("seeds with expected sign: hit>0 {}/5, contamination<0 {}/5, cv<0 {}/5, "
                              "pq error<0 {}/5",
                              hit, cont, cv, pq)});
  }

  {
    const bool better = held.ppl_knnlm < held.ppl_base;
    const double gap0 = std::abs(held.ppl_knnlm_l0 - held.ppl_base_l0);
    report(7, "perplexity direction", 300, held.seconds,
           {better && gap0 <= 1e-9, fmt::format("held-in {} tokens: ppl base {:.3f}, kNN-LM {:.3f}; "
                                                "lambda 0 gap {:.1e}",
                                                held.tokens, held.ppl_base, held.ppl_knnlm, gap0)});
  }

  run(8, "resplit rare-token enrichment", 60, [] {
    int wins = 0;
    std::string shares;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      synth::ZipfCorpusParams zp;
      zp.tokens = 100000;
      zp.seed = seed;
      const auto c = synth::generate_zipf_corpus(zp);
      const auto rare_share = [](const corpus::SplitResult& s) {
        const auto freq = corpus::count_tokens(s.train);
        std::uint64_t rare = 0, total = 0;
        for (const auto* part : {&s.valid, &s.test}) {
          for (const auto& doc : part->docs) {
            for (TokenId t : doc) rare += freq.count(t) < 10 ? 1 : 0;
            total += doc.size();
          }
        }
        return static_cast<double>(rare) / static_cast<double>(total);
      };
      const double a = rare_share(corpus::resplit(c, 10000, seed));
      const double b = rare_share(corpus::random_split(c, 10000, seed));
      wins += a > b ? 1 : 0;
      shares += fmt::format("{}{:.3f}/{:.3f}", seed == 1 ? "" : " ", a, b);
    }
    return Outcome{wins == 5, fmt::format("resplit beats random on {}/5 seeds (rare share {})", wins, shares)};
  });

  {
    std::uint64_t violations = 0, records = 0;
    for (const auto& r : runs) {
      violations += r.hit_violations;
      records += r.records;
    }
    report(9, "hit flag consistency", 1, 0.0,
           {violations == 0 && records > 0,
            fmt::format("{} records from the trend runs, {} violations", records, violations)});
  }

  run(10, "contamination oracle", 60, [] {
    Rng rng(1010);
    std::size_t types_checked = 0, mismatches = 0;
    for (int inst = 0; inst < 20; ++inst) {
      const std::size_t n = 2 + rng.below(1999);
      const std::size_t dim = 8 + 8 * rng.below(3);
      knnlm::Datastore ds;
      ds.dim = static_cast<std::uint32_t>(dim);
      ds.keys = inst % 2 == 0 ? grid_matrix(n, dim, rng) : uniform_matrix(n, dim, rng);
      const std::size_t vocab = 2 + rng.below(30);
      for (std::size_t i = 0; i < n; ++i) ds.values.push_back(static_cast<TokenId>(rng.below(vocab)));
      const vindex::FlatIndex exact(dim, ds.keys, ds.values);
      const auto groups = diagnostics::group_by_type(ds, vocab);
      const auto stats = diagnostics::contamination_by_type(ds, exact, groups);
      for (TokenId t = 0; t < vocab; ++t) {
        const auto want = oracle::contamination(ds.keys, dim, ds.values, t);
        if (!want) continue;
        ++types_checked;
        if (diagnostics::contamination_rate(ds, exact, t) != *want || stats[t].rate() != want) ++mismatches;
      }
    }
    return Outcome{mismatches == 0 && types_checked > 0,
                   fmt::format("{} types over 20 datastores, {} mismatches", types_checked, mismatches)};
  });

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "OK" : "FAILED", g_failures);
  return g_failures == 0 ? 0 : 1;
}
