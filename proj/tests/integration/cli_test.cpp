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

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "tailknn/corpus.hpp"
#include "tailknn/diagnostics.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/vindex.hpp"

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tailknn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(TAILKNN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// Writes a config for a small synthetic run inside `dir`.
fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  const auto path = dir / "run.toml";
  std::ofstream(path) << "seed = 5\n"
                      << "[paths]\ncorpus = \"" << (dir / "corpus.txt").string() << "\"\n"
                      << "out_dir = \"" << (dir / "out").string() << "\"\n"
                      << "[synth]\ntokens = 40000\nvocab_size = 400\nmean_doc_len = 200\n"
                      << "[resplit]\ntarget_eval_tokens = 3000\n"
                      << "[index]\ncentroids = 32\ntrain_sample = 8192\n"
                      << "[knn]\nk = 32\n"
                      << "[diagnostics]\ncontamination_per_type = 8\n"
                      << "[sweep]\nk_list = [4, 32]\ntau_list = [1, 10]\n"
                      << extra;
  return path;
}

TEST(Cli, FullPipelineProducesValidArtifacts) {
  const auto dir = fresh_dir("full");
  const auto cfg = write_config(dir).string();
  const auto out = dir / "out";
  for (const char* cmd : {"synth", "resplit", "build", "eval", "diagnose", "sweep"}) {
    ASSERT_EQ(run(std::string(cmd) + " --config " + cfg), 0) << cmd;
    EXPECT_TRUE(fs::exists(out / (std::string(cmd) + ".config.toml"))) << cmd;
  }

  const auto train = tailknn::corpus::read_corpus((out / "train.bin").string());
  const auto valid = tailknn::corpus::read_corpus((out / "valid.bin").string());
  const auto test = tailknn::corpus::read_corpus((out / "test.bin").string());
  EXPECT_EQ(train.token_count() + valid.token_count() + test.token_count(), 40000u);

  // Datastore header: magic, u32 D, u64 N.
  const auto ds_bytes = slurp(out / "datastore.bin");
  ASSERT_GE(ds_bytes.size(), 20u);
  EXPECT_EQ(ds_bytes.substr(0, 8), "TLKNNDS1");
  std::uint64_t n = 0;
  std::memcpy(&n, ds_bytes.data() + 12, 8);
  EXPECT_EQ(n, train.token_count());
  EXPECT_EQ(slurp(out / "index.bin").substr(0, 8), "TLIVFPQ1");
  EXPECT_NO_THROW(tailknn::vindex::IvfPqIndex::load((out / "index.bin").string()));

  EXPECT_EQ(line_count(out / "records.csv"), test.token_count() + 1);
  const auto records = tailknn::knnlm::read_records_csv((out / "records.csv").string());
  for (const auto& r : records) EXPECT_EQ(r.hit, r.p_knn > 0.0);

  const std::string report_header =
      "bin_lo,bin_hi,n_obs,mean_p_knn,mean_p_lm,hit_rate,mean_cv,contamination,mean_pq_error";
  for (const char* f : {"prob_by_datastore_freq.csv", "prob_by_pretrain_freq.csv", "datastore_by_freq.csv",
                        "prob_by_context_ngram_n1.csv", "prob_by_context_ngram_n5.csv"}) {
    EXPECT_EQ(first_line(out / f), report_header) << f;
  }
  // No pre-training table was configured.
  EXPECT_EQ(line_count(out / "prob_by_pretrain_freq.csv"), 1u);
  EXPECT_EQ(first_line(out / "per_type.csv"), "token_id,freq,mean_gain,mean_pq_error");
  EXPECT_EQ(first_line(out / "tertiles.csv"), "category,n_obs,mean_p_knn,mean_p_lm");
  EXPECT_EQ(line_count(out / "tertiles.csv"), 4u);
  EXPECT_EQ(first_line(out / "rare_histogram.csv"), "bin_lo,bin_hi,train,valid,test");

  // Probability report conserves the evaluated positions.
  const auto prob = tailknn::diagnostics::read_report((out / "prob_by_datastore_freq.csv").string());
  std::uint64_t total = 0;
  for (const auto& row : prob.rows) total += row.n_obs;
  EXPECT_EQ(total, test.token_count());
  const auto ds_report = tailknn::diagnostics::read_report((out / "datastore_by_freq.csv").string());
  total = 0;
  for (const auto& row : ds_report.rows) total += row.n_obs;
  EXPECT_EQ(total, train.token_count());

  // 2 k x 2 tau x 3 tertiles.
  EXPECT_EQ(first_line(out / "sweep.csv"), "k,tau,category,n_obs,mean_p_knn,mean_p_lm");
  EXPECT_EQ(line_count(out / "sweep.csv"), 13u);

  // Reports are derived data: removing them leaves eval reproducible.
  const auto records_before = slurp(out / "records.csv");
  fs::remove(out / "records.csv");
  fs::remove(out / "tertiles.csv");
  ASSERT_EQ(run("eval --config " + cfg), 0);
  EXPECT_EQ(slurp(out / "records.csv"), records_before);
}

TEST(Cli, RebuildIsByteIdentical) {
  const auto dir = fresh_dir("repro");
  const auto cfg = write_config(dir).string();
  ASSERT_EQ(run("synth --config " + cfg), 0);
  ASSERT_EQ(run("resplit --config " + cfg + " --out-dir " + (dir / "a").string()), 0);
  ASSERT_EQ(run("resplit --config " + cfg + " --out-dir " + (dir / "b").string()), 0);
  for (const char* f : {"train.bin", "valid.bin", "test.bin", "vocab.txt", "split_stats.csv", "rare_histogram.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(run("build --config " + cfg + " --out-dir " + (dir / "a").string()), 0);
  ASSERT_EQ(run("build --config " + cfg + " --out-dir " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "datastore.bin"), slurp(dir / "b" / "datastore.bin"));
  EXPECT_EQ(slurp(dir / "a" / "index.bin"), slurp(dir / "b" / "index.bin"));
  ASSERT_EQ(run("eval --config " + cfg + " --out-dir " + (dir / "a").string()), 0);
  ASSERT_EQ(run("eval --config " + cfg + " --out-dir " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "records.csv"), slurp(dir / "b" / "records.csv"));

  // A different seed changes the split.
  ASSERT_EQ(run("resplit --config " + cfg + " --seed 6 --out-dir " + (dir / "c").string()), 0);
  EXPECT_NE(slurp(dir / "a" / "valid.bin"), slurp(dir / "c" / "valid.bin"));
}

TEST(Cli, ZeroLambdaMatchesBasePerplexity) {
  const auto dir = fresh_dir("lambda0");
  const auto cfg = write_config(dir, "[index]\nkind = \"flat\"\n").string();
  // The appended section repeats [index]; later keys override earlier ones.
  ASSERT_EQ(run("synth --config " + cfg), 0);
  ASSERT_EQ(run("resplit --config " + cfg), 0);
  ASSERT_EQ(run("build --config " + cfg), 0);
  ASSERT_FALSE(fs::exists(dir / "out" / "index.bin"));
  ASSERT_EQ(run("eval --config " + cfg + " --set knn.lambda=0"), 0);
  std::ifstream in(dir / "out" / "eval_summary.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "split,tokens,ppl_base,ppl_knnlm,hit_rate");
  std::vector<std::string> f;
  std::stringstream ss(row);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[2], f[3]);
}

TEST(Cli, TinyTextCorpusSplitsAndSweepMatchesTertiles) {
  const auto dir = fresh_dir("tiny");
  std::ofstream(dir / "docs.txt") << "the cat sat on the mat .\n\n"
                                  << "a dog ran to the park .\n\n"
                                  << "the cat ran .\n\n"
                                  << "zebras graze quietly near rivers .\n\n"
                                  << "on the mat the dog sat .\n\n"
                                  << "a cat and a dog .\n";
  const auto cfg = dir / "tiny.toml";
  std::ofstream(cfg) << "[paths]\ncorpus = \"" << (dir / "docs.txt").string() << "\"\nout_dir = \""
                     << (dir / "out").string() << "\"\n"
                     << "[resplit]\ntarget_eval_tokens = 8\n"
                     << "[index]\ncentroids = 4\ncode_size = 8\nnbits = 2\n"
                     << "[knn]\nk = 4\nnprobe = 4\n"
                     << "[sweep]\nk_list = [4]\ntau_list = [10]\n";
  const auto c = cfg.string();
  ASSERT_EQ(run("resplit --config " + c), 0);
  const auto out = dir / "out";
  std::uint64_t total = 0;
  for (const char* f : {"train.bin", "valid.bin", "test.bin"}) {
    total += tailknn::corpus::read_corpus((out / f).string()).token_count();
  }
  EXPECT_EQ(total, 37u);
  // One histogram row per frequency bin.
  const auto train = tailknn::corpus::read_corpus((out / "train.bin").string());
  const tailknn::diagnostics::FrequencyBins bins(std::max<std::uint64_t>(tailknn::corpus::count_tokens(train).max_count(), 1), 8);
  EXPECT_EQ(line_count(out / "rare_histogram.csv"), bins.size() + 1);

  ASSERT_EQ(run("build --config " + c), 0);
  ASSERT_EQ(run("eval --config " + c), 0);
  ASSERT_EQ(run("diagnose --config " + c), 0);
  ASSERT_EQ(run("sweep --config " + c), 0);
  // sweep.csv rows are "k,tau," followed by the tertile row.
  std::ifstream sweep(out / "sweep.csv");
  std::ifstream tert(out / "tertiles.csv");
  std::string s, t;
  std::getline(sweep, s);
  std::getline(tert, t);
  for (int i = 0; i < 3; ++i) {
    ASSERT_TRUE(std::getline(sweep, s));
    ASSERT_TRUE(std::getline(tert, t));
    EXPECT_EQ(s, "4,10," + t);
  }
}

TEST(Cli, DegenerateExactPqHasZeroError) {
  const auto dir = fresh_dir("exactpq");
  std::ofstream(dir / "docs.txt") << "a b c d e f g h\n\nb c d e f g h i\n\nc d e f g h i j k\n\nx y z\n";
  const auto cfg = dir / "exact.toml";
  // One coarse centroid per training key: every residual is zero.
  std::ofstream(cfg) << "[paths]\ncorpus = \"" << (dir / "docs.txt").string() << "\"\nout_dir = \""
                     << (dir / "out").string() << "\"\n"
                     << "[resplit]\ntarget_eval_tokens = 10\n"
                     << "[index]\ncode_size = 8\nnbits = 1\n"
                     << "[knn]\nk = 2\n";
  const auto c = cfg.string();
  ASSERT_EQ(run("resplit --config " + c), 0);
  const auto n = tailknn::corpus::read_corpus((dir / "out" / "train.bin").string()).token_count();
  const std::string centroids = " --set index.centroids=" + std::to_string(n);
  for (const char* cmd : {"build", "eval", "diagnose"}) {
    ASSERT_EQ(run(std::string(cmd) + " --config " + c + centroids), 0) << cmd;
  }
  const auto report = tailknn::diagnostics::read_report((dir / "out" / "datastore_by_freq.csv").string());
  std::size_t rows = 0;
  for (const auto& row : report.rows) {
    if (row.n_obs == 0) continue;
    ++rows;
    ASSERT_TRUE(row.mean_pq_error.has_value());
    EXPECT_EQ(*row.mean_pq_error, 0.0);
  }
  EXPECT_GT(rows, 0u);
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("codes");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("eval --no-such-flag"), 1);
  EXPECT_EQ(run("eval --config " + (dir / "missing.toml").string()), 1);
  EXPECT_EQ(run("--help"), 0);

  std::ofstream(dir / "bad.toml") << "[knn]\nneighbours = 3\n";
  EXPECT_EQ(run("eval --config " + (dir / "bad.toml").string()), 1);
  EXPECT_EQ(run("eval --set knn.lambda=2 --out-dir " + dir.string()), 1);

  // Missing inputs and corrupt artifacts are data errors.
  EXPECT_EQ(run("build --out-dir " + (dir / "empty").string()), 2);
  const auto cfg = write_config(dir).string();
  ASSERT_EQ(run("synth --config " + cfg), 0);
  ASSERT_EQ(run("resplit --config " + cfg), 0);
  ASSERT_EQ(run("build --config " + cfg), 0);
  // A resplit after build leaves a datastore that no longer matches train.bin.
  ASSERT_EQ(run("resplit --config " + cfg + " --set resplit.target_eval_tokens=6000"), 0);
  EXPECT_EQ(run("eval --config " + cfg), 2);
  ASSERT_EQ(run("build --config " + cfg), 0);
  fs::resize_file(dir / "out" / "datastore.bin", 100);
  EXPECT_EQ(run("eval --config " + cfg), 2);
  EXPECT_EQ(run("resplit --config " + cfg + " --set resplit.target_eval_tokens=99999999"), 2);
}

}  // namespace
