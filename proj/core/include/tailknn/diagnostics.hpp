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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailknn/corpus.hpp"
#include "tailknn/knnlm.hpp"
#include "tailknn/vindex.hpp"

namespace tailknn::diagnostics {

/// Logarithmic (base 10) bins over integer counts. Bin 0 holds count 0;
/// the remaining bins start at ceil(10^(b / per_decade)) with duplicate
/// integer edges merged, so every bin is a non-empty integer range
/// [lo, hi). per_decade = 1 gives decade bins 1-9, 10-99, ...
class FrequencyBins {
 public:
  FrequencyBins(std::uint64_t max_count, unsigned per_decade = 8);

  std::size_t size() const { return edges_.size() - 1; }
  unsigned per_decade() const { return per_decade_; }
  std::size_t bin_of(std::uint64_t count) const;
  std::uint64_t lo(std::size_t bin) const { return edges_.at(bin); }
  /// Exclusive upper edge.
  std::uint64_t hi(std::size_t bin) const { return edges_.at(bin + 1); }

 private:
  unsigned per_decade_;
  std::vector<std::uint64_t> edges_;
};

/// One report row. Blank (nullopt) fields either do not apply to the
/// report or had no observations.
struct BinRow {
  std::uint64_t bin_lo = 0;
  std::uint64_t bin_hi = 0;
  std::uint64_t n_obs = 0;
  std::optional<double> mean_p_knn;
  std::optional<double> mean_p_lm;
  std::optional<double> hit_rate;
  std::optional<double> mean_cv;
  std::optional<double> contamination;
  std::optional<double> mean_pq_error;
};

struct DiagnosticsReport {
  std::vector<BinRow> rows;
};

/// Mean p_knn / p_lm per bin over test occurrences; `counts[i]` is the count
/// that places records[i] in a bin.
DiagnosticsReport expected_prob_by_bin(std::span<const knnlm::EvalRecord> records,
                                       std::span<const std::uint64_t> counts, const FrequencyBins& bins);
/// Bins by the target token's count in `freq`.
DiagnosticsReport expected_prob_by_bin(std::span<const knnlm::EvalRecord> records,
                                       const corpus::FrequencyTable& freq, const FrequencyBins& bins);

/// Fraction of records with a hit, per bin of the target's count in `freq`.
std::vector<std::optional<double>> hit_rate(std::span<const knnlm::EvalRecord> records,
                                            const corpus::FrequencyTable& freq, const FrequencyBins& bins);

/// expected_prob_by_bin plus the hit-rate column.
DiagnosticsReport probability_report(std::span<const knnlm::EvalRecord> records,
                                     const corpus::FrequencyTable& freq, const FrequencyBins& bins);

/// Datastore entry ids grouped by value; result[t] lists the entries whose
/// value is t in increasing id order.
std::vector<std::vector<std::uint32_t>> group_by_type(const knnlm::Datastore& ds, std::size_t domain);

/// Population standard deviation over mean. Empty input or mean 0 gives 0.
double coefficient_of_variation(std::span<const double> values);

/// CV of the Euclidean distances from each entry's key to the centroid of
/// the entries. nullopt for fewer than two entries.
std::optional<double> centroid_cv(const knnlm::Datastore& ds, std::span<const std::uint32_t> entries);

struct ContaminationStats {
  std::uint64_t checked = 0;
  std::uint64_t contaminated = 0;

  std::optional<double> rate() const {
    if (checked == 0) return std::nullopt;
    return static_cast<double>(contaminated) / static_cast<double>(checked);
  }
};

/// For every entry of each type, the nearest other entry (exact search,
/// ties to the lower id) is checked for a different value. With
/// `per_type_cap` > 0, types with more entries are represented by a
/// deterministic sample of that many entries (drawn from `seed`); the
/// neighbor search itself always covers the full datastore.
/// Throws std::invalid_argument when the datastore holds fewer than two
/// entries.
std::vector<ContaminationStats> contamination_by_type(const knnlm::Datastore& ds, const vindex::FlatIndex& exact,
                                                      std::span<const std::vector<std::uint32_t>> groups,
                                                      std::size_t per_type_cap = 0, std::uint64_t seed = 0);

/// Single-type form of contamination_by_type with no sampling.
double contamination_rate(const knnlm::Datastore& ds, const vindex::FlatIndex& exact, TokenId type);

struct TypeStats {
  TokenId token = 0;
  std::uint64_t entries = 0;
  std::optional<double> cv;
  ContaminationStats contamination;
  std::optional<double> mean_pq_error;
};

/// Mean reconstruction error per type for types with at least one entry.
/// `ds` must hold the keys the index was built from.
std::vector<std::optional<double>> pq_error_by_type(const vindex::IvfPqIndex& index, const knnlm::Datastore& ds,
                                                    std::span<const std::vector<std::uint32_t>> groups);

struct DatastoreOptions {
  std::size_t contamination_per_type = 0;  // 0 = every entry
  std::uint64_t seed = 0;
  bool contamination = true;
};

/// Per-type CV, contamination and (when `index` is given) PQ error.
std::vector<TypeStats> datastore_type_stats(const knnlm::Datastore& ds, std::size_t domain,
                                            const vindex::IvfPqIndex* index, const DatastoreOptions& options);

/// Per-bin view of datastore_type_stats keyed by the type's entry count.
/// n_obs counts datastore entries; CV, contamination and PQ error are
/// entry-weighted means over the types that define them.
DiagnosticsReport datastore_report(std::span<const TypeStats> types, const FrequencyBins& bins);

enum class CorrelationMethod { kPearson, kSpearman };

/// nullopt when either input has zero variance. Spearman ranks ties by their
/// average rank. Throws std::invalid_argument on size mismatch or n < 2.
std::optional<double> correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method);

struct GainErrorResult {
  std::vector<TokenId> tokens;
  std::vector<double> mean_gain;  // mean(p_knn - p_lm) over test occurrences
  std::vector<double> mean_error;
  std::size_t dropped = 0;  // types present in only one of the inputs
  std::optional<double> pearson;
  std::optional<double> spearman;
};

/// `error_by_type[t]` is the mean reconstruction error of type t (nullopt for
/// types without entries).
GainErrorResult gain_vs_error(std::span<const knnlm::EvalRecord> records,
                              std::span<const std::optional<double>> error_by_type);

enum class Tertile : std::uint8_t { kLow, kMed, kHigh };
const char* tertile_name(Tertile t);

/// Every id in the table's domain sorted by (count, id) and split at
/// floor(V/3) and floor(2V/3). Throws std::invalid_argument when V < 3.
std::vector<Tertile> categorize_tertiles(const corpus::FrequencyTable& freq);

struct TertileRow {
  Tertile category = Tertile::kLow;
  std::uint64_t n_obs = 0;
  std::optional<double> mean_p_knn;
  std::optional<double> mean_p_lm;
};

std::vector<TertileRow> tertile_report(std::span<const knnlm::EvalRecord> records,
                                       std::span<const Tertile> categories);

struct SweepRow {
  std::size_t k = 0;
  double temperature = 0.0;
  TertileRow row;
};

/// Mean p_knn and p_lm per tertile for every (k, temperature) pair. Each
/// test position is searched once at the largest k; smaller k reuse the
/// closest prefix of that neighbor list.
std::vector<SweepRow> sweep(const knnlm::EvalContext& ctx, std::span<const std::size_t> k_list,
                            std::span<const double> temperatures, const corpus::Corpus& test,
                            std::span<const Tertile> categories);

enum class Metric { kMeanPKnn, kMeanPLm, kHitRate, kCv, kContamination, kPqError };

/// Spearman correlation between bin_lo and `metric` across rows with
/// n_obs >= min_obs and a defined metric value.
std::optional<double> bin_trend(const DiagnosticsReport& report, Metric metric, std::uint64_t min_obs = 30);

/// Header: bin_lo,bin_hi,n_obs,mean_p_knn,mean_p_lm,hit_rate,mean_cv,
/// contamination,mean_pq_error. Undefined values are empty fields.
void emit_report(const DiagnosticsReport& report, const std::string& path);
DiagnosticsReport read_report(const std::string& path);

/// token_id,freq,mean_gain,mean_pq_error
void emit_type_table(const GainErrorResult& gains, const corpus::FrequencyTable& freq, const std::string& path);
/// category,n_obs,mean_p_knn,mean_p_lm
void emit_tertiles(std::span<const TertileRow> rows, const std::string& path);
/// k,tau,category,n_obs,mean_p_knn,mean_p_lm
void emit_sweep(std::span<const SweepRow> rows, const std::string& path);

}  // namespace tailknn::diagnostics
