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
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/diagnostics.hpp"
#include "tailknn/rng.hpp"

namespace tailknn::diagnostics {

namespace {

// ceil(x), except that values within rounding noise of an integer snap to it
// so that 10^(b/per_decade) lands exactly on powers of ten.
std::uint64_t ceil_snapped(double x) {
  const double r = std::round(x);
  if (std::fabs(x - r) <= 1e-9 * x) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::ceil(x));
}

struct MeanAcc {
  double sum = 0.0;
  double weight = 0.0;

  void add(double v, double w = 1.0) {
    sum += v * w;
    weight += w;
  }
  std::optional<double> mean() const {
    if (weight == 0.0) return std::nullopt;
    return sum / weight;
  }
};

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t r = i; r <= j; ++r) ranks[order[r]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

FrequencyBins::FrequencyBins(std::uint64_t max_count, unsigned per_decade) : per_decade_(per_decade) {
  if (per_decade == 0) throw std::invalid_argument("FrequencyBins: per_decade must be >= 1");
  edges_ = {0, 1};
  for (unsigned b = 1; edges_.back() <= max_count; ++b) {
    const auto e = ceil_snapped(std::pow(10.0, static_cast<double>(b) / per_decade));
    if (e > edges_.back()) edges_.push_back(e);
  }
}

std::size_t FrequencyBins::bin_of(std::uint64_t count) const {
  if (count >= edges_.back()) {
    throw std::out_of_range(fmt::format("count {} above the last bin edge {}", count, edges_.back()));
  }
  return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), count) - edges_.begin()) - 1;
}

namespace {

DiagnosticsReport empty_report(const FrequencyBins& bins) {
  DiagnosticsReport report;
  report.rows.resize(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    report.rows[b].bin_lo = bins.lo(b);
    report.rows[b].bin_hi = bins.hi(b);
  }
  return report;
}

}  // namespace

DiagnosticsReport expected_prob_by_bin(std::span<const knnlm::EvalRecord> records,
                                       std::span<const std::uint64_t> counts, const FrequencyBins& bins) {
  if (records.size() != counts.size()) throw std::invalid_argument("expected_prob_by_bin: size mismatch");
  auto report = empty_report(bins);
  std::vector<MeanAcc> knn(bins.size()), lm(bins.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto b = bins.bin_of(counts[i]);
    ++report.rows[b].n_obs;
    knn[b].add(records[i].p_knn);
    lm[b].add(records[i].p_lm);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    report.rows[b].mean_p_knn = knn[b].mean();
    report.rows[b].mean_p_lm = lm[b].mean();
  }
  return report;
}

DiagnosticsReport expected_prob_by_bin(std::span<const knnlm::EvalRecord> records,
                                       const corpus::FrequencyTable& freq, const FrequencyBins& bins) {
  std::vector<std::uint64_t> counts(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) counts[i] = freq.count(records[i].target);
  return expected_prob_by_bin(records, counts, bins);
}

std::vector<std::optional<double>> hit_rate(std::span<const knnlm::EvalRecord> records,
                                            const corpus::FrequencyTable& freq, const FrequencyBins& bins) {
  std::vector<MeanAcc> acc(bins.size());
  for (const auto& r : records) acc[bins.bin_of(freq.count(r.target))].add(r.hit ? 1.0 : 0.0);
  std::vector<std::optional<double>> out(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) out[b] = acc[b].mean();
  return out;
}

DiagnosticsReport probability_report(std::span<const knnlm::EvalRecord> records,
                                     const corpus::FrequencyTable& freq, const FrequencyBins& bins) {
  auto report = expected_prob_by_bin(records, freq, bins);
  const auto hits = hit_rate(records, freq, bins);
  for (std::size_t b = 0; b < bins.size(); ++b) report.rows[b].hit_rate = hits[b];
  return report;
}

std::vector<std::vector<std::uint32_t>> group_by_type(const knnlm::Datastore& ds, std::size_t domain) {
  std::vector<std::vector<std::uint32_t>> groups(domain);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const TokenId v = ds.values[i];
    if (v >= domain) throw DataError(fmt::format("datastore value {} outside vocabulary of {}", v, domain));
    groups[v].push_back(static_cast<std::uint32_t>(i));
  }
  return groups;
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (mean == 0.0) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n) / mean;
}

std::optional<double> centroid_cv(const knnlm::Datastore& ds, std::span<const std::uint32_t> entries) {
  if (entries.size() < 2) return std::nullopt;
  std::vector<double> centroid(ds.dim, 0.0);
  for (auto id : entries) {
    const auto key = ds.key(id);
    for (std::size_t d = 0; d < ds.dim; ++d) centroid[d] += key[d];
  }
  for (auto& c : centroid) c /= static_cast<double>(entries.size());
  std::vector<double> dist;
  dist.reserve(entries.size());
  for (auto id : entries) {
    const auto key = ds.key(id);
    double s = 0.0;
    for (std::size_t d = 0; d < ds.dim; ++d) {
      const double diff = key[d] - centroid[d];
      s += diff * diff;
    }
    dist.push_back(std::sqrt(s));
  }
  return coefficient_of_variation(dist);
}

std::vector<ContaminationStats> contamination_by_type(const knnlm::Datastore& ds, const vindex::FlatIndex& exact,
                                                      std::span<const std::vector<std::uint32_t>> groups,
                                                      std::size_t per_type_cap, std::uint64_t seed) {
  if (ds.size() < 2) throw std::invalid_argument("contamination needs at least two datastore entries");
  if (exact.size() != ds.size() || exact.dim() != ds.dim) {
    throw std::invalid_argument("contamination: exact index does not match the datastore");
  }
  // Collect the probed entries first so the neighbor search runs in large
  // batches.
  std::vector<std::uint32_t> probes;
  std::vector<TokenId> probe_type;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    std::vector<std::uint32_t> ids = groups[t];
    if (per_type_cap > 0 && ids.size() > per_type_cap) {
      Rng rng(mix_seed(seed, t));
      rng.shuffle(std::span<std::uint32_t>(ids));
      ids.resize(per_type_cap);
      std::sort(ids.begin(), ids.end());
    }
    probes.insert(probes.end(), ids.begin(), ids.end());
    probe_type.insert(probe_type.end(), ids.size(), static_cast<TokenId>(t));
  }

  std::vector<ContaminationStats> stats(groups.size());
  constexpr std::size_t kBatch = 4096;
  std::vector<float> queries;
  for (std::size_t start = 0; start < probes.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, probes.size() - start);
    const std::span<const std::uint32_t> ids(probes.data() + start, n);
    queries.resize(n * ds.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto key = ds.key(ids[i]);
      std::copy(key.begin(), key.end(), queries.begin() + static_cast<std::ptrdiff_t>(i * ds.dim));
    }
    const auto results = exact.search_batch(queries, 1, ids);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = stats[probe_type[start + i]];
      ++s.checked;
      if (ds.values[results[i].front().id] != probe_type[start + i]) ++s.contaminated;
    }
  }
  return stats;
}

double contamination_rate(const knnlm::Datastore& ds, const vindex::FlatIndex& exact, TokenId type) {
  std::vector<std::vector<std::uint32_t>> groups(1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.values[i] == type) groups[0].push_back(static_cast<std::uint32_t>(i));
  }
  if (groups[0].empty()) throw std::invalid_argument(fmt::format("type {} has no datastore entries", type));
  // Run against a one-group view whose probes keep their real value.
  if (ds.size() < 2) throw std::invalid_argument("contamination needs at least two datastore entries");
  std::vector<float> queries;
  for (auto id : groups[0]) {
    const auto key = ds.key(id);
    queries.insert(queries.end(), key.begin(), key.end());
  }
  const auto results = exact.search_batch(queries, 1, groups[0]);
  std::size_t differ = 0;
  for (const auto& r : results) differ += ds.values[r.front().id] != type ? 1 : 0;
  return static_cast<double>(differ) / static_cast<double>(results.size());
}

std::vector<std::optional<double>> pq_error_by_type(const vindex::IvfPqIndex& index, const knnlm::Datastore& ds,
                                                    std::span<const std::vector<std::uint32_t>> groups) {
  if (index.size() != ds.size() || index.dim() != ds.dim) {
    throw std::invalid_argument("pq_error_by_type: index was not built from this datastore");
  }
  std::vector<std::optional<double>> out(groups.size());
  for (std::size_t t = 0; t < groups.size(); ++t) {
    if (groups[t].empty()) continue;
    double sum = 0.0;
    for (auto id : groups[t]) sum += index.reconstruction_error(id, ds.key(id));
    out[t] = sum / static_cast<double>(groups[t].size());
  }
  return out;
}

std::vector<TypeStats> datastore_type_stats(const knnlm::Datastore& ds, std::size_t domain,
                                            const vindex::IvfPqIndex* index, const DatastoreOptions& options) {
  const auto groups = group_by_type(ds, domain);
  std::vector<TypeStats> out(domain);
  for (std::size_t t = 0; t < domain; ++t) {
    out[t].token = static_cast<TokenId>(t);
    out[t].entries = groups[t].size();
    out[t].cv = centroid_cv(ds, groups[t]);
  }
  if (options.contamination && ds.size() >= 2) {
    const vindex::FlatIndex exact(ds.dim, ds.keys, ds.values);
    const auto cont = contamination_by_type(ds, exact, groups, options.contamination_per_type, options.seed);
    for (std::size_t t = 0; t < domain; ++t) out[t].contamination = cont[t];
  }
  if (index != nullptr) {
    const auto err = pq_error_by_type(*index, ds, groups);
    for (std::size_t t = 0; t < domain; ++t) out[t].mean_pq_error = err[t];
  }
  return out;
}

DiagnosticsReport datastore_report(std::span<const TypeStats> types, const FrequencyBins& bins) {
  auto report = empty_report(bins);
  std::vector<MeanAcc> cv(bins.size()), cont(bins.size()), err(bins.size());
  for (const auto& t : types) {
    if (t.entries == 0) continue;
    const auto b = bins.bin_of(t.entries);
    const auto w = static_cast<double>(t.entries);
    report.rows[b].n_obs += t.entries;
    if (t.cv) cv[b].add(*t.cv, w);
    if (auto rate = t.contamination.rate()) cont[b].add(*rate, w);
    if (t.mean_pq_error) err[b].add(*t.mean_pq_error, w);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    report.rows[b].mean_cv = cv[b].mean();
    report.rows[b].contamination = cont[b].mean();
    report.rows[b].mean_pq_error = err[b].mean();
  }
  return report;
}

std::optional<double> correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method) {
  if (x.size() != y.size()) throw std::invalid_argument("correlate: sequences differ in length");
  if (x.size() < 2) throw std::invalid_argument("correlate: need at least two pairs");
  if (method == CorrelationMethod::kPearson) return pearson(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

GainErrorResult gain_vs_error(std::span<const knnlm::EvalRecord> records,
                              std::span<const std::optional<double>> error_by_type) {
  GainErrorResult out;
  std::vector<MeanAcc> gain;
  for (const auto& r : records) {
    if (r.target >= gain.size()) gain.resize(r.target + 1);
    gain[r.target].add(r.p_knn - r.p_lm);
  }
  const std::size_t domain = std::max(gain.size(), error_by_type.size());
  for (std::size_t t = 0; t < domain; ++t) {
    const bool has_gain = t < gain.size() && gain[t].weight > 0.0;
    const bool has_error = t < error_by_type.size() && error_by_type[t].has_value();
    if (has_gain && has_error) {
      out.tokens.push_back(static_cast<TokenId>(t));
      out.mean_gain.push_back(*gain[t].mean());
      out.mean_error.push_back(*error_by_type[t]);
    } else if (has_gain || has_error) {
      ++out.dropped;
    }
  }
  if (out.tokens.size() >= 2) {
    out.pearson = correlate(out.mean_gain, out.mean_error, CorrelationMethod::kPearson);
    out.spearman = correlate(out.mean_gain, out.mean_error, CorrelationMethod::kSpearman);
  }
  return out;
}

const char* tertile_name(Tertile t) {
  switch (t) {
    case Tertile::kLow:
      return "LOW";
    case Tertile::kMed:
      return "MED";
    case Tertile::kHigh:
      return "HIGH";
  }
  return "?";
}

std::vector<Tertile> categorize_tertiles(const corpus::FrequencyTable& freq) {
  const std::size_t v = freq.domain();
  if (v < 3) throw std::invalid_argument("categorize_tertiles: need at least three types");
  std::vector<TokenId> order(v);
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return freq.count(a) < freq.count(b); });
  std::vector<Tertile> out(v);
  for (std::size_t i = 0; i < v; ++i) {
    out[order[i]] = i < v / 3 ? Tertile::kLow : (i < 2 * v / 3 ? Tertile::kMed : Tertile::kHigh);
  }
  return out;
}

namespace {

struct TertileAcc {
  std::uint64_t n = 0;
  MeanAcc knn;
  MeanAcc lm;

  void add(double p_knn, double p_lm) {
    ++n;
    knn.add(p_knn);
    lm.add(p_lm);
  }
  TertileRow row(Tertile t) const { return {t, n, knn.mean(), lm.mean()}; }
};

Tertile category_of(std::span<const Tertile> categories, TokenId target) {
  if (target >= categories.size()) {
    throw DataError(fmt::format("token {} outside the tertile table of {} types", target, categories.size()));
  }
  return categories[target];
}

}  // namespace

std::vector<TertileRow> tertile_report(std::span<const knnlm::EvalRecord> records,
                                       std::span<const Tertile> categories) {
  std::array<TertileAcc, 3> acc;
  for (const auto& r : records) {
    acc[static_cast<std::size_t>(category_of(categories, r.target))].add(r.p_knn, r.p_lm);
  }
  return {acc[0].row(Tertile::kLow), acc[1].row(Tertile::kMed), acc[2].row(Tertile::kHigh)};
}

std::vector<SweepRow> sweep(const knnlm::EvalContext& ctx, std::span<const std::size_t> k_list,
                            std::span<const double> temperatures, const corpus::Corpus& test,
                            std::span<const Tertile> categories) {
  if (k_list.empty() || temperatures.empty()) throw std::invalid_argument("sweep: empty k or temperature list");
  for (auto k : k_list) {
    if (k == 0) throw std::invalid_argument("sweep: k must be >= 1");
  }
  for (double tau : temperatures) {
    if (!(tau > 0.0)) throw std::invalid_argument("sweep: temperatures must be > 0");
  }
  const std::size_t k_max = *std::max_element(k_list.begin(), k_list.end());
  const std::size_t nk = k_list.size();
  const std::size_t nt = temperatures.size();
  std::vector<std::array<TertileAcc, 3>> acc(nk * nt);
  std::vector<float> query(ctx.encoder.dim());

  for (const auto& doc : test.docs) {
    const std::span<const TokenId> tokens(doc);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto context = tokens.first(i);
      const TokenId target = doc[i];
      const auto cat = static_cast<std::size_t>(category_of(categories, target));
      ctx.encoder.encode(context, query);
      const auto neighbors = ctx.retriever.search(query, k_max);
      const double p_lm = ctx.lm.prob(context, target);
      for (std::size_t ki = 0; ki < nk; ++ki) {
        const std::span<const vindex::Neighbor> prefix(neighbors.data(), std::min(k_list[ki], neighbors.size()));
        for (std::size_t ti = 0; ti < nt; ++ti) {
          const double p_knn = knnlm::knn_prob(prefix, temperatures[ti])(target);
          acc[ki * nt + ti][cat].add(p_knn, p_lm);
        }
      }
    }
  }

  std::vector<SweepRow> rows;
  for (std::size_t ki = 0; ki < nk; ++ki) {
    for (std::size_t ti = 0; ti < nt; ++ti) {
      for (std::size_t c = 0; c < 3; ++c) {
        rows.push_back({k_list[ki], temperatures[ti], acc[ki * nt + ti][c].row(static_cast<Tertile>(c))});
      }
    }
  }
  return rows;
}

std::optional<double> bin_trend(const DiagnosticsReport& report, Metric metric, std::uint64_t min_obs) {
  std::vector<double> x, y;
  for (const auto& row : report.rows) {
    if (row.n_obs < min_obs) continue;
    std::optional<double> v;
    switch (metric) {
      case Metric::kMeanPKnn:
        v = row.mean_p_knn;
        break;
      case Metric::kMeanPLm:
        v = row.mean_p_lm;
        break;
      case Metric::kHitRate:
        v = row.hit_rate;
        break;
      case Metric::kCv:
        v = row.mean_cv;
        break;
      case Metric::kContamination:
        v = row.contamination;
        break;
      case Metric::kPqError:
        v = row.mean_pq_error;
        break;
    }
    if (!v) continue;
    x.push_back(static_cast<double>(row.bin_lo));
    y.push_back(*v);
  }
  if (x.size() < 2) return std::nullopt;
  return correlate(x, y, CorrelationMethod::kSpearman);
}

}  // namespace tailknn::diagnostics
