#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcasr/domain.hpp"

namespace dcasr {

/// Metric values for one cutoff N. `f_beta` is keyed by the formatted beta
/// value ("0.5", "2") so reports stay readable after serialization.
struct MetricValues {
  double hr = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
  double ild = 0.0;
  double entropy = 0.0;
  double ds = 0.0;
  double f1_hr_ild = 0.0;
  std::map<std::string, double> f_beta;

  void validate(std::size_t n, std::size_t num_categories) const;
};

struct MetricReport {
  std::map<std::size_t, MetricValues> per_cutoff;

  void validate(std::size_t num_categories) const;
  std::string to_json() const;
};

/// Canonical metric column order shared by every CSV and JSON writer.
const std::vector<std::string>& metric_keys();

/// Field access by name; throws ContractError for unknown keys.
double metric_value(const MetricValues& values, const std::string& key);

/// One row per cutoff, preceded by a header row. `model` fills the first
/// column so rows from several reports concatenate into one table.
std::string metric_report_csv(const std::string& model, const MetricReport& report,
                              bool with_header = true);

std::size_t rank_of(const RecommendationList& rec, ItemId target, std::size_t n);

double hr_at_n(const RecommendationList& rec, ItemId target, std::size_t n);
double mrr_at_n(const RecommendationList& rec, ItemId target, std::size_t n);
double ndcg_at_n(const RecommendationList& rec, ItemId target, std::size_t n);
double ild_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n);
double entropy_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n);
double ds_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n);

double f1_hr_ild(double hr, double ild);
double f_beta(double acc, double div, double beta);

/// Formats a beta value the way MetricValues::f_beta keys expect.
std::string beta_key(double beta);

/// Top-N extraction with deterministic ordering: probability descending,
/// item id ascending on ties.
RecommendationList top_n_by_score(const ScoreDistribution& scores, std::size_t n);

struct MmrOptions {
  double lambda_div = 5e-6;
  std::size_t pool = 100;
  /// false: score = rel + lambda_div * divgain.
  /// true: score = (1 - lambda_div) * rel + lambda_div * divgain, with
  /// lambda_div restricted to [0, 1].
  bool convex = false;
};

RecommendationList mmr_rerank(const ScoreDistribution& scores, const ItemCatalog& catalog,
                              std::size_t n, const MmrOptions& opt = {});

/// Per-example metrics averaged arithmetically: reported F values are means
/// of per-example F, not F of means.
MetricReport evaluate_examples(const std::vector<RecommendationList>& recs,
                               const std::vector<ItemId>& targets, const ItemCatalog& catalog,
                               const std::vector<std::size_t>& cutoffs,
                               const std::vector<double>& betas);

/// Mean relative deltas (framework - base)/base per metric and cutoff over
/// backbone pairs. Pairs with a zero base are excluded; a metric with no
/// usable pair is absent from the map.
struct ImprovementReport {
  std::map<std::size_t, std::map<std::string, double>> mean_delta;

  std::string to_json() const;
};

ImprovementReport improvements(const std::vector<std::pair<MetricReport, MetricReport>>& pairs);

}  // namespace dcasr
