#include "dcasr/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

#include <json.hpp>

#include "dcasr/errors.hpp"

namespace dcasr {

namespace {

void require_prefix(const RecommendationList& rec, std::size_t n, std::size_t min_n) {
  if (n < min_n) throw ContractError("metric cutoff below " + std::to_string(min_n));
  if (n > rec.size()) throw ContractError("metric cutoff exceeds recommendation list");
}

double entropy_bits(const std::map<CatId, std::size_t>& counts, double total) {
  double h = 0.0;
  for (const auto& [cat, cnt] : counts) {
    const double q = static_cast<double>(cnt) / total;
    if (q > 0.0) h -= q * std::log2(q);
  }
  return h;
}

nlohmann::json values_to_json(const MetricValues& v) {
  nlohmann::json j;
  for (const std::string& k : metric_keys()) j[k] = metric_value(v, k);
  j["f_beta"] = nlohmann::json::object();
  for (const auto& [beta, value] : v.f_beta) j["f_beta"][beta] = value;
  return j;
}

}  // namespace

const std::vector<std::string>& metric_keys() {
  static const std::vector<std::string> keys = {"hr",      "mrr", "ndcg",     "ild",
                                                "entropy", "ds",  "f1_hr_ild"};
  return keys;
}

double metric_value(const MetricValues& v, const std::string& key) {
  if (key == "hr") return v.hr;
  if (key == "mrr") return v.mrr;
  if (key == "ndcg") return v.ndcg;
  if (key == "ild") return v.ild;
  if (key == "entropy") return v.entropy;
  if (key == "ds") return v.ds;
  if (key == "f1_hr_ild") return v.f1_hr_ild;
  throw ContractError("unknown metric key " + key);
}

void MetricValues::validate(std::size_t n, std::size_t num_categories) const {
  const double slack = 1e-9;
  for (const double v : {hr, mrr, ndcg, ds})
    if (v < -slack || v > 1.0 + slack) throw ValidationError("rank metric outside [0,1]");
  if (ild < -slack || ild > std::numbers::sqrt2 + slack)
    throw ValidationError("ild outside [0, sqrt(2)]");
  const double cap = std::log2(static_cast<double>(std::min(n, num_categories)));
  if (entropy < -slack || entropy > cap + slack)
    throw ValidationError("entropy outside [0, log2(min(N, num_categories))]");
}

void MetricReport::validate(std::size_t num_categories) const {
  for (const auto& [n, values] : per_cutoff) values.validate(n, num_categories);
}

std::string MetricReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [n, values] : per_cutoff) j[std::to_string(n)] = values_to_json(values);
  return j.dump(2);
}

std::string metric_report_csv(const std::string& model, const MetricReport& report,
                              bool with_header) {
  std::vector<std::string> beta_cols;
  if (!report.per_cutoff.empty())
    for (const auto& [beta, value] : report.per_cutoff.begin()->second.f_beta)
      beta_cols.push_back(beta);

  std::string out;
  char buf[64];
  if (with_header) {
    out += "model,cutoff";
    for (const std::string& k : metric_keys()) out += "," + k;
    for (const std::string& b : beta_cols) out += ",f_beta_" + b;
    out += "\n";
  }
  for (const auto& [n, values] : report.per_cutoff) {
    out += model + "," + std::to_string(n);
    for (const std::string& k : metric_keys()) {
      std::snprintf(buf, sizeof buf, ",%.10g", metric_value(values, k));
      out += buf;
    }
    for (const std::string& b : beta_cols) {
      const auto it = values.f_beta.find(b);
      if (it == values.f_beta.end()) throw ContractError("uneven f_beta keys across cutoffs");
      std::snprintf(buf, sizeof buf, ",%.10g", it->second);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::size_t rank_of(const RecommendationList& rec, ItemId target, std::size_t n) {
  require_prefix(rec, n, 1);
  for (std::size_t i = 0; i < n; ++i)
    if (rec.item(i) == target) return i + 1;
  return 0;
}

double hr_at_n(const RecommendationList& rec, ItemId target, std::size_t n) {
  return rank_of(rec, target, n) > 0 ? 1.0 : 0.0;
}

double mrr_at_n(const RecommendationList& rec, ItemId target, std::size_t n) {
  const std::size_t r = rank_of(rec, target, n);
  return r > 0 ? 1.0 / static_cast<double>(r) : 0.0;
}

double ndcg_at_n(const RecommendationList& rec, ItemId target, std::size_t n) {
  const std::size_t r = rank_of(rec, target, n);
  return r > 0 ? 1.0 / std::log2(static_cast<double>(r) + 1.0) : 0.0;
}

double ild_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n) {
  require_prefix(rec, n, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (catalog.category(rec.item(i)) != catalog.category(rec.item(j)))
        sum += std::numbers::sqrt2;
    }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double entropy_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n) {
  require_prefix(rec, n, 1);
  std::map<CatId, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) ++counts[catalog.category(rec.item(i))];
  return entropy_bits(counts, static_cast<double>(n));
}

double ds_at_n(const RecommendationList& rec, const ItemCatalog& catalog, std::size_t n) {
  require_prefix(rec, n, 1);
  std::set<CatId> distinct;
  for (std::size_t i = 0; i < n; ++i) distinct.insert(catalog.category(rec.item(i)));
  return static_cast<double>(distinct.size()) / static_cast<double>(n);
}

double f1_hr_ild(double hr, double ild) {
  if (hr < 0.0 || ild < 0.0) throw ContractError("f1 arguments must be non-negative");
  const double num = 2.0 * hr * ild;
  return num == 0.0 ? 0.0 : num / (hr + ild);
}

double f_beta(double acc, double div, double beta) {
  if (beta <= 0.0) throw ContractError("f_beta requires beta > 0");
  if (acc < 0.0 || div < 0.0) throw ContractError("f_beta arguments must be non-negative");
  const double b2 = beta * beta;
  const double num = (1.0 + b2) * acc * div;
  return num == 0.0 ? 0.0 : num / (b2 * acc + div);
}

std::string beta_key(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

RecommendationList top_n_by_score(const ScoreDistribution& scores, std::size_t n) {
  const std::size_t k = scores.item_probs.size();
  if (n > k) throw ContractError("top_n_by_score: cutoff exceeds item count");
  std::vector<ItemId> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = static_cast<ItemId>(i);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](ItemId a, ItemId b) {
                      const double pa = scores.item_probs[static_cast<std::size_t>(a)];
                      const double pb = scores.item_probs[static_cast<std::size_t>(b)];
                      if (pa != pb) return pa > pb;
                      return a < b;
                    });
  RecommendationList rec;
  for (std::size_t i = 0; i < n; ++i)
    rec.entries.emplace_back(ids[i], scores.item_probs[static_cast<std::size_t>(ids[i])]);
  return rec;
}

RecommendationList mmr_rerank(const ScoreDistribution& scores, const ItemCatalog& catalog,
                              std::size_t n, const MmrOptions& opt) {
  if (opt.lambda_div < 0.0) throw ContractError("mmr: lambda_div must be non-negative");
  if (opt.convex && opt.lambda_div > 1.0)
    throw ContractError("mmr: convex form requires lambda_div in [0, 1]");
  std::size_t pool = opt.pool;
  const std::size_t num_items = scores.item_probs.size();
  if (pool > num_items) {
    std::fprintf(stderr, "warning: mmr pool %zu clipped to item count %zu\n", pool, num_items);
    pool = num_items;
  }
  if (pool < n) throw ContractError("mmr: pool smaller than cutoff");

  const RecommendationList candidates = top_n_by_score(scores, pool);
  std::vector<ItemId> remaining;
  for (const auto& [id, prob] : candidates.entries) remaining.push_back(id);
  std::sort(remaining.begin(), remaining.end());

  RecommendationList out;
  std::vector<CatId> selected_cats;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const ItemId id = remaining[i];
      const double rel = scores.item_probs[static_cast<std::size_t>(id)];
      double divgain = 0.0;
      if (!selected_cats.empty()) {
        const CatId c = catalog.category(id);
        std::size_t differing = 0;
        for (const CatId s : selected_cats)
          if (s != c) ++differing;
        divgain = std::numbers::sqrt2 * static_cast<double>(differing) /
                  static_cast<double>(selected_cats.size());
      }
      const double score = opt.convex
                               ? (1.0 - opt.lambda_div) * rel + opt.lambda_div * divgain
                               : rel + opt.lambda_div * divgain;
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    const ItemId id = remaining[best];
    out.entries.emplace_back(id, scores.item_probs[static_cast<std::size_t>(id)]);
    selected_cats.push_back(catalog.category(id));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

MetricReport evaluate_examples(const std::vector<RecommendationList>& recs,
                               const std::vector<ItemId>& targets, const ItemCatalog& catalog,
                               const std::vector<std::size_t>& cutoffs,
                               const std::vector<double>& betas) {
  if (recs.size() != targets.size())
    throw ContractError("evaluate_examples: recs and targets must align");
  if (recs.empty()) throw ContractError("evaluate_examples: no examples");

  MetricReport report;
  const double count = static_cast<double>(recs.size());
  for (const std::size_t n : cutoffs) {
    MetricValues acc;
    for (const double b : betas) acc.f_beta[beta_key(b)] = 0.0;
    for (std::size_t e = 0; e < recs.size(); ++e) {
      const double hr = hr_at_n(recs[e], targets[e], n);
      const double ild = ild_at_n(recs[e], catalog, n);
      acc.hr += hr;
      acc.mrr += mrr_at_n(recs[e], targets[e], n);
      acc.ndcg += ndcg_at_n(recs[e], targets[e], n);
      acc.ild += ild;
      acc.entropy += entropy_at_n(recs[e], catalog, n);
      acc.ds += ds_at_n(recs[e], catalog, n);
      acc.f1_hr_ild += f1_hr_ild(hr, ild);
      for (const double b : betas) acc.f_beta[beta_key(b)] += f_beta(hr, ild, b);
    }
    acc.hr /= count;
    acc.mrr /= count;
    acc.ndcg /= count;
    acc.ild /= count;
    acc.entropy /= count;
    acc.ds /= count;
    acc.f1_hr_ild /= count;
    for (auto& [beta, value] : acc.f_beta) value /= count;
    report.per_cutoff[n] = std::move(acc);
  }
  return report;
}

std::string ImprovementReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [n, metrics] : mean_delta) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [key, delta] : metrics) m[key] = delta;
    j[std::to_string(n)] = m;
  }
  return j.dump(2);
}

ImprovementReport improvements(const std::vector<std::pair<MetricReport, MetricReport>>& pairs) {
  std::map<std::size_t, std::map<std::string, std::pair<double, std::size_t>>> sums;
  for (const auto& [framework, base] : pairs) {
    if (framework.per_cutoff.size() != base.per_cutoff.size())
      throw ContractError("improvements: cutoff sets differ");
    for (const auto& [n, fv] : framework.per_cutoff) {
      const auto bit = base.per_cutoff.find(n);
      if (bit == base.per_cutoff.end()) throw ContractError("improvements: cutoff sets differ");
      const MetricValues& bv = bit->second;
      if (fv.f_beta.size() != bv.f_beta.size())
        throw ContractError("improvements: f_beta keys differ");

      const auto accumulate = [&](const std::string& key, double f, double b) {
        if (b == 0.0) return;
        auto& [sum, cnt] = sums[n][key];
        sum += (f - b) / b;
        ++cnt;
      };
      for (const std::string& k : metric_keys())
        accumulate(k, metric_value(fv, k), metric_value(bv, k));
      for (const auto& [beta, f] : fv.f_beta) {
        const auto b = bv.f_beta.find(beta);
        if (b == bv.f_beta.end()) throw ContractError("improvements: f_beta keys differ");
        accumulate("f_beta_" + beta, f, b->second);
      }
    }
  }

  ImprovementReport out;
  for (const auto& [n, metrics] : sums)
    for (const auto& [key, sc] : metrics)
      if (sc.second > 0) out.mean_delta[n][key] = sc.first / static_cast<double>(sc.second);
  return out;
}

}  // namespace dcasr
