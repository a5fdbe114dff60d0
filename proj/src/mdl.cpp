#include "dcasr/mdl.hpp"

#include <algorithm>
#include <cmath>

namespace dcasr {

void CategoryDistribution::validate() const {
  double sum = 0.0;
  for (const double p : category_probs) {
    if (!(p >= 0.0)) throw ValidationError("category distribution: negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("category distribution: entries sum to " + std::to_string(sum));
}

void LossBreakdown::validate(std::size_t num_categories) const {
  if (lambda < 0.0) throw ValidationError("loss breakdown: negative lambda");
  if (std::abs(total - (l_acc + lambda * l_div)) > 1e-9)
    throw ValidationError("loss breakdown: total is not l_acc + lambda*l_div");
  const double lo = -std::log2(static_cast<double>(num_categories));
  if (l_div < lo - 1e-9 || l_div > 1e-9)
    throw ValidationError("loss breakdown: l_div outside [-log2(C), 0]");
}

ScoreDistribution item_distribution(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("item_distribution: empty logits");
  for (const double z : logits)
    if (!std::isfinite(z)) throw NumericError("item_distribution: non-finite logit");
  const double m = *std::max_element(logits.begin(), logits.end());
  ScoreDistribution out;
  out.item_probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.item_probs[i] = std::exp(logits[i] - m);
    sum += out.item_probs[i];
  }
  for (double& p : out.item_probs) p /= sum;
  return out;
}

CategoryDistribution category_distribution(const ScoreDistribution& p, const ItemCatalog& catalog) {
  if (p.item_probs.size() != catalog.num_items())
    throw ContractError("category_distribution: item count mismatch");
  CategoryDistribution out;
  out.category_probs.assign(catalog.num_categories(), 0.0);
  for (std::size_t i = 0; i < p.item_probs.size(); ++i)
    out.category_probs[static_cast<std::size_t>(catalog.category(static_cast<ItemId>(i)))] +=
        p.item_probs[i];
  return out;
}

double diversity_loss(const CategoryDistribution& pc) {
  double acc = 0.0;
  for (const double p : pc.category_probs)
    if (p >= kEntropyFloor) acc += p * std::log2(p);
  return acc;
}

LossBreakdown combined_loss(double l_acc, double l_div, double lambda) {
  if (lambda < 0.0) throw ContractError("combined_loss: negative lambda");
  LossBreakdown out;
  out.l_acc = l_acc;
  out.l_div = l_div;
  out.lambda = lambda;
  out.total = l_acc + lambda * l_div;
  return out;
}

std::vector<std::size_t> top_k_indices(std::span<const double> probs, std::size_t k) {
  std::vector<std::size_t> idx(probs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (probs[a] != probs[b]) return probs[a] > probs[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace dcasr
