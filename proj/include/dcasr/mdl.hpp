#ifndef DCASR_MDL_HPP
#define DCASR_MDL_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "dcasr/diffkernel.hpp"
#include "dcasr/domain.hpp"
#include "dcasr/errors.hpp"

namespace dcasr {

/// Probability mass per category, induced from an item distribution by
/// summing each category's member items.
struct CategoryDistribution {
  std::vector<double> category_probs;

  void validate() const;
};

/// Composite objective parts: total = l_acc + lambda * l_div.
struct LossBreakdown {
  double l_acc = 0.0;
  double l_div = 0.0;
  double lambda = 0.0;
  double total = 0.0;

  void validate(std::size_t num_categories) const;
};

/// Softmax over full-vocabulary logits (max-subtracted).
ScoreDistribution item_distribution(std::span<const double> logits);

/// Category mass by pass-through summation of member item probabilities.
CategoryDistribution category_distribution(const ScoreDistribution& p, const ItemCatalog& catalog);

/// Negative base-2 entropy of the category distribution, in
/// [-log2(num_categories), 0]. Terms below 1e-12 follow the 0*log0 := 0
/// convention.
double diversity_loss(const CategoryDistribution& pc);

LossBreakdown combined_loss(double l_acc, double l_div, double lambda);

/// Entropy floor, shared with the tape-side neg_entropy_bits primitive.
inline constexpr double kEntropyFloor = 1e-12;

/// Indices of the k largest probabilities, ties broken by lower index.
/// Used only by the truncated diversity-loss ablation.
std::vector<std::size_t> top_k_indices(std::span<const double> probs, std::size_t k);

/// Differentiable graph of the diversity penalty on an existing tape.
struct MdlNodes {
  ValueId item_probs;
  ValueId category_probs;
  ValueId l_div;
};

/// Builds softmax -> (optional top-k truncation + renormalization) ->
/// category segment-sum -> negative entropy. `truncate_top_k == 0` is the
/// paper's full-distribution form; a positive value keeps only the top-k
/// item probabilities (ablation flag).
template <typename S>
MdlNodes diversity_graph(Tape<S>& t, ValueId logits, std::span<const CatId> category_of,
                         std::size_t num_categories, std::size_t truncate_top_k = 0) {
  MdlNodes n;
  n.item_probs = t.softmax(logits);
  ValueId mass = n.item_probs;
  if (truncate_top_k > 0 && truncate_top_k < category_of.size()) {
    const Tensor<S>& pv = t.value(n.item_probs);
    std::vector<double> probs(pv.data.begin(), pv.data.end());
    Tensor<S> mask = Tensor<S>::zeros({probs.size()});
    for (const std::size_t i : top_k_indices(probs, truncate_top_k)) mask.data[i] = S(1);
    mass = t.normalize(t.mul(n.item_probs, t.constant(std::move(mask))));
  }
  n.category_probs = t.segment_sum(mass, category_of, num_categories);
  n.l_div = t.neg_entropy_bits(n.category_probs);
  return n;
}

/// total = l_acc + lambda * l_div as a tape node; lambda must be >= 0.
template <typename S>
ValueId composite_loss(Tape<S>& t, ValueId l_acc, ValueId l_div, double lambda) {
  if (lambda < 0.0) throw ContractError("composite_loss: negative lambda");
  return t.add_scaled(l_acc, l_div, static_cast<S>(lambda));
}

}  // namespace dcasr

#endif  // DCASR_MDL_HPP
