#ifndef DCASR_NCA_HPP
#define DCASR_NCA_HPP

#include <span>
#include <vector>

#include "dcasr/diffkernel.hpp"
#include "dcasr/errors.hpp"

namespace dcasr {

/// Element-wise additive fusor. Scores are computed on fused vectors while
/// readout sums stay on the raw ones; that split is the whole mechanism.
template <typename S>
ValueId fuse(Tape<S>& t, ValueId hidden, ValueId category) {
  if (!t.value(hidden).same_shape(t.value(category)))
    throw ContractError("fuse: hidden dim " + t.value(hidden).shape_str() +
                        " vs category dim " + t.value(category).shape_str());
  return t.add(hidden, category);
}

/// alpha_tj = v' sigmoid(A1 s_t + A2 s_j) over the given score signals,
/// j = 1..t with t the last position. The weights are raw bilinear-sigmoid
/// scores; no normalization across j is applied.
template <typename S>
std::vector<ValueId> attention_weights_from_signals(Tape<S>& t, std::span<const ValueId> signals,
                                                    ValueId a1, ValueId a2, ValueId v) {
  if (signals.empty()) throw ContractError("attention: empty signal sequence");
  const ValueId proj_t = t.matvec(a1, signals.back());
  std::vector<ValueId> alpha;
  alpha.reserve(signals.size());
  for (const ValueId s : signals)
    alpha.push_back(t.dot(v, t.sigmoid(t.add(proj_t, t.matvec(a2, s)))));
  return alpha;
}

/// Category-aware NARM attention: signals are h_j + c_j. Returns the raw
/// weights only; the caller's readout must use the raw hidden states.
template <typename S>
std::vector<ValueId> nca_attention_narm(Tape<S>& t, std::span<const ValueId> h,
                                        std::span<const ValueId> cat, ValueId a1, ValueId a2,
                                        ValueId v) {
  if (h.size() != cat.size())
    throw ContractError("nca_attention_narm: category sequence length mismatch");
  std::vector<ValueId> signals;
  signals.reserve(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) signals.push_back(fuse(t, h[j], cat[j]));
  return attention_weights_from_signals(t, signals, a1, a2, v);
}

template <typename S>
struct StampAttentionNodes {
  ValueId m_s;                 // mean over score signals
  std::vector<ValueId> alpha;  // raw scalar weights
  ValueId m_a;                 // weighted sum of raw item embeddings
};

/// STAMP attention over score signals:
///   m_s = (1/t) sum_i s_i,
///   alpha_i = w0' sigmoid(W1 s_i + W2 s_t + W3 m_s + ba),
///   m_a = sum_i alpha_i x_i   (raw x, never the fused signals).
template <typename S>
StampAttentionNodes<S> stamp_attention_from_signals(Tape<S>& t, std::span<const ValueId> xs_raw,
                                                    std::span<const ValueId> signals, ValueId w0,
                                                    ValueId w1, ValueId w2, ValueId w3,
                                                    ValueId ba) {
  if (xs_raw.empty() || xs_raw.size() != signals.size())
    throw ContractError("stamp attention: raw and signal sequences must align");
  StampAttentionNodes<S> out;
  out.m_s = t.mean_over_sequence(signals);
  const ValueId proj_t = t.matvec(w2, signals.back());
  const ValueId proj_s = t.add(t.matvec(w3, out.m_s), ba);
  out.alpha.reserve(signals.size());
  for (const ValueId s : signals)
    out.alpha.push_back(t.dot(w0, t.sigmoid(t.add(t.add(t.matvec(w1, s), proj_t), proj_s))));
  out.m_a = t.weighted_sum(xs_raw, out.alpha);
  return out;
}

/// Category-aware STAMP attention: signals are x_i + c_i.
template <typename S>
StampAttentionNodes<S> nca_attention_stamp(Tape<S>& t, std::span<const ValueId> xs,
                                           std::span<const ValueId> cat, ValueId w0, ValueId w1,
                                           ValueId w2, ValueId w3, ValueId ba) {
  if (xs.size() != cat.size())
    throw ContractError("nca_attention_stamp: category sequence length mismatch");
  std::vector<ValueId> signals;
  signals.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) signals.push_back(fuse(t, xs[i], cat[i]));
  return stamp_attention_from_signals(t, xs, signals, w0, w1, w2, w3, ba);
}

}  // namespace dcasr

#endif  // DCASR_NCA_HPP
