#ifndef DCASR_BACKBONES_HPP
#define DCASR_BACKBONES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcasr/diffkernel.hpp"
#include "dcasr/domain.hpp"
#include "dcasr/errors.hpp"
#include "dcasr/nca.hpp"

namespace dcasr {

enum class Backbone { gru4rec, narm, stamp };

inline Backbone parse_backbone(const std::string& s) {
  if (s == "gru4rec") return Backbone::gru4rec;
  if (s == "narm") return Backbone::narm;
  if (s == "stamp") return Backbone::stamp;
  throw SchemaError("unknown backbone: " + s);
}

inline std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::gru4rec: return "gru4rec";
    case Backbone::narm: return "narm";
    case Backbone::stamp: return "stamp";
  }
  throw ContractError("invalid backbone enum");
}

/// Only the additive fusor exists; the alternatives named in the literature
/// (concatenation, gating) are rejected at parse time.
enum class Fusor { add };

inline Fusor parse_fusor(const std::string& s) {
  if (s == "add") return Fusor::add;
  throw ContractError("fusor '" + s + "' is not implemented; only 'add' is supported");
}

struct EncoderConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 16;
  std::size_t n_gru_layers = 1;
  Backbone backbone = Backbone::narm;
  bool use_nca = false;
  /// Attention readout for the gru4rec backbone. Category-aware attention
  /// needs an attention signal to inject into, so use_nca implies it.
  bool gru_attention = false;
  Fusor fusor = Fusor::add;

  void validate() const {
    if (embed_dim < 1 || hidden_dim < 1) throw ValidationError("encoder config: dims must be >= 1");
    if (n_gru_layers < 1) throw ValidationError("encoder config: n_gru_layers must be >= 1");
  }

  bool attention_enabled() const {
    if (backbone == Backbone::gru4rec) return use_nca || gru_attention;
    return true;
  }

  /// Dim the category embedding is added to: the attention-score space.
  std::size_t category_dim() const {
    return backbone == Backbone::stamp ? embed_dim : hidden_dim;
  }
};

/// Per-position top-layer hidden state nodes h_1..h_t.
using HiddenStates = std::vector<ValueId>;
/// Final pre-decode representation node.
using SessionRepresentation = ValueId;

/// Bilinear similarity decode: logits_i = e_i' (B rep) for every item i.
template <typename S>
ValueId similarity_decode(Tape<S>& t, SessionRepresentation rep, ValueId bilinear,
                          ValueId item_emb) {
  return t.matvec(item_emb, t.matvec(bilinear, rep));
}

/// Intermediate nodes of one forward pass, exposed so tests can read the
/// attention weights and representations directly off the tape.
struct ForwardNodes {
  std::vector<ValueId> item_vecs;  // x_1..x_t (raw embeddings)
  HiddenStates hidden;             // gru-based backbones only
  std::vector<ValueId> attention;  // raw scalar weights, when attention is on
  SessionRepresentation representation{};
  ValueId logits{};
};

/// One encoder instance: owns the parameter store and builds forward graphs
/// for next-item logits over the full item vocabulary.
template <typename S>
class SessionModel {
 public:
  SessionModel(EncoderConfig cfg, std::size_t num_items, std::size_t num_categories,
               std::uint64_t seed)
      : cfg_(cfg), num_items_(num_items), num_categories_(num_categories) {
    cfg_.validate();
    if (num_items_ < 1 || num_categories_ < 1)
      throw ValidationError("session model: empty catalog");
    register_params(seed);
  }

  const EncoderConfig& config() const { return cfg_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_categories() const { return num_categories_; }
  ParameterStore<S>& params() { return params_; }
  const ParameterStore<S>& params() const { return params_; }

  /// Zeroes the category table and freezes it, turning the NCA variant into
  /// an exact functional copy of its base architecture.
  void zero_and_freeze_categories() {
    if (!cfg_.use_nca) throw ContractError("model has no category table");
    auto& v = params_.value("cat_emb");
    std::fill(v.data.begin(), v.data.end(), S(0));
    params_.set_trainable("cat_emb", false);
  }

  ForwardNodes forward(Tape<S>& t, std::span<const ItemId> prefix,
                       std::span<const CatId> prefix_cats) {
    if (prefix.empty()) throw ContractError("forward: empty prefix");
    for (const ItemId i : prefix)
      if (i < 0 || static_cast<std::size_t>(i) >= num_items_)
        throw ContractError("forward: item id out of range");
    if (cfg_.use_nca) {
      if (prefix_cats.size() != prefix.size())
        throw ContractError("forward: category sequence must align with the prefix");
      for (const CatId c : prefix_cats)
        if (c < 0 || static_cast<std::size_t>(c) >= num_categories_)
          throw ContractError("forward: category id out of range");
    }

    ForwardNodes n;
    const ValueId item_emb = t.param("item_emb");
    const ValueId emb_rows = t.embed_lookup("item_emb", prefix);
    for (std::size_t i = 0; i < prefix.size(); ++i) n.item_vecs.push_back(t.row(emb_rows, i));

    // Score signals are always fused; the base variants fuse a constant zero
    // vector. Adding zero leaves every forward value bit-identical to the
    // unfused graph, and it keeps the graph structure independent of use_nca,
    // so a zeroed frozen category table reproduces the base training
    // trajectory bit for bit (same buffers, same accumulation order).
    std::vector<ValueId> cat_vecs;
    if (cfg_.use_nca) {
      const ValueId cat_rows = t.embed_lookup("cat_emb", prefix_cats);
      for (std::size_t i = 0; i < prefix.size(); ++i) cat_vecs.push_back(t.row(cat_rows, i));
    } else if (cfg_.attention_enabled()) {
      cat_vecs.assign(prefix.size(), t.zeros({cfg_.category_dim()}));
    }

    if (cfg_.backbone == Backbone::stamp) {
      const auto att =
          nca_attention_stamp(t, std::span<const ValueId>(n.item_vecs), cat_vecs,
                              t.param("attn.w0"), t.param("attn.w1"), t.param("attn.w2"),
                              t.param("attn.w3"), t.param("attn.ba"));
      n.attention = att.alpha;
      const ValueId h_s = t.tanh_(t.affine(t.param("mlp_s.w"), att.m_a, t.param("mlp_s.b")));
      const ValueId h_t =
          t.tanh_(t.affine(t.param("mlp_t.w"), n.item_vecs.back(), t.param("mlp_t.b")));
      n.representation = t.mul(h_s, h_t);
      n.logits = t.matvec(item_emb, n.representation);
      return n;
    }

    // GRU-based backbones: stacked cells, one pass per position.
    std::vector<GruCellIds> layers;
    for (std::size_t l = 0; l < cfg_.n_gru_layers; ++l) {
      const std::string p = "gru" + std::to_string(l) + ".";
      layers.push_back(GruCellIds{t.param(p + "wz"), t.param(p + "uz"), t.param(p + "bz"),
                                  t.param(p + "wr"), t.param(p + "ur"), t.param(p + "br"),
                                  t.param(p + "wn"), t.param(p + "un"), t.param(p + "bn")});
    }
    std::vector<ValueId> h(cfg_.n_gru_layers);
    for (std::size_t l = 0; l < cfg_.n_gru_layers; ++l) h[l] = t.zeros({cfg_.hidden_dim});
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      ValueId x = n.item_vecs[i];
      for (std::size_t l = 0; l < cfg_.n_gru_layers; ++l) {
        h[l] = gru_cell(t, layers[l], h[l], x);
        x = h[l];
      }
      n.hidden.push_back(h.back());
    }

    if (!cfg_.attention_enabled()) {
      n.representation = n.hidden.back();
    } else {
      n.attention = nca_attention_narm(t, std::span<const ValueId>(n.hidden), cat_vecs,
                                       t.param("attn.a1"), t.param("attn.a2"), t.param("attn.v"));
      const ValueId local = t.weighted_sum(std::span<const ValueId>(n.hidden),
                                           std::span<const ValueId>(n.attention));
      n.representation = t.concat(n.hidden.back(), local);
    }
    n.logits = similarity_decode(t, n.representation, t.param("decode.B"), item_emb);
    return n;
  }

  ValueId forward_logits(Tape<S>& t, std::span<const ItemId> prefix,
                         std::span<const CatId> prefix_cats) {
    return forward(t, prefix, prefix_cats).logits;
  }

  /// Plain logits without gradient bookkeeping (fresh local tape).
  std::vector<double> logits(std::span<const ItemId> prefix, std::span<const CatId> prefix_cats) {
    Tape<S> t(&params_);
    const ValueId z = forward_logits(t, prefix, prefix_cats);
    const Tensor<S>& v = t.value(z);
    return std::vector<double>(v.data.begin(), v.data.end());
  }

 private:
  void register_params(std::uint64_t seed) {
    params_.add("item_emb", {num_items_, cfg_.embed_dim}, cfg_.embed_dim, seed);
    if (cfg_.use_nca) {
      // One shared table; the extra zeroed row is reserved for padding.
      const std::size_t d = cfg_.category_dim();
      params_.add("cat_emb", {num_categories_ + 1, d}, d, seed);
      auto& v = params_.value("cat_emb");
      for (std::size_t j = 0; j < d; ++j) v.at(num_categories_, j) = S(0);
    }
    // Every draw is uniform +-1/sqrt(d) with d the output dimension
    // (vector length for biases and embedding rows).
    if (cfg_.backbone == Backbone::stamp) {
      const std::size_t d = cfg_.embed_dim;
      params_.add("attn.w0", {d}, d, seed);
      for (const char* w : {"attn.w1", "attn.w2", "attn.w3"}) params_.add(w, {d, d}, d, seed);
      params_.add("attn.ba", {d}, d, seed);
      params_.add("mlp_s.w", {d, d}, d, seed);
      params_.add("mlp_s.b", {d}, d, seed);
      params_.add("mlp_t.w", {d, d}, d, seed);
      params_.add("mlp_t.b", {d}, d, seed);
      return;
    }
    for (std::size_t l = 0; l < cfg_.n_gru_layers; ++l) {
      const std::string p = "gru" + std::to_string(l) + ".";
      const std::size_t in = l == 0 ? cfg_.embed_dim : cfg_.hidden_dim;
      for (const char* g : {"wz", "wr", "wn"})
        params_.add(p + g, {cfg_.hidden_dim, in}, cfg_.hidden_dim, seed);
      for (const char* g : {"uz", "ur", "un"})
        params_.add(p + g, {cfg_.hidden_dim, cfg_.hidden_dim}, cfg_.hidden_dim, seed);
      for (const char* g : {"bz", "br", "bn"})
        params_.add(p + g, {cfg_.hidden_dim}, cfg_.hidden_dim, seed);
    }
    if (cfg_.attention_enabled()) {
      params_.add("attn.a1", {cfg_.hidden_dim, cfg_.hidden_dim}, cfg_.hidden_dim, seed);
      params_.add("attn.a2", {cfg_.hidden_dim, cfg_.hidden_dim}, cfg_.hidden_dim, seed);
      params_.add("attn.v", {cfg_.hidden_dim}, cfg_.hidden_dim, seed);
      params_.add("decode.B", {cfg_.embed_dim, 2 * cfg_.hidden_dim}, cfg_.embed_dim, seed);
    } else {
      params_.add("decode.B", {cfg_.embed_dim, cfg_.hidden_dim}, cfg_.embed_dim, seed);
    }
  }

  EncoderConfig cfg_;
  std::size_t num_items_;
  std::size_t num_categories_;
  ParameterStore<S> params_;
};

}  // namespace dcasr

#endif  // DCASR_BACKBONES_HPP
