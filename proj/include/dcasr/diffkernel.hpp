#ifndef DCASR_DIFFKERNEL_HPP
#define DCASR_DIFFKERNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcasr/domain.hpp"
#include "dcasr/errors.hpp"
#include "dcasr/rng.hpp"
#include "dcasr/tensor.hpp"

namespace dcasr {

/// Handle to a node on a Tape.
struct ValueId {
  std::uint32_t idx = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return idx != std::numeric_limits<std::uint32_t>::max(); }
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named trainable arrays plus per-parameter Adam state. Iteration order is
/// registration order; initialization draws are seeded per name so a
/// parameter's initial value never depends on what else is registered.
template <typename S>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> adam_m;
    Tensor<S> adam_v;
    bool trainable = true;
  };

  /// Register a parameter initialized uniform in [-1/sqrt(init_dim), 1/sqrt(init_dim)].
  void add(const std::string& name, std::vector<std::size_t> shape, std::size_t init_dim,
           std::uint64_t seed) {
    Entry& e = add_entry(name, std::move(shape));
    Rng rng(hash_name(seed, name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(init_dim));
    for (S& v : e.value.data) v = static_cast<S>(rng.uniform(-bound, bound));
  }

  void add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    add_entry(name, std::move(shape));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.name);
    return out;
  }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  Tensor<S>& value(const std::string& name) { return entries_[find(name)].value; }
  const Tensor<S>& value(const std::string& name) const { return entries_[find(name)].value; }
  Tensor<S>& grad(const std::string& name) { return entries_[find(name)].grad; }

  void set_trainable(const std::string& name, bool trainable) {
    entries_[find(name)].trainable = trainable;
  }

  void zero_grads() {
    for (Entry& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), S(0));
    grads_populated_ = false;
  }

  void mark_grads_populated() { grads_populated_ = true; }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  /// Bias-corrected Adam update, applied in place to trainable entries.
  void adam_step(const AdamConfig& cfg) {
    if (!grads_populated_)
      throw ContractError("adam_step: gradients missing (no backward pass since last step)");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (Entry& e : entries_) {
      if (!e.trainable) continue;
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double g = static_cast<double>(e.grad.data[i]);
        const double m = cfg.beta1 * static_cast<double>(e.adam_m.data[i]) + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * static_cast<double>(e.adam_v.data[i]) + (1.0 - cfg.beta2) * g * g;
        e.adam_m.data[i] = static_cast<S>(m);
        e.adam_v.data[i] = static_cast<S>(v);
        const double update = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
        e.value.data[i] = static_cast<S>(static_cast<double>(e.value.data[i]) - update);
      }
    }
    grads_populated_ = false;
  }

 private:
  Entry& add_entry(const std::string& name, std::vector<std::size_t> shape) {
    if (has(name)) throw ContractError("param store: duplicate name " + name);
    Entry e;
    e.name = name;
    e.value = Tensor<S>::zeros(shape);
    e.grad = Tensor<S>::zeros(shape);
    e.adam_m = Tensor<S>::zeros(shape);
    e.adam_v = Tensor<S>::zeros(std::move(shape));
    index_.emplace(name, entries_.size());
    entries_.push_back(std::move(e));
    return entries_.back();
  }

  std::size_t find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("param store: unknown name " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
  bool grads_populated_ = false;
};

#ifdef NDEBUG
inline constexpr bool kCheckFiniteDefault = false;
#else
inline constexpr bool kCheckFiniteDefault = true;
#endif

/// Single-use reverse-mode tape. Forward primitives record their backward
/// rule as a closure; backward() runs the closures in reverse creation order
/// and accumulates parameter gradients into the bound store.
template <typename S>
class Tape {
 public:
  explicit Tape(ParameterStore<S>* store = nullptr, bool check_finite = kCheckFiniteDefault)
      : store_(store), check_finite_(check_finite) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Tensor<S>& value(ValueId id) const { return nodes_[id.idx].value; }
  const Tensor<S>& grad(ValueId id) const { return nodes_[id.idx].grad; }
  std::size_t size() const { return nodes_.size(); }

  ValueId constant(Tensor<S> t) { return push(std::move(t), {}); }

  ValueId zeros(std::vector<std::size_t> shape) {
    return push(Tensor<S>::zeros(std::move(shape)), {});
  }

  /// Leaf view of a whole parameter; backward adds into the store's grad.
  ValueId param(const std::string& name) {
    require_store();
    Tensor<S> v = store_->value(name);
    const ValueId id = push(std::move(v), [name](Tape& t, std::uint32_t self) {
      Tensor<S>& g = t.store_->grad(name);
      const Tensor<S>& gs = t.nodes_[self].grad;
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gs.data[i];
      t.store_->mark_grads_populated();
    });
    return id;
  }

  /// Gather rows of an embedding table; backward scatter-adds into the table.
  ValueId embed_lookup(const std::string& table, std::span<const ItemId> ids) {
    require_store();
    const Tensor<S>& tab = store_->value(table);
    if (tab.rank() != 2) throw ContractError("embed_lookup: " + table + " is not a matrix");
    const std::size_t d = tab.cols();
    Tensor<S> out = Tensor<S>::zeros({ids.size(), d});
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto r = static_cast<std::size_t>(ids[k]);
      if (ids[k] < 0 || r >= tab.rows())
        throw ContractError("embed_lookup: row out of range for " + table);
      std::copy_n(&tab.data[r * d], d, &out.data[k * d]);
    }
    std::vector<ItemId> idv(ids.begin(), ids.end());
    return push(std::move(out), [table, idv, d](Tape& t, std::uint32_t self) {
      Tensor<S>& g = t.store_->grad(table);
      const Tensor<S>& gs = t.nodes_[self].grad;
      for (std::size_t k = 0; k < idv.size(); ++k) {
        const auto r = static_cast<std::size_t>(idv[k]);
        for (std::size_t j = 0; j < d; ++j) g.data[r * d + j] += gs.data[k * d + j];
      }
      t.store_->mark_grads_populated();
    });
  }

  /// Row slice of a matrix node, as a vector.
  ValueId row(ValueId m, std::size_t r) {
    const Tensor<S>& mv = value(m);
    if (mv.rank() != 2 || r >= mv.rows()) throw ContractError("row: index out of range");
    const std::size_t d = mv.cols();
    Tensor<S> out({d}, std::vector<S>(mv.data.begin() + static_cast<std::ptrdiff_t>(r * d),
                                      mv.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * d)));
    return push(std::move(out), [m, r, d](Tape& t, std::uint32_t self) {
      const Tensor<S>& gs = t.nodes_[self].grad;
      Tensor<S>& gm = t.nodes_[m.idx].grad;
      for (std::size_t j = 0; j < d; ++j) gm.data[r * d + j] += gs.data[j];
    });
  }

  ValueId matmul(ValueId a, ValueId b) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
      throw ContractError("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
    const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
    Tensor<S> out = Tensor<S>::zeros({r, c});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const S aik = av.data[i * k + kk];
        for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += aik * bv.data[kk * c + j];
      }
    return push(std::move(out), [a, b, r, k, c](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& av2 = t.nodes_[a.idx].value;
      const Tensor<S>& bv2 = t.nodes_[b.idx].value;
      Tensor<S>& ga = t.nodes_[a.idx].grad;
      Tensor<S>& gb = t.nodes_[b.idx].grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const S gij = g.data[i * c + j];
          for (std::size_t kk = 0; kk < k; ++kk) {
            ga.data[i * k + kk] += gij * bv2.data[kk * c + j];
            gb.data[kk * c + j] += av2.data[i * k + kk] * gij;
          }
        }
    });
  }

  ValueId matvec(ValueId a, ValueId x) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& xv = value(x);
    if (av.rank() != 2 || xv.rank() != 1 || av.cols() != xv.size())
      throw ContractError("matvec: incompatible shapes " + av.shape_str() + " x " + xv.shape_str());
    const std::size_t r = av.rows(), c = av.cols();
    Tensor<S> out = Tensor<S>::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
      S acc = S(0);
      for (std::size_t j = 0; j < c; ++j) acc += av.data[i * c + j] * xv.data[j];
      out.data[i] = acc;
    }
    return push(std::move(out), [a, x, r, c](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& av2 = t.nodes_[a.idx].value;
      const Tensor<S>& xv2 = t.nodes_[x.idx].value;
      Tensor<S>& ga = t.nodes_[a.idx].grad;
      Tensor<S>& gx = t.nodes_[x.idx].grad;
      for (std::size_t i = 0; i < r; ++i) {
        const S gi = g.data[i];
        for (std::size_t j = 0; j < c; ++j) {
          ga.data[i * c + j] += gi * xv2.data[j];
          gx.data[j] += av2.data[i * c + j] * gi;
        }
      }
    });
  }

  /// W*x + b in one node.
  ValueId affine(ValueId w, ValueId x, ValueId b) {
    const Tensor<S>& wv = value(w);
    const Tensor<S>& xv = value(x);
    const Tensor<S>& bv = value(b);
    if (wv.rank() != 2 || xv.rank() != 1 || bv.rank() != 1 || wv.cols() != xv.size() ||
        wv.rows() != bv.size())
      throw ContractError("affine: incompatible shapes");
    const std::size_t r = wv.rows(), c = wv.cols();
    Tensor<S> out = Tensor<S>::zeros({r});
    for (std::size_t i = 0; i < r; ++i) {
      S acc = bv.data[i];
      for (std::size_t j = 0; j < c; ++j) acc += wv.data[i * c + j] * xv.data[j];
      out.data[i] = acc;
    }
    return push(std::move(out), [w, x, b, r, c](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& wv2 = t.nodes_[w.idx].value;
      const Tensor<S>& xv2 = t.nodes_[x.idx].value;
      Tensor<S>& gw = t.nodes_[w.idx].grad;
      Tensor<S>& gx = t.nodes_[x.idx].grad;
      Tensor<S>& gb = t.nodes_[b.idx].grad;
      for (std::size_t i = 0; i < r; ++i) {
        const S gi = g.data[i];
        gb.data[i] += gi;
        for (std::size_t j = 0; j < c; ++j) {
          gw.data[i * c + j] += gi * xv2.data[j];
          gx.data[j] += wv2.data[i * c + j] * gi;
        }
      }
    });
  }

  ValueId add(ValueId a, ValueId b) {
    return binary_elementwise(
        a, b, [](S u, S v) { return u + v; },
        [](Tape& t, std::uint32_t self, ValueId aa, ValueId bb) {
          const Tensor<S>& g = t.nodes_[self].grad;
          accumulate(t.nodes_[aa.idx].grad, g, S(1));
          accumulate(t.nodes_[bb.idx].grad, g, S(1));
        },
        "add");
  }

  ValueId sub(ValueId a, ValueId b) {
    return binary_elementwise(
        a, b, [](S u, S v) { return u - v; },
        [](Tape& t, std::uint32_t self, ValueId aa, ValueId bb) {
          const Tensor<S>& g = t.nodes_[self].grad;
          accumulate(t.nodes_[aa.idx].grad, g, S(1));
          accumulate(t.nodes_[bb.idx].grad, g, S(-1));
        },
        "sub");
  }

  ValueId mul(ValueId a, ValueId b) {
    return binary_elementwise(
        a, b, [](S u, S v) { return u * v; },
        [](Tape& t, std::uint32_t self, ValueId aa, ValueId bb) {
          const Tensor<S>& g = t.nodes_[self].grad;
          const Tensor<S>& av = t.nodes_[aa.idx].value;
          const Tensor<S>& bv = t.nodes_[bb.idx].value;
          Tensor<S>& ga = t.nodes_[aa.idx].grad;
          Tensor<S>& gb = t.nodes_[bb.idx].grad;
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga.data[i] += g.data[i] * bv.data[i];
            gb.data[i] += g.data[i] * av.data[i];
          }
        },
        "mul");
  }

  ValueId sigmoid(ValueId x) {
    Tensor<S> out = value(x);
    for (S& v : out.data) v = S(1) / (S(1) + std::exp(-v));
    return push(std::move(out), [x](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& y = t.nodes_[self].value;
      Tensor<S>& gx = t.nodes_[x.idx].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        gx.data[i] += g.data[i] * y.data[i] * (S(1) - y.data[i]);
    });
  }

  ValueId tanh_(ValueId x) {
    Tensor<S> out = value(x);
    for (S& v : out.data) v = std::tanh(v);
    return push(std::move(out), [x](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& y = t.nodes_[self].value;
      Tensor<S>& gx = t.nodes_[x.idx].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        gx.data[i] += g.data[i] * (S(1) - y.data[i] * y.data[i]);
    });
  }

  ValueId scale(ValueId x, S c) {
    Tensor<S> out = value(x);
    for (S& v : out.data) v *= c;
    return push(std::move(out), [x, c](Tape& t, std::uint32_t self) {
      accumulate(t.nodes_[x.idx].grad, t.nodes_[self].grad, c);
    });
  }

  /// a + c*b, any matching shapes (used for the composite loss).
  ValueId add_scaled(ValueId a, ValueId b, S c) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (!av.same_shape(bv)) throw ContractError("add_scaled: shape mismatch");
    Tensor<S> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += c * bv.data[i];
    return push(std::move(out), [a, b, c](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      accumulate(t.nodes_[a.idx].grad, g, S(1));
      accumulate(t.nodes_[b.idx].grad, g, c);
    });
  }

  ValueId concat(ValueId a, ValueId b) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (av.rank() != 1 || bv.rank() != 1) throw ContractError("concat: vectors required");
    Tensor<S> out = Tensor<S>::zeros({av.size() + bv.size()});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(av.size()));
    const std::size_t na = av.size();
    return push(std::move(out), [a, b, na](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      Tensor<S>& ga = t.nodes_[a.idx].grad;
      Tensor<S>& gb = t.nodes_[b.idx].grad;
      for (std::size_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
      for (std::size_t i = na; i < g.size(); ++i) gb.data[i - na] += g.data[i];
    });
  }

  ValueId mean_over_sequence(std::span<const ValueId> vecs) {
    if (vecs.empty()) throw ContractError("mean_over_sequence: empty sequence");
    const std::size_t d = value(vecs.front()).size();
    Tensor<S> out = Tensor<S>::zeros({d});
    for (const ValueId v : vecs) {
      const Tensor<S>& vv = value(v);
      if (vv.size() != d) throw ContractError("mean_over_sequence: ragged inputs");
      for (std::size_t i = 0; i < d; ++i) out.data[i] += vv.data[i];
    }
    const S inv = S(1) / static_cast<S>(vecs.size());
    for (S& v : out.data) v *= inv;
    std::vector<ValueId> ids(vecs.begin(), vecs.end());
    return push(std::move(out), [ids, inv](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      for (const ValueId v : ids) accumulate(t.nodes_[v.idx].grad, g, inv);
    });
  }

  /// sum_j w_j * v_j with scalar-node weights.
  ValueId weighted_sum(std::span<const ValueId> vecs, std::span<const ValueId> weights) {
    if (vecs.empty() || vecs.size() != weights.size())
      throw ContractError("weighted_sum: inputs must be nonempty and aligned");
    const std::size_t d = value(vecs.front()).size();
    Tensor<S> out = Tensor<S>::zeros({d});
    for (std::size_t j = 0; j < vecs.size(); ++j) {
      const Tensor<S>& vv = value(vecs[j]);
      const Tensor<S>& wv = value(weights[j]);
      if (vv.size() != d || wv.rank() != 0)
        throw ContractError("weighted_sum: shape mismatch");
      const S w = wv.data[0];
      for (std::size_t i = 0; i < d; ++i) out.data[i] += w * vv.data[i];
    }
    std::vector<ValueId> vs(vecs.begin(), vecs.end());
    std::vector<ValueId> ws(weights.begin(), weights.end());
    return push(std::move(out), [vs, ws](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      for (std::size_t j = 0; j < vs.size(); ++j) {
        const Tensor<S>& vv = t.nodes_[vs[j].idx].value;
        const S w = t.nodes_[ws[j].idx].value.data[0];
        Tensor<S>& gv = t.nodes_[vs[j].idx].grad;
        S gw = S(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          gv.data[i] += w * g.data[i];
          gw += g.data[i] * vv.data[i];
        }
        t.nodes_[ws[j].idx].grad.data[0] += gw;
      }
    });
  }

  ValueId dot(ValueId a, ValueId b) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (av.rank() != 1 || !av.same_shape(bv)) throw ContractError("dot: shape mismatch");
    S acc = S(0);
    for (std::size_t i = 0; i < av.size(); ++i) acc += av.data[i] * bv.data[i];
    return push(Tensor<S>::scalar(acc), [a, b](Tape& t, std::uint32_t self) {
      const S g = t.nodes_[self].grad.data[0];
      const Tensor<S>& av2 = t.nodes_[a.idx].value;
      const Tensor<S>& bv2 = t.nodes_[b.idx].value;
      Tensor<S>& ga = t.nodes_[a.idx].grad;
      Tensor<S>& gb = t.nodes_[b.idx].grad;
      for (std::size_t i = 0; i < av2.size(); ++i) {
        ga.data[i] += g * bv2.data[i];
        gb.data[i] += g * av2.data[i];
      }
    });
  }

  /// Max-subtracted softmax over a vector of logits.
  ValueId softmax(ValueId z) {
    const Tensor<S>& zv = value(z);
    if (zv.rank() != 1) throw ContractError("softmax: vector required");
    Tensor<S> out = zv;
    const S m = *std::max_element(out.data.begin(), out.data.end());
    S sum = S(0);
    for (S& v : out.data) {
      v = std::exp(v - m);
      sum += v;
    }
    for (S& v : out.data) v /= sum;
    return push(std::move(out), [z](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& p = t.nodes_[self].value;
      Tensor<S>& gz = t.nodes_[z.idx].grad;
      S gp = S(0);
      for (std::size_t i = 0; i < g.size(); ++i) gp += g.data[i] * p.data[i];
      for (std::size_t i = 0; i < g.size(); ++i)
        gz.data[i] += p.data[i] * (g.data[i] - gp);
    });
  }

  /// Numerically fused cross entropy: logsumexp(z) - z[target], natural log.
  ValueId cross_entropy_from_logits(ValueId z, ItemId target) {
    const Tensor<S>& zv = value(z);
    if (zv.rank() != 1) throw ContractError("cross_entropy_from_logits: vector required");
    if (target < 0 || static_cast<std::size_t>(target) >= zv.size())
      throw ContractError("cross_entropy_from_logits: target out of range");
    const S m = *std::max_element(zv.data.begin(), zv.data.end());
    S sum = S(0);
    for (const S v : zv.data) sum += std::exp(v - m);
    const S loss = m + std::log(sum) - zv.data[static_cast<std::size_t>(target)];
    return push(Tensor<S>::scalar(loss), [z, target, m, sum](Tape& t, std::uint32_t self) {
      const S g = t.nodes_[self].grad.data[0];
      const Tensor<S>& zv2 = t.nodes_[z.idx].value;
      Tensor<S>& gz = t.nodes_[z.idx].grad;
      for (std::size_t i = 0; i < zv2.size(); ++i) {
        const S p = std::exp(zv2.data[i] - m) / sum;
        gz.data[i] += g * (p - (static_cast<ItemId>(i) == target ? S(1) : S(0)));
      }
    });
  }

  /// y = x / sum(x). Requires a strictly positive sum.
  ValueId normalize(ValueId x) {
    const Tensor<S>& xv = value(x);
    if (xv.rank() != 1) throw ContractError("normalize: vector required");
    S s = S(0);
    for (const S v : xv.data) s += v;
    if (!(static_cast<double>(s) > 0.0)) throw NumericError("normalize: non-positive mass");
    Tensor<S> out = xv;
    for (S& v : out.data) v /= s;
    return push(std::move(out), [x, s](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      const Tensor<S>& y = t.nodes_[self].value;
      Tensor<S>& gx = t.nodes_[x.idx].grad;
      S gy = S(0);
      for (std::size_t i = 0; i < g.size(); ++i) gy += g.data[i] * y.data[i];
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += (g.data[i] - gy) / s;
    });
  }

  /// Sums probability mass per segment (differentiable pass-through).
  ValueId segment_sum(ValueId p, std::span<const CatId> segment_of, std::size_t n_segments) {
    const Tensor<S>& pv = value(p);
    if (pv.rank() != 1 || pv.size() != segment_of.size())
      throw ContractError("segment_sum: segment map size mismatch");
    Tensor<S> out = Tensor<S>::zeros({n_segments});
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const auto s = static_cast<std::size_t>(segment_of[i]);
      if (segment_of[i] < 0 || s >= n_segments)
        throw ContractError("segment_sum: segment id out of range");
      out.data[s] += pv.data[i];
    }
    std::vector<CatId> seg(segment_of.begin(), segment_of.end());
    return push(std::move(out), [p, seg](Tape& t, std::uint32_t self) {
      const Tensor<S>& g = t.nodes_[self].grad;
      Tensor<S>& gp = t.nodes_[p.idx].grad;
      for (std::size_t i = 0; i < seg.size(); ++i)
        gp.data[i] += g.data[static_cast<std::size_t>(seg[i])];
    });
  }

  /// sum_i p_i * log2(p_i), i.e. the negative base-2 entropy. Terms below
  /// the floor contribute zero value and zero gradient so normalization is
  /// never perturbed.
  ValueId neg_entropy_bits(ValueId p) {
    static constexpr double kFloor = 1e-12;
    const Tensor<S>& pv = value(p);
    if (pv.rank() != 1) throw ContractError("neg_entropy_bits: vector required");
    double acc = 0.0;
    for (const S v : pv.data) {
      const double d = static_cast<double>(v);
      if (d >= kFloor) acc += d * std::log2(d);
    }
    return push(Tensor<S>::scalar(static_cast<S>(acc)), [p](Tape& t, std::uint32_t self) {
      const S g = t.nodes_[self].grad.data[0];
      const Tensor<S>& pv2 = t.nodes_[p.idx].value;
      Tensor<S>& gp = t.nodes_[p.idx].grad;
      const S inv_ln2 = S(1) / std::log(S(2));
      for (std::size_t i = 0; i < pv2.size(); ++i) {
        if (static_cast<double>(pv2.data[i]) < kFloor) continue;
        gp.data[i] += g * (std::log(pv2.data[i]) + S(1)) * inv_ln2;
      }
    });
  }

  /// Runs all recorded backward rules in reverse order, seeding the scalar
  /// root with `seed`. Call at most once per tape.
  void backward(ValueId root, S seed = S(1)) {
    if (nodes_[root.idx].value.rank() != 0)
      throw ContractError("backward: root must be a scalar");
    nodes_[root.idx].grad.data[0] = seed;
    for (std::size_t i = root.idx + 1; i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back(*this, static_cast<std::uint32_t>(i));
    }
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    std::function<void(Tape&, std::uint32_t)> back;
  };

  void require_store() const {
    if (!store_) throw ContractError("tape: no parameter store bound");
  }

  ValueId push(Tensor<S> v, std::function<void(Tape&, std::uint32_t)> back) {
    if (check_finite_ && !v.all_finite())
      throw NumericError("tape: non-finite value produced at node " + std::to_string(nodes_.size()));
    Node n;
    n.grad = Tensor<S>::zeros(v.shape);
    n.value = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return ValueId{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  static void accumulate(Tensor<S>& dst, const Tensor<S>& src, S c) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += c * src.data[i];
  }

  template <typename F, typename B>
  ValueId binary_elementwise(ValueId a, ValueId b, F f, B back, const char* what) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (!av.same_shape(bv))
      throw ContractError(std::string(what) + ": shape mismatch " + av.shape_str() + " vs " +
                          bv.shape_str());
    Tensor<S> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(av.data[i], bv.data[i]);
    return push(std::move(out), [a, b, back](Tape& t, std::uint32_t self) { back(t, self, a, b); });
  }

  std::vector<Node> nodes_;
  ParameterStore<S>* store_;
  bool check_finite_;
};

/// Node ids of one GRU layer's weights on a given tape.
struct GruCellIds {
  ValueId wz, uz, bz;
  ValueId wr, ur, br;
  ValueId wn, un, bn;
};

/// Standard GRU cell, composed from kernel primitives:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   n = tanh(Wn x + r (.) (Un h) + bn), h' = (1-z) (.) n + z (.) h.
template <typename S>
ValueId gru_cell(Tape<S>& t, const GruCellIds& p, ValueId prev_hidden, ValueId input) {
  const ValueId z = t.sigmoid(t.add(t.add(t.matvec(p.wz, input), t.matvec(p.uz, prev_hidden)), p.bz));
  const ValueId r = t.sigmoid(t.add(t.add(t.matvec(p.wr, input), t.matvec(p.ur, prev_hidden)), p.br));
  const ValueId n =
      t.tanh_(t.add(t.add(t.matvec(p.wn, input), t.mul(r, t.matvec(p.un, prev_hidden))), p.bn));
  return t.add(n, t.mul(z, t.sub(prev_hidden, n)));
}

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t sample = 200;
  std::uint64_t seed = 0x5eedULL;
};

/// Central-difference check of the analytic gradient on randomly sampled
/// trainable coordinates. `loss_and_grad` must run forward + backward against
/// the store (accumulating grads) and return the scalar loss; it must be
/// deterministic. Returns the max relative error
/// |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
template <typename S>
double grad_check(ParameterStore<S>& ps,
                  const std::function<double(ParameterStore<S>&)>& loss_and_grad,
                  GradCheckOptions opt = {}) {
  ps.zero_grads();
  const double base = loss_and_grad(ps);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::vector<double> analytic;
  for (std::size_t e = 0; e < ps.size(); ++e) {
    if (!ps.entry(e).trainable) continue;
    for (std::size_t i = 0; i < ps.entry(e).value.size(); ++i) {
      coords.emplace_back(e, i);
      analytic.push_back(static_cast<double>(ps.entry(e).grad.data[i]));
    }
  }

  std::vector<std::size_t> order(coords.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(opt.seed);
  rng.shuffle(order);
  const std::size_t n = std::min(opt.sample, order.size());

  double max_rel = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto [e, i] = coords[order[k]];
    S& slot = ps.entry(e).value.data[i];
    const S saved = slot;
    // Fourth-order central stencil: truncation O(eps^4) so a larger eps can
    // be used, pushing the cancellation noise floor well below the analytic
    // gradients under test.
    const auto eval_at = [&](double offset) {
      slot = static_cast<S>(static_cast<double>(saved) + offset);
      ps.zero_grads();
      const double l = loss_and_grad(ps);
      if (!std::isfinite(l)) throw NumericError("grad_check: non-finite perturbed loss");
      return l;
    };
    const double lp2 = eval_at(2.0 * opt.eps);
    const double lp1 = eval_at(opt.eps);
    const double lm1 = eval_at(-opt.eps);
    const double lm2 = eval_at(-2.0 * opt.eps);
    slot = saved;
    // Differences first so an insensitive coordinate cancels exactly.
    const double fd = (8.0 * (lp1 - lm1) - (lp2 - lm2)) / (12.0 * opt.eps);
    const double ga = analytic[order[k]];
    const double rel = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
    max_rel = std::max(max_rel, rel);
  }
  ps.zero_grads();
  return max_rel;
}

}  // namespace dcasr

#endif  // DCASR_DIFFKERNEL_HPP
