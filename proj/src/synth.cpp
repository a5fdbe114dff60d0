#include "dcasr/synth.hpp"

#include <cmath>
#include <string>

#include "dcasr/errors.hpp"
#include "dcasr/rng.hpp"

namespace dcasr {

namespace {

std::size_t sample_weighted(Rng& rng, const std::vector<double>& cumulative) {
  const double u = rng.uniform() * cumulative.back();
  std::size_t lo = 0, hi = cumulative.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cumulative[mid] > u) hi = mid;
    else lo = mid + 1;
  }
  return lo;
}

std::vector<double> zipf_cumulative(std::size_t n, double exponent) {
  std::vector<double> cum(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    cum[i] = total;
  }
  return cum;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_sessions < 1 || n_items < 1 || n_categories < 1)
    throw ValidationError("synth: counts must be positive");
  if (n_items < n_categories) throw ValidationError("synth: need at least one item per category");
  if (!(zipf_exponent >= 0.0)) throw ValidationError("synth: zipf exponent must be >= 0");
  if (!(stay_prob >= 0.0) || stay_prob > 1.0)
    throw ValidationError("synth: stay_prob must be in [0, 1]");
  if (min_len < 2 || max_len < min_len) throw ValidationError("synth: bad length range");
  if (span_days < 1) throw ValidationError("synth: span must be at least one day");
}

std::vector<RawSession> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  // Items are dealt round-robin into categories, so category c owns items
  // {i : i % n_categories == c} and every category is non-empty.
  std::vector<std::vector<std::size_t>> items_of(cfg.n_categories);
  for (std::size_t i = 0; i < cfg.n_items; ++i) items_of[i % cfg.n_categories].push_back(i);

  const std::vector<double> cat_cum = zipf_cumulative(cfg.n_categories, cfg.zipf_exponent);
  // Mild skew inside a category so item ranks are learnable.
  std::vector<std::vector<double>> item_cum;
  item_cum.reserve(cfg.n_categories);
  for (std::size_t c = 0; c < cfg.n_categories; ++c)
    item_cum.push_back(zipf_cumulative(items_of[c].size(), 0.8));

  const std::int64_t span_seconds = cfg.span_days * 86400;
  std::vector<RawSession> out;
  out.reserve(cfg.n_sessions);
  for (std::size_t s = 0; s < cfg.n_sessions; ++s) {
    RawSession session;
    session.session_id = "synth" + std::to_string(s);
    const std::size_t len =
        cfg.min_len + rng.bounded(static_cast<std::uint64_t>(cfg.max_len - cfg.min_len + 1));
    std::int64_t t = cfg.start_epoch +
                     static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(span_seconds)));

    std::size_t cat = sample_weighted(rng, cat_cum);
    for (std::size_t k = 0; k < len; ++k) {
      if (k > 0 && rng.uniform() >= cfg.stay_prob) cat = sample_weighted(rng, cat_cum);
      const std::size_t item = items_of[cat][sample_weighted(rng, item_cum[cat])];
      session.items.push_back("item" + std::to_string(item));
      session.categories.push_back("cat" + std::to_string(cat));
      session.timestamps.push_back(t);
      t += 30 + static_cast<std::int64_t>(rng.bounded(270));
    }
    out.push_back(std::move(session));
  }
  return out;
}

SplitDataset synthetic_split(const SynthConfig& cfg) {
  const auto sessions = generate_synthetic(cfg);
  const auto [filtered, catalog] = filter_core(sessions, 2, 5);
  return temporal_split(filtered, catalog, 7, 7);
}

}  // namespace dcasr
