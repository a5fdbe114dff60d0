#pragma once

#include <cstdint>
#include <vector>

#include "dcasr/preprocess.hpp"

namespace dcasr {

/// Synthetic clickstream with Zipf-skewed category popularity and a
/// within-category transition bias, sized so trend-level experiments run in
/// seconds without external downloads.
struct SynthConfig {
  std::size_t n_sessions = 1000;
  std::size_t n_items = 200;
  std::size_t n_categories = 10;
  double zipf_exponent = 1.2;
  /// Probability that the next click stays in the current category.
  double stay_prob = 0.75;
  std::size_t min_len = 2;
  std::size_t max_len = 12;
  std::int64_t span_days = 35;
  std::int64_t start_epoch = 1700000000;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<RawSession> generate_synthetic(const SynthConfig& cfg = {});

/// generate + filter_core + temporal_split with the module defaults.
SplitDataset synthetic_split(const SynthConfig& cfg = {});

}  // namespace dcasr
