#pragma once

#include "suplab/rng.hpp"

#include <cstddef>
#include <span>

namespace suplab {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

double mean(std::span<const double> values);

/// Percentile bootstrap interval for the mean: `resamples` resampled means, cut
/// at the (1 -/+ level) / 2 quantiles. The interval is widened, if necessary,
/// to contain the sample mean itself.
Interval bootstrap_ci(std::span<const double> samples, std::size_t resamples, double level, Rng& rng);

inline constexpr std::size_t kDefaultResamples = 1000;
inline constexpr double kDefaultLevel = 0.90;

}  // namespace suplab
