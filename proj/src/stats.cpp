#include "suplab/stats.hpp"

#include "suplab/errors.hpp"
#include "suplab/neighborhood.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace suplab {

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Interval bootstrap_ci(std::span<const double> samples, std::size_t resamples, double level, Rng& rng) {
  if (samples.empty()) throw DataError("bootstrap_ci needs at least one sample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must lie in (0, 1)");
  if (resamples < 1) throw ConfigError("bootstrap needs at least one resample");
  const double m = mean(samples);
  const std::size_t n = samples.size();
  std::vector<double> means(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += samples[rng.below(n)];
    means[b] = acc / static_cast<double>(n);
  }
  Interval ci{quantile(means, 0.5 * (1.0 - level)), quantile(means, 0.5 * (1.0 + level))};
  ci.low = std::min(ci.low, m);
  ci.high = std::max(ci.high, m);
  return ci;
}

}  // namespace suplab
