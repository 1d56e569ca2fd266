#pragma once

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gaugeatlas {

/// Pairwise (cascade) summation; result does not depend on how the input
/// was produced, only on its order.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);
/// Linear-interpolation quantile (type 7), q in [0, 1].
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);
/// Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct Distribution {
  std::size_t count = 0;
  double min = 0, max = 0, mean = 0, median = 0, std = 0, q05 = 0, q50 = 0, q95 = 0;
};

/// NaN-filled fields when `values` is empty.
Distribution describe(std::span<const double> values);
nlohmann::json distribution_json(const Distribution& d);

/// Runs fn(i) for i in [0, n), possibly on several threads. Each index must
/// write only to its own output slot so results are schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gaugeatlas
