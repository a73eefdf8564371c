#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace foval::stats {

double mean(std::span<const double> v);

// Population (biased) variance.
double variance(std::span<const double> v);

// Quantile with linear interpolation between order statistics (the "type 7"
// rule: h = (n-1)p). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

// Convenience wrappers that copy and sort.
double quantile(std::span<const double> v, double p);
double median(std::span<const double> v);
double iqr(std::span<const double> v);

// Moment-based skewness g1 = m3 / m2^(3/2) and non-excess (Pearson) kurtosis
// m4 / m2^2, both from population central moments. A constant or empty input
// yields NaN; callers decide the degenerate policy.
double skewness(std::span<const double> v);
double kurtosis(std::span<const double> v);

std::vector<double> sorted_copy(std::span<const double> v);

} // namespace foval::stats
