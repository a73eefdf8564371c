#include "foval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace foval::stats {

double mean(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        const double d = x - m;
        s += d * d;
    }
    return s / static_cast<double>(v.size());
}

double quantile_sorted(std::span<const double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

double quantile(std::span<const double> v, double p) {
    const auto s = sorted_copy(v);
    return quantile_sorted(s, p);
}

double median(std::span<const double> v) { return quantile(v, 0.5); }

double iqr(std::span<const double> v) {
    const auto s = sorted_copy(v);
    return quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
}

namespace {

// Central moments m2, m3, m4 in one pass over the centered data.
struct Moments {
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
};

Moments central_moments(std::span<const double> v) {
    Moments m;
    const double mu = mean(v);
    const auto n = static_cast<double>(v.size());
    for (double x : v) {
        const double d = x - mu;
        const double d2 = d * d;
        m.m2 += d2;
        m.m3 += d2 * d;
        m.m4 += d2 * d2;
    }
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

} // namespace

double skewness(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const Moments m = central_moments(v);
    if (m.m2 <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return m.m3 / std::pow(m.m2, 1.5);
}

double kurtosis(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const Moments m = central_moments(v);
    if (m.m2 <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return m.m4 / (m.m2 * m.m2);
}

} // namespace foval::stats
