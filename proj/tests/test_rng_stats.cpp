#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "foval/rng.hpp"
#include "foval/stats.hpp"

using namespace foval;

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(12345), b(12345), c(54321);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng mix derives distinct, order-sensitive substream seeds") {
    CHECK(Rng::mix({1, 2}) != Rng::mix({2, 1}));
    CHECK(Rng::mix({1, 2}) != Rng::mix({1, 3}));
    CHECK(Rng::mix({1, 2}) == Rng::mix({1, 2}));
}

TEST_CASE("uniform stays in [0,1) and fills the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("bounded covers [0,n) roughly uniformly") {
    Rng rng(11);
    const std::uint64_t n = 10;
    std::vector<int> counts(n, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[rng.bounded(n)];
    for (auto c : counts) {
        CHECK(c > draws / 10 - 800);
        CHECK(c < draws / 10 + 800);
    }
}

TEST_CASE("normal has sane first moments") {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle permutes deterministically") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
    auto v2 = v1;
    const auto original = v1;
    Rng r1(99), r2(99);
    r1.shuffle(v1);
    r2.shuffle(v2);
    CHECK(v1 == v2);
    auto sorted = v1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == original);
}

TEST_CASE("quantiles interpolate linearly between order statistics") {
    const std::vector<double> v{1, 2, 3, 4, 100};
    CHECK(stats::quantile(v, 0.25) == doctest::Approx(2.0));
    CHECK(stats::quantile(v, 0.75) == doctest::Approx(4.0));
    CHECK(stats::median(std::vector<double>{1, 2, 3, 4, 5}) == doctest::Approx(3.0));
    CHECK(stats::iqr(std::vector<double>{1, 2, 3, 4, 5}) == doctest::Approx(2.0));
    // Even length: midpoint of the two central values.
    CHECK(stats::median(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(2.5));
    // Single element.
    CHECK(stats::median(std::vector<double>{42.0}) == doctest::Approx(42.0));
}

TEST_CASE("skewness and kurtosis match closed forms") {
    // Symmetric data has zero skew.
    CHECK(stats::skewness(std::vector<double>{1, 2, 3}) == doctest::Approx(0.0).epsilon(1e-12));
    // Two-point distribution {-1, +1}: m2 = 1, m4 = 1 -> kurtosis 1.
    CHECK(stats::kurtosis(std::vector<double>{-1, 1}) == doctest::Approx(1.0));
    // Bernoulli(1/4) sample {0,0,0,1}: skew = (1-2p)/sqrt(pq), kurt = 3 + (1-6pq)/(pq).
    const std::vector<double> bern{0, 0, 0, 1};
    const double p = 0.25, q = 0.75;
    CHECK(stats::skewness(bern) == doctest::Approx((1 - 2 * p) / std::sqrt(p * q)));
    CHECK(stats::kurtosis(bern) == doctest::Approx(3.0 + (1 - 6 * p * q) / (p * q)));
    // Constant input is undefined.
    CHECK(std::isnan(stats::skewness(std::vector<double>{5, 5, 5})));
    CHECK(std::isnan(stats::kurtosis(std::vector<double>{5, 5, 5})));
}
