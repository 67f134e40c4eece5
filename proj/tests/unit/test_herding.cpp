#include <doctest.h>

#include <cmath>
#include <numeric>

#include "netchoice/error.hpp"
#include "netchoice/herding.hpp"

using namespace netchoice;

namespace {

// E[(largest of d uniform spacings)^m] from the inclusion-exclusion law of the maximum spacing.
long double max_spacing_moment(unsigned d, unsigned m) {
    auto log_beta = [](long double a, long double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
    long double total = 0.0L;
    long double binom = 1.0L;
    for (unsigned k = 1; k <= d; ++k) {
        binom = binom * static_cast<long double>(d - k + 1) / static_cast<long double>(k);
        const long double term =
            binom * m * std::exp(log_beta(m, d) - static_cast<long double>(m) * std::log(static_cast<long double>(k)));
        total += (k % 2 == 1) ? term : -term;
    }
    return total;
}

} // namespace

TEST_CASE("expected largest-herd fraction") {
    CHECK(expected_max_herd_fraction(1) == 1.0);
    CHECK(expected_max_herd_fraction(2) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(expected_max_herd_fraction(4) == doctest::Approx(25.0 / 48.0).epsilon(1e-15));
    CHECK_THROWS_AS((void)expected_max_herd_fraction(0), DomainError);
}

TEST_CASE("moment table") {
    const auto table = herd_moments(12, 5);
    CHECK(table.d_max() == 12);
    CHECK(table.m_max() == 5);
    CHECK(table.max_discrepancy() < 1e-13);
    for (std::size_t d = 1; d <= 12; ++d) {
        CHECK(table(d, 0) == 1.0);
        CHECK(table(d, 1) == doctest::Approx(expected_max_herd_fraction(d)).epsilon(1e-13));
        for (std::size_t m = 1; m <= 5; ++m) {
            CHECK(table(d, m) <= table(d, m - 1));
            CHECK(table(d, m) >= std::pow(1.0 / static_cast<double>(d), static_cast<double>(m)) - 1e-15);
            CHECK(table.by_order_sum(d, m) == doctest::Approx(table(d, m)).epsilon(1e-12));
            CHECK(table.by_bin_sum(d, m) == doctest::Approx(table(d, m)).epsilon(1e-12));
        }
    }
    for (std::size_t m = 0; m <= 5; ++m) CHECK(table(1, m) == 1.0);
    CHECK(table(2, 2) == doctest::Approx(7.0 / 12.0).epsilon(1e-14));
    CHECK(table.by_order_sum(2, 2) == doctest::Approx(7.0 / 12.0).epsilon(1e-14));
    CHECK(table.by_bin_sum(2, 2) == doctest::Approx(7.0 / 12.0).epsilon(1e-14));
    CHECK_THROWS_AS((void)table(13, 1), DomainError);
    CHECK_THROWS_AS((void)table(0, 1), DomainError);
    CHECK_THROWS_AS((void)table(2, 6), DomainError);
    CHECK_THROWS_AS((void)herd_moments(0, 3), DomainError);
}

TEST_CASE("moments agree with the law of the largest uniform spacing") {
    const auto table = herd_moments(10, 4);
    for (unsigned d = 1; d <= 10; ++d)
        for (unsigned m = 1; m <= 4; ++m)
            CHECK(table(d, m) == doctest::Approx(static_cast<double>(max_spacing_moment(d, m))).epsilon(1e-10));
}

TEST_CASE("urn edge cases") {
    const auto full = simulate_urn(5, 5, 10, 1);
    CHECK(full.mean == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(full.standard_error < 1e-15);
    const auto single = simulate_urn(1, 100, 10, 1);
    CHECK(single.mean == 1.0);
    CHECK_THROWS_AS((void)simulate_urn(3, 2, 10, 1), DomainError);
    CHECK_THROWS_AS((void)simulate_urn(0, 2, 10, 1), DomainError);
    CHECK_THROWS_AS((void)simulate_urn(2, 2, 0, 1), DomainError);
}

TEST_CASE("urn simulation approaches the limit and is thread-independent") {
    const auto a = simulate_urn(2, 1000, 10'000, 42, 1);
    const auto b = simulate_urn(2, 1000, 10'000, 42, 4);
    CHECK(a.mean == b.mean);
    CHECK(a.quantiles == b.quantiles);
    CHECK(std::abs(a.mean - 0.75) <= 3.0 * a.standard_error);
    CHECK(a.quantiles[0] <= a.quantiles[1]);
    CHECK(a.quantiles[1] <= a.quantiles[2]);
    CHECK(a.quantiles[2] <= a.quantiles[3]);
    CHECK(a.quantiles[0] >= 0.5);
    const auto c = simulate_urn(4, 1000, 4'000, 42, 2);
    CHECK(std::abs(c.mean - 25.0 / 48.0) <= 4.0 * c.standard_error);
}

TEST_CASE("decisive count distribution") {
    const auto dist = decisive_count_distribution(200, 0.3);
    REQUIRE(dist.size() == 200);
    CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    double mean = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        CHECK(dist[k] >= 0.0);
        mean += static_cast<double>(k + 1) * dist[k];
    }
    CHECK(mean == doctest::Approx(60.0).epsilon(1e-3));
    CHECK(dist[0] == 0.0);

    const auto tight = decisive_count_distribution(2, 0.999999);
    CHECK(tight[1] > 0.999);
    CHECK_THROWS_AS((void)decisive_count_distribution(0, 0.5), DomainError);
    CHECK_THROWS_AS((void)decisive_count_distribution(10, 1.5), DomainError);
}

TEST_CASE("expected smooth functions of the largest herd") {
    const std::vector<double> one{1.0};
    CHECK(expected_smooth_function(100, 0.2, one, 3) == doctest::Approx(1.0).epsilon(1e-14));
    const std::vector<double> linear{0.0, 1.0};
    CHECK(expected_smooth_function(2, 0.999999, linear, 3) == doctest::Approx(0.75).epsilon(1e-4));
    const std::vector<double> square{0.0, 0.0, 1.0};
    CHECK(expected_smooth_function(2, 0.999999, square, 3) == doctest::Approx(7.0 / 12.0).epsilon(1e-4));
    const std::vector<double> quartic{0, 0, 0, 0, 1.0};
    CHECK_THROWS_AS((void)expected_smooth_function(10, 0.5, quartic, 3), DomainError);
    CHECK_THROWS_AS((void)expected_smooth_function(10, 0.5, std::vector<double>{}, 3), DomainError);
}
