#include "netchoice/herding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "netchoice/error.hpp"
#include "netchoice/random.hpp"

namespace netchoice {

namespace {

constexpr double truncation_sigmas = 4.0;

double quantile_type7(const std::vector<double>& sorted, double level) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Two-term recurrence only; the table needed by the smooth-function pipeline.
std::vector<double> fill_two_term(std::size_t d_max, std::size_t m_max) {
    const auto stride = m_max + 1;
    std::vector<double> v((d_max + 1) * stride, 1.0);
    for (std::size_t d = 2; d <= d_max; ++d) {
        for (std::size_t m = 1; m <= m_max; ++m) {
            const auto dd = static_cast<double>(d);
            const auto mm = static_cast<double>(m);
            v[d * stride + m] = (dd - 1.0) / (mm + dd - 1.0) * v[(d - 1) * stride + m] +
                                mm / (dd * (mm + dd - 1.0)) * v[d * stride + m - 1];
        }
    }
    return v;
}

} // namespace

double expected_max_herd_fraction(std::size_t d) {
    if (d == 0) throw DomainError("the number of decisive agents must be at least 1");
    double harmonic = 0.0;
    for (std::size_t k = d; k >= 1; --k) harmonic += 1.0 / static_cast<double>(k); // small terms first
    return harmonic / static_cast<double>(d);
}

HerdMomentTable::HerdMomentTable(std::size_t d_max, std::size_t m_max) : d_max_(d_max), m_max_(m_max) {
    if (d_max < 1 || m_max < 1) throw DomainError("d_max and m_max must be at least 1");
    values_ = fill_two_term(d_max, m_max);
    order_sum_.assign(values_.size(), 1.0);
    bin_sum_.assign(values_.size(), 1.0);
    const auto stride = m_max + 1;

    for (std::size_t d = 2; d <= d_max; ++d) {
        const auto dd = static_cast<double>(d);
        for (std::size_t m = 1; m <= m_max; ++m) {
            const auto mm = static_cast<double>(m);
            // sum over k of (d-1)/d^k * m!/(m-k)! * (m+d-k-2)!/(m+d-1)! * M^(m-k)_{d-1}
            double coef = (dd - 1.0) / (mm + dd - 1.0);
            double a = coef * order_sum_[(d - 1) * stride + m];
            for (std::size_t k = 1; k <= m; ++k) {
                const auto kk = static_cast<double>(k);
                coef *= (mm - kk + 1.0) / (dd * (mm + dd - kk - 1.0));
                a += coef * order_sum_[(d - 1) * stride + m - k];
            }
            order_sum_[d * stride + m] = a;

            // m/(m+d-1) * sum over j of (d-1)!/j! * (m+j-2)!/(m+d-2)! * M^(m-1)_j, from j = d down
            double term = 1.0 / dd;
            double b = term * bin_sum_[d * stride + m - 1];
            for (std::size_t j = d; j >= 2; --j) {
                const auto jj = static_cast<double>(j);
                term *= jj / (mm + jj - 2.0);
                b += term * bin_sum_[(j - 1) * stride + m - 1];
            }
            bin_sum_[d * stride + m] = mm / (mm + dd - 1.0) * b;
        }
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        max_discrepancy_ = std::max({max_discrepancy_, std::abs(values_[i] - order_sum_[i]),
                                     std::abs(values_[i] - bin_sum_[i]), std::abs(order_sum_[i] - bin_sum_[i])});
    }
}

std::size_t HerdMomentTable::index(std::size_t d, std::size_t m) const {
    if (d < 1 || d > d_max_ || m > m_max_)
        throw DomainError(fmt::format("moment M^({})_{} outside the table", m, d));
    return d * (m_max_ + 1) + m;
}

HerdMomentTable herd_moments(std::size_t d_max, std::size_t m_max) { return {d_max, m_max}; }

UrnStatistics simulate_urn(std::size_t bins, std::size_t total, std::size_t trials, std::uint64_t seed,
                           unsigned threads) {
    if (bins < 1 || bins > total) throw DomainError("need 1 <= bins <= total");
    if (trials < 1) throw DomainError("need at least one trial");
    std::vector<double> fractions(trials);
    const std::size_t blocks = (trials + urn_block_size - 1) / urn_block_size;
    parallel_for(blocks, threads, [&](std::size_t b) {
        auto rng = substream(seed, b);
        std::vector<std::uint32_t> ball_bin(total);
        std::vector<std::size_t> count(bins);
        const auto end = std::min(trials, (b + 1) * urn_block_size);
        for (std::size_t t = b * urn_block_size; t < end; ++t) {
            std::fill(count.begin(), count.end(), 1);
            for (std::size_t i = 0; i < bins; ++i) ball_bin[i] = static_cast<std::uint32_t>(i);
            // a uniformly chosen existing ball picks its bin with probability proportional to the bin's count
            for (std::size_t n = bins; n < total; ++n) {
                const auto bin = ball_bin[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
                ball_bin[n] = bin;
                ++count[bin];
            }
            fractions[t] =
                static_cast<double>(*std::max_element(count.begin(), count.end())) / static_cast<double>(total);
        }
    });

    UrnStatistics s;
    s.bins = bins;
    s.total = total;
    s.trials = trials;
    const auto n = static_cast<double>(trials);
    s.mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / n;
    if (trials > 1) {
        double ss = 0.0;
        for (double f : fractions) ss += (f - s.mean) * (f - s.mean);
        s.standard_error = std::sqrt(ss / (n - 1.0) / n);
    }
    std::sort(fractions.begin(), fractions.end());
    for (std::size_t i = 0; i < urn_quantile_levels.size(); ++i)
        s.quantiles[i] = quantile_type7(fractions, urn_quantile_levels[i]);
    return s;
}

std::vector<double> decisive_count_distribution(std::size_t population, double gamma) {
    if (population < 1) throw DomainError("population must be at least 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    const auto n = static_cast<double>(population);
    const double mu = n * gamma;
    const double sigma = std::sqrt(n * gamma * (1.0 - gamma));
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0))); };
    const double lo = std::max(1.0, std::ceil(mu - truncation_sigmas * sigma));
    const double hi = std::min(n, std::floor(mu + truncation_sigmas * sigma));

    std::vector<double> prob(population, 0.0);
    double mass = 0.0;
    for (double k = lo; k <= hi; k += 1.0) {
        const double p = cdf(k + 0.5) - cdf(k - 0.5);
        prob[static_cast<std::size_t>(k) - 1] = p;
        mass += p;
    }
    if (!(mass > 0.0)) {
        // the window holds no integer or its mass underflows: all weight on the nearest count
        const double k = std::clamp(std::round(mu), 1.0, n);
        std::fill(prob.begin(), prob.end(), 0.0);
        prob[static_cast<std::size_t>(k) - 1] = 1.0;
        return prob;
    }
    for (double& p : prob) p /= mass;
    return prob;
}

double expected_smooth_function(std::size_t population, double gamma, std::span<const double> coefficients,
                                std::size_t m_max) {
    if (coefficients.empty()) throw DomainError("polynomial needs at least one coefficient");
    const std::size_t degree = coefficients.size() - 1;
    if (degree > m_max)
        throw DomainError(fmt::format("polynomial degree {} exceeds the available moments (m_max = {})", degree, m_max));
    const auto prob = decisive_count_distribution(population, gamma);
    std::size_t d_top = 1;
    for (std::size_t k = prob.size(); k >= 1; --k) {
        if (prob[k - 1] > 0.0) {
            d_top = k;
            break;
        }
    }
    const auto stride = degree + 1;
    const auto table = fill_two_term(d_top, degree);
    double expectation = 0.0;
    for (std::size_t d = 1; d <= d_top; ++d) {
        if (prob[d - 1] == 0.0) continue;
        double f = 0.0;
        for (std::size_t m = 0; m <= degree; ++m) f += coefficients[m] * table[d * stride + m];
        expectation += prob[d - 1] * f;
    }
    return expectation;
}

} // namespace netchoice
