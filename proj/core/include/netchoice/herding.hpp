#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace netchoice {

/// (1/d) * H_d, the limiting expected fraction of agents in the largest herd with d decisive agents.
[[nodiscard]] double expected_max_herd_fraction(std::size_t d);

/**
 * Limiting moments M^(m)_d of the largest-herd fraction for 1 <= d <= d_max, 0 <= m <= m_max.
 *
 * values() comes from the two-term recurrence. The two summation-form recurrences are filled
 * into independent tables so that disagreement reveals an error in any one of them.
 */
class HerdMomentTable {
  public:
    HerdMomentTable(std::size_t d_max, std::size_t m_max);

    [[nodiscard]] std::size_t d_max() const { return d_max_; }
    [[nodiscard]] std::size_t m_max() const { return m_max_; }
    [[nodiscard]] double operator()(std::size_t d, std::size_t m) const { return values_[index(d, m)]; }
    [[nodiscard]] double by_order_sum(std::size_t d, std::size_t m) const { return order_sum_[index(d, m)]; }
    [[nodiscard]] double by_bin_sum(std::size_t d, std::size_t m) const { return bin_sum_[index(d, m)]; }
    /// Largest pairwise difference among the three recurrences over the table.
    [[nodiscard]] double max_discrepancy() const { return max_discrepancy_; }

  private:
    [[nodiscard]] std::size_t index(std::size_t d, std::size_t m) const;

    std::size_t d_max_;
    std::size_t m_max_;
    std::vector<double> values_;
    std::vector<double> order_sum_;
    std::vector<double> bin_sum_;
    double max_discrepancy_ = 0.0;
};

[[nodiscard]] HerdMomentTable herd_moments(std::size_t d_max, std::size_t m_max);

inline constexpr std::array<double, 4> urn_quantile_levels{0.05, 0.2, 0.8, 0.95};

struct UrnStatistics {
    std::size_t bins = 0;
    std::size_t total = 0;
    std::size_t trials = 0;
    double mean = 0.0;           ///< mean of max-bin / total
    double standard_error = 0.0; ///< sample standard deviation / sqrt(trials)
    std::array<double, 4> quantiles{};
};

inline constexpr std::size_t urn_block_size = 256;

/// Polya urn with `bins` bins of one ball each, grown to `total` balls by proportional
/// attachment. Trials run in blocks of urn_block_size, block b using substream (seed, b).
[[nodiscard]] UrnStatistics simulate_urn(std::size_t bins, std::size_t total, std::size_t trials, std::uint64_t seed,
                                         unsigned threads = 1);

/// Probabilities of the decisive count d in [1, population], from a continuity-corrected normal
/// approximation to Binomial(population, gamma) truncated to +-4 standard deviations and renormalized.
/// Entry k - 1 holds P(d = k).
[[nodiscard]] std::vector<double> decisive_count_distribution(std::size_t population, double gamma);

/// E[f(largest-herd fraction)] for the polynomial f(x) = sum_m coefficients[m] x^m, whose degree
/// may not exceed m_max.
[[nodiscard]] double expected_smooth_function(std::size_t population, double gamma,
                                              std::span<const double> coefficients, std::size_t m_max);

} // namespace netchoice
