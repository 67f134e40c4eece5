#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "netchoice/model.hpp"

namespace netchoice {

/// d q_{agent,choice} / d z_firm
struct DirectSensitivity {
    std::size_t agent = 0;
    std::size_t choice = 0;
    double slope = 0.0;
};

/// d p_{from,to} / d z_firm
struct AdoptionSensitivity {
    std::size_t from = 0;
    std::size_t to = 0;
    double slope = 0.0;
};

/// A firm selling one choice and setting a scalar discount z in [lower, upper].
struct Firm {
    std::size_t choice = 0;
    double margin = 1.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<DirectSensitivity> direct;
    std::vector<AdoptionSensitivity> adoption;
};

/**
 * A model whose entries are affine in the firms' discounts:
 * q(z) = q + sum_f z_f dq_f and P(z) = P + sum_f z_f dP_f.
 *
 * Construction enforces the shape conditions (a firm's own-choice slopes are non-negative,
 * all other slopes non-positive, every row of slopes sums to zero) and that every point of
 * the box prod_f [lower_f, upper_f] yields a valid, collectively decisive model. Affine
 * entries attain their extremes and their zero sets at box corners, so checking corners is exact.
 */
class ParametricModel {
  public:
    static constexpr std::size_t max_firms = 16;

    ParametricModel(NetworkModel base, std::vector<Firm> firms);

    [[nodiscard]] const NetworkModel& base() const { return base_; }
    [[nodiscard]] const std::vector<Firm>& firms() const { return firms_; }
    [[nodiscard]] std::size_t num_firms() const { return firms_.size(); }
    [[nodiscard]] const Matrix& direct_slope(std::size_t firm) const { return dq_.at(firm); }
    [[nodiscard]] const Matrix& adoption_slope(std::size_t firm) const { return dp_.at(firm); }

    [[nodiscard]] bool in_box(const Vector& z) const;
    [[nodiscard]] bool interior(const Vector& z, std::size_t firm) const;
    [[nodiscard]] Vector lower_bounds() const;
    [[nodiscard]] Vector upper_bounds() const;
    /// The origin projected onto the box.
    [[nodiscard]] Vector clamped_origin() const;

  private:
    NetworkModel base_;
    std::vector<Firm> firms_;
    std::vector<Matrix> dq_;
    std::vector<Matrix> dp_;
};

/// Model instantiated at discounts z. Throws DomainError outside the box.
[[nodiscard]] NetworkModel evaluate_model(const ParametricModel& pm, const Vector& z);

/// pi_j^w at discounts z.
[[nodiscard]] double parametric_share(const ParametricModel& pm, const Vector& z, std::size_t choice,
                                      const Vector& endowment);

struct ShareSensitivity {
    Vector first;  ///< d pi_j^{e_i} / d z_f for every agent i
    Vector second; ///< d^2 pi_j^{e_i} / d z_f^2
    double share_first = 0.0;
    double share_second = 0.0;
};

/// Analytic first and second derivatives of the share of `choice` (default: the firm's own
/// choice) in the discount of `firm`, from one factorization of I - P(z). Requires z interior
/// in the firm's coordinate.
[[nodiscard]] ShareSensitivity share_sensitivities(const ParametricModel& pm, const Vector& z, std::size_t firm,
                                                   const Vector& endowment);
[[nodiscard]] ShareSensitivity share_sensitivities(const ParametricModel& pm, const Vector& z, std::size_t firm,
                                                   const Vector& endowment, std::size_t choice);

/// d theta / d z_f = theta dP_f theta with theta = (I - P(z))^{-1}.
[[nodiscard]] Matrix theta_derivative(const ParametricModel& pm, const Vector& z, std::size_t firm);

/**
 * Affine variation of one agent r toward choice j:
 * P(u) = P - u e_r v^T, q_j(u) = q_j + u e_r, q_l(u) = q_l - u beta_l e_r (l != j),
 * with sum v + sum_{l != j} beta_l = 1.
 */
struct SingleAgentVariation {
    std::size_t agent = 0;
    std::size_t choice = 0;
    Vector v;    ///< one entry per agent
    Vector beta; ///< one entry per choice; the entry for `choice` must be zero
};

/// Throws DomainError when the variation does not have the required structure.
void check_variation(const NetworkModel& base, const SingleAgentVariation& variation);

/// Range of u for which every varied entry stays within [0, 1].
[[nodiscard]] std::pair<double, double> validity_interval(const NetworkModel& base,
                                                          const SingleAgentVariation& variation);

/// Closed-form share of the varied choice at u, from quantities at u = 0 only.
[[nodiscard]] double affine_single_agent_share(const NetworkModel& base, const SingleAgentVariation& variation,
                                               double u, const Vector& endowment);

/// The same variation as a one-firm parametric model.
[[nodiscard]] ParametricModel to_parametric(const NetworkModel& base, const SingleAgentVariation& variation,
                                            double margin, double lower, double upper);

/// Profit value that is either finite or the "undefined" sentinel, which compares below every finite value.
class Profit {
  public:
    static Profit undefined() { return Profit(); }
    explicit Profit(double value) : defined_(true), value_(value) {}

    [[nodiscard]] bool defined() const { return defined_; }
    /// Throws DomainError for the sentinel.
    [[nodiscard]] double value() const;

    friend bool operator<(const Profit& a, const Profit& b) {
        if (!b.defined_) return false;
        if (!a.defined_) return true;
        return a.value_ < b.value_;
    }

  private:
    Profit() = default;
    bool defined_ = false;
    double value_ = 0.0;
};

/// (m_f - z_f) pi_f^w(z); the sentinel outside the box or where shares are undefined.
[[nodiscard]] Profit profit(const ParametricModel& pm, std::size_t firm, const Vector& z, const Vector& endowment);

/// Profit-maximizing discount of `firm` given the other entries of z (the firm's own entry is
/// ignored). Golden-section search to interval width `tol`, then compared against both bounds.
[[nodiscard]] double best_response(const ParametricModel& pm, std::size_t firm, const Vector& z,
                                   const Vector& endowment, double tol = 1e-10);

struct EquilibriumResult {
    Vector z;
    bool converged = false;
    double residual = 0.0; ///< max_f |z_f - BR_f(z_{-f})| after the last round
    std::size_t rounds = 0;
    std::vector<Vector> trace; ///< z after every round
};

/// Damped Gauss-Seidel best-response iteration from the origin projected onto the box.
/// Never throws on non-convergence; the result carries the status and trace.
[[nodiscard]] EquilibriumResult find_equilibrium(const ParametricModel& pm, const Vector& endowment,
                                                 double damping = 0.5, double tol = 1e-8,
                                                 std::size_t max_rounds = 500);

/// Model document with a "pricing" block listing firms by choice id, with "margin",
/// "bounds": [L, U] and sparse "direct"/"adoption" sensitivity triplets.
[[nodiscard]] ParametricModel parse_parametric_model(std::string_view document);
[[nodiscard]] ParametricModel load_parametric_model(const std::filesystem::path& path);

} // namespace netchoice
