#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/LU>

#include "netchoice/error.hpp"
#include "netchoice/model.hpp"

namespace netchoice {

enum class Solver { dense, iterative };

/// Steady-state choice probabilities and the aggregate quantities derived from them.
struct ChoiceSolution {
    Matrix pi;              ///< |A| x |C|, row i is agent i's distribution over choices
    Vector centrality;      ///< c^w = w^T (I - P)^{-1}
    Vector decisiveness;    ///< q-bar
    Vector decision_shares; ///< c^w (elementwise) q-bar
    Vector choice_shares;   ///< w^T pi
    /// Some agent adopts with probability above 0.999; results are sensitive to input noise.
    bool ill_conditioned = false;
    /// Jacobi sweeps used by the iterative solver (largest over all right-hand sides); 0 for dense.
    int iterations = 0;
};

/**
 * One LU factorization of I - P, reused for every right-hand side.
 *
 * Construction throws AssumptionError when the model is not collectively decisive.
 */
class ChoiceSystem {
  public:
    explicit ChoiceSystem(const NetworkModel& model);

    /// (I - P)^{-1} rhs
    [[nodiscard]] Matrix solve(const Matrix& rhs) const { return lu_.solve(rhs); }
    /// (I - P)^{-T} rhs
    [[nodiscard]] Vector solve_transpose(const Vector& rhs) const { return lu_.transpose().solve(rhs); }

  private:
    Eigen::PartialPivLU<Matrix> lu_;
};

/// Solves (I - P) pi = Q column-wise and derives the aggregates for the model's endowment.
[[nodiscard]] ChoiceSolution solve_choice_matrix(const NetworkModel& model, Solver solver = Solver::dense);

/// pi_j^w = w^T (I - P)^{-1} q^(j) for every choice j.
[[nodiscard]] Vector choice_shares(const NetworkModel& model, const Vector& endowment);

/// delta_i^w = [w^T (I - P)^{-1}]_i * q-bar_i.
[[nodiscard]] Vector decision_shares(const NetworkModel& model, const Vector& endowment);

[[nodiscard]] Vector centrality(const NetworkModel& model, const Vector& endowment);

/// Limit of the hub's decision share over total endowment in a growing fully connected
/// network with a hub: (1/rho_H - rho_F/(1 - rho_F))^{-1}.
[[nodiscard]] double hub_asymptotic_ratio(double rho_f, double rho_h);

/// Throws AssumptionError when some agent has no adoption path to a decisive agent.
void require_decisive(const NetworkModel& model);

/// Throws DomainError unless `endowment` is non-negative with one entry per agent.
void check_endowment(const NetworkModel& model, const Vector& endowment);

/**
 * Choice share of an arbitrary subset S of a (possibly infinite) choice space:
 * sum_i delta_i^w mu_i(S), with one measure evaluator per agent.
 */
template <class Query>
[[nodiscard]] double mixture_choice_share(const NetworkModel& model, const Vector& endowment,
                                          std::span<const std::function<double(const Query&)>> measures,
                                          const Query& subset) {
    if (measures.size() != model.num_agents()) throw DomainError("need one measure per agent");
    const Vector delta = decision_shares(model, endowment);
    double total = 0.0;
    for (std::size_t i = 0; i < measures.size(); ++i) {
        const double mass = measures[i](subset);
        if (!(mass >= 0.0 && mass <= 1.0)) throw DomainError("measure evaluator returned a value outside [0, 1]");
        total += delta[static_cast<Eigen::Index>(i)] * mass;
    }
    return total;
}

struct LearningResult {
    Vector limit;
    /// Agents that always adopt (alpha_i = 1); their initial belief is undefined and set to zero.
    std::vector<std::size_t> zero_filled_agents;
    int iterations = 0;
};

/**
 * Fixed point of the linear learning process x <- D V x + (I - D) x0 for one choice.
 *
 * V is P with rows normalized to one, D = diag(alpha) with alpha_i the adoption mass of
 * agent i, and x0_i = q_ij / (1 - alpha_i). The limit coincides with column j of the
 * choice matrix. Stops once the sup-norm step drops below tol * (1 - rho(P)).
 */
[[nodiscard]] LearningResult linear_learning_limit(const NetworkModel& model, std::size_t choice, double tol = 1e-12,
                                                   int max_iterations = 1'000'000);

} // namespace netchoice
