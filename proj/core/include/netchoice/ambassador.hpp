#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "netchoice/model.hpp"

namespace netchoice {

/// Result of greedy brand-ambassador selection for one target choice.
struct AmbassadorPlan {
    std::size_t target_choice = 0;
    std::vector<std::size_t> selected;  ///< in order of selection
    std::vector<double> marginal_gains; ///< share increase at each step
    double baseline_share = 0.0;        ///< share with no ambassadors
    double final_share = 0.0;
    std::size_t budget = 0;
    bool lazy = false;
    std::size_t gain_evaluations = 0;
};

/// Turns every agent in `ambassadors` into an exclusive promoter of `choice`: its adoption
/// row is zeroed and its direct-selection row becomes the unit vector on `choice`.
[[nodiscard]] NetworkModel apply_ambassadors(const NetworkModel& model, std::span<const std::size_t> ambassadors,
                                             std::size_t choice);

/// Choice share of `choice` after applying `ambassadors`, by a fresh factorization.
[[nodiscard]] double ambassador_share(const NetworkModel& model, std::span<const std::size_t> ambassadors,
                                      std::size_t choice, const Vector& endowment);

/**
 * Inverse of I - P(B) for the current ambassador set B, maintained by rank-one updates.
 *
 * Adding agent a changes I - P(B) by e_a p_a^T, so both the marginal gain of a candidate
 * and the update after accepting it follow from the Sherman-Morrison identity without
 * refactorizing. Gain evaluation is O(nnz(p_a)); acceptance is O(|A|^2).
 */
class AmbassadorCache {
  public:
    AmbassadorCache(const NetworkModel& model, std::size_t choice, Vector endowment);

    [[nodiscard]] std::size_t choice() const { return choice_; }
    [[nodiscard]] const Vector& endowment() const { return endowment_; }
    [[nodiscard]] const std::vector<std::size_t>& members() const { return members_; }
    [[nodiscard]] bool contains(std::size_t agent) const { return in_set_.at(agent); }

    /// pi_j^w(B)
    [[nodiscard]] double share() const { return share_; }
    /// pi_{ij}(B) for every agent i.
    [[nodiscard]] const Vector& choice_probabilities() const { return pi_; }

    /// pi_j^w(B + {a}) - pi_j^w(B). Throws DomainError if `agent` is already a member.
    [[nodiscard]] double gain(std::size_t agent) const;

    /// Accepts `agent` into B and updates the cached inverse.
    void add(std::size_t agent);

  private:
    SparseMatrix adoption_;
    Vector direct_target_; // q_aj
    Vector decisiveness_;  // q-bar
    std::size_t choice_;
    Vector endowment_;
    std::vector<bool> in_set_;
    std::vector<std::size_t> members_;
    Matrix inverse_;    // M_B
    Vector pi_;         // M_B q^(j)(B)
    Vector centrality_; // w^T M_B
    double share_ = 0.0;
};

/// Sherman-Morrison marginal gain of adding `agent` to `ambassadors`, read from a cache that
/// must describe exactly that set (same target choice and endowment). Throws DomainError on a stale cache.
[[nodiscard]] double marginal_gain(const NetworkModel& model, std::span<const std::size_t> ambassadors,
                                   std::size_t agent, std::size_t choice, const Vector& endowment,
                                   const AmbassadorCache& cache);

/// Greedy selection of up to `budget` ambassadors; ties go to the earlier-declared agent.
/// With `lazy`, stale gains serve as upper bounds in a priority queue.
[[nodiscard]] AmbassadorPlan greedy_select(const NetworkModel& model, std::size_t choice, const Vector& endowment,
                                           std::size_t budget, bool lazy = false);

struct BruteForceResult {
    std::vector<std::size_t> best; ///< a maximizer over all subsets of size <= budget
    double best_value = 0.0;
    double best_value_exact_budget = 0.0;
    /// Every subset of size exactly `budget` within `tie_tolerance` of the optimum.
    std::vector<std::vector<std::size_t>> optimal_exact_budget;
    std::size_t subsets_evaluated = 0;
};

/// Exhaustive optimum of the ambassador problem. Throws DomainError beyond 10^6 subsets.
[[nodiscard]] BruteForceResult brute_force_select(const NetworkModel& model, std::size_t choice,
                                                  const Vector& endowment, std::size_t budget,
                                                  double tie_tolerance = 1e-9);

struct VertexCoverInstance {
    NetworkModel model;
    std::size_t target_choice = 0;
    std::size_t budget = 0;
};

/// Ambassador instance whose optimal K-sets are exactly the vertex covers of size K.
/// Choices are {alpha, beta}; the target is alpha and the endowment is all ones.
[[nodiscard]] VertexCoverInstance vertex_cover_instance(std::size_t vertices,
                                                        std::span<const std::pair<std::size_t, std::size_t>> edges,
                                                        std::size_t budget);

} // namespace netchoice
