#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "netchoice/model.hpp"
#include "netchoice/simplex.hpp"

namespace netchoice {

/// sum_{k in s1} p_ik >= k * sum_{k in s2} p_ik
struct GroupImportance {
    std::size_t agent = 0;
    std::vector<std::size_t> s1;
    std::vector<std::size_t> s2;
    double k = 1.0;
};

/// (k - delta) q_{i,other} <= q_{i,preferred} <= (k + delta) q_{i,other}; an equality when delta = 0.
struct PreferenceRatio {
    std::size_t agent = 0;
    std::size_t preferred = 0;
    std::size_t other = 0;
    double k = 1.0;
    double delta = 0.0;
};

/// sum_k p_ik >= k * sum_j q_ij (at_least) or <= (at_most).
struct RelianceBound {
    enum class Relation { at_least, at_most };
    std::size_t agent = 0;
    double k = 1.0;
    Relation relation = Relation::at_least;
};

/// p_{agent,other} = 0
struct Sparsity {
    std::size_t agent = 0;
    std::size_t other = 0;
};

using KnowledgeItem = std::variant<GroupImportance, PreferenceRatio, RelianceBound, Sparsity>;

enum class RowTag { fit, nonneg, rowsum, group_importance, preference_ratio, decisiveness, sparsity };

[[nodiscard]] const char* to_string(RowTag tag);

/**
 * Linear description of the parameters consistent with observed choice probabilities.
 *
 * Variables are p_i_k (i != k), q_i_j, epsp_i_j and epsm_i_j, all in [0, 1], declared in that
 * order and row-major within each family. Non-negativity is carried by the bounds.
 */
struct EstimationPolyhedron {
    std::size_t agents = 0;
    std::size_t choices = 0;
    Matrix observed;
    LinearProgram program; ///< rows only; the objective is empty
    std::vector<RowTag> tags;

    [[nodiscard]] std::size_t p_var(std::size_t i, std::size_t k) const;
    [[nodiscard]] std::size_t q_var(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::size_t eps_plus_var(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::size_t eps_minus_var(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::size_t num_parameter_vars() const { return agents * (agents - 1) + agents * choices; }
};

/// Throws DomainError when a row of `observed` is not a distribution or a knowledge item is malformed.
[[nodiscard]] EstimationPolyhedron build_polyhedron(const Matrix& observed, const std::vector<KnowledgeItem>& knowledge);

inline constexpr double pi_floor = 1e-9;

struct SlackSolution {
    double objective = 0.0; ///< largest (eps+ + eps-) / max(pi, pi_floor)
    Matrix eps_plus;
    Matrix eps_minus;
    Vector point; ///< full variable vector at the optimum
};

/// Smallest slacks making the polyhedron non-empty. Throws ComputationError when the knowledge
/// rows are inconsistent by themselves or the solver fails.
[[nodiscard]] SlackSolution phase1_min_slack(const EstimationPolyhedron& poly);

struct InteriorEstimate {
    Matrix p;
    Matrix q;
    double margin = 0.0; ///< min distance to the remaining inequality planes
    std::size_t rounds = 0;
    std::vector<std::string> converted; ///< inequality rows found to hold with equality on the whole set
    Vector point;
};

/**
 * Max-min-margin point of the polyhedron with slacks fixed.
 *
 * Margin rows are the knowledge inequalities and the non-negativity of every free p and q. When
 * the best margin is zero, every row with a non-zero shadow price in that solve holds with
 * equality on the whole set; those rows become equalities and the program is solved again.
 * A set that the equalities reduce to a single point has margin zero.
 */
[[nodiscard]] InteriorEstimate interior_point_estimate(const EstimationPolyhedron& poly, const SlackSolution& slack);

enum class ExportPhase { feasibility, phase1, interior };

/// The program solved by one stage, for use with an external solver. The interior stage needs the
/// phase-1 slacks and is exported before any equality conversion.
[[nodiscard]] LinearProgram estimation_program(const EstimationPolyhedron& poly, ExportPhase phase,
                                               const SlackSolution* slack = nullptr);

/// Network model carrying an estimate; rows are renormalized within the model's tolerance.
[[nodiscard]] NetworkModel estimate_to_model(const InteriorEstimate& estimate, std::vector<std::string> agents,
                                             std::vector<std::string> choices);

/// Knowledge document: a JSON array of objects with "type" in {group_importance,
/// preference_ratio, decisiveness, sparsity} and identifiers resolved against the given ids.
[[nodiscard]] std::vector<KnowledgeItem> parse_knowledge(std::string_view document,
                                                         const std::vector<std::string>& agents,
                                                         const std::vector<std::string>& choices);

struct ObservedChoices {
    std::vector<std::string> agents;
    std::vector<std::string> choices;
    Matrix pi;
};

/// {"agents": [...], "choices": [...], "pi": [[...], ...]}
[[nodiscard]] ObservedChoices parse_observed(std::string_view document);

} // namespace netchoice
