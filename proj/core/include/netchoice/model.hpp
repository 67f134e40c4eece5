#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace netchoice {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One non-zero of the adoption matrix: agent `from` adopts the choice of agent `to` with probability `p`.
struct AdoptionEntry {
    std::size_t from = 0;
    std::size_t to = 0;
    double p = 0.0;

    friend bool operator==(const AdoptionEntry&, const AdoptionEntry&) = default;
};

/**
 * Agents on a recommendation network choosing among a finite set of alternatives.
 *
 * Row i of the model describes the actions available to agent i: adopt the choice
 * of agent k with probability p_ik, or select choice j directly with probability q_ij.
 * Every row is a probability distribution over those |A| + |C| - 1 actions.
 *
 * Matrices are indexed by declaration order of `agents()` and `choices()`; that order
 * is the ordering contract for every downstream result. Instances are immutable.
 */
class NetworkModel {
  public:
    static constexpr double row_sum_tolerance = 1e-9;

    /// Throws ModelError when an invariant fails. Rows whose sum is within
    /// `row_sum_tolerance` of one are renormalized by scaling the direct-selection part.
    NetworkModel(std::vector<std::string> agents, std::vector<std::string> choices,
                 std::vector<AdoptionEntry> adoption, Matrix direct, Vector endowment);

    /// Builds the sparse adoption matrix from the non-zeros of a dense one.
    static NetworkModel from_dense(std::vector<std::string> agents, std::vector<std::string> choices,
                                   const Matrix& adoption, Matrix direct, Vector endowment);

    [[nodiscard]] std::size_t num_agents() const { return agents_.size(); }
    [[nodiscard]] std::size_t num_choices() const { return choices_.size(); }
    [[nodiscard]] const std::vector<std::string>& agents() const { return agents_; }
    [[nodiscard]] const std::vector<std::string>& choices() const { return choices_; }

    [[nodiscard]] const SparseMatrix& adoption() const { return adoption_; }
    [[nodiscard]] Matrix adoption_dense() const { return Matrix(adoption_); }
    [[nodiscard]] const Matrix& direct() const { return direct_; }
    [[nodiscard]] const Vector& endowment() const { return endowment_; }

    /// q-bar: probability that each agent decides without consulting the network.
    [[nodiscard]] Vector decisiveness() const { return direct_.rowwise().sum(); }

    /// Non-zero adoption entries ordered by (from, to).
    [[nodiscard]] std::vector<AdoptionEntry> adoption_entries() const;

    [[nodiscard]] std::size_t agent_index(std::string_view id) const;
    [[nodiscard]] std::size_t choice_index(std::string_view id) const;

    [[nodiscard]] NetworkModel with_endowment(Vector endowment) const;

  private:
    std::vector<std::string> agents_;
    std::vector<std::string> choices_;
    SparseMatrix adoption_;
    Matrix direct_;
    Vector endowment_;
};

struct ValidationReport {
    bool collectively_decisive = false;
    /// Agents without a path of positive adoption probabilities to a decisive agent.
    std::vector<std::size_t> unreachable_agents;
    /// Agents with positive direct-selection mass.
    std::vector<std::size_t> decisive_agents;
    double spectral_radius_estimate = 0.0;
    /// sum_k p_ik + sum_j q_ij - 1 per agent.
    Vector row_sum_residuals;
};

/// Checks collective decisiveness by reverse reachability from the decisive set.
[[nodiscard]] ValidationReport validate(const NetworkModel& model);

/// Perron root of the adoption matrix: the largest root over its strongly connected components,
/// each found by power iteration on I + P_c (aperiodic, so two-cycles still converge) and
/// bracketed by Collatz-Wielandt bounds. Acyclic adoption graphs give exactly zero.
[[nodiscard]] double spectral_radius(const NetworkModel& model, int max_iterations = 2000,
                                     double relative_tolerance = 1e-12);

/// Parses the JSON model document. Unknown top-level keys are rejected, except `pricing`,
/// which belongs to the parametric extension and is ignored here.
[[nodiscard]] NetworkModel parse_model(std::string_view document);
[[nodiscard]] NetworkModel load_model(const std::filesystem::path& path);

/// Canonical JSON document: declaration order for ids, adoption sorted by (from, to),
/// only non-zero direct entries, explicit endowment for every agent.
[[nodiscard]] std::string serialize_model(const NetworkModel& model);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

} // namespace netchoice
