#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "netchoice/model.hpp"
#include "netchoice/random.hpp"

namespace netchoice {

/// One action of an agent: select a choice directly, or adopt another agent's choice.
struct AgentAction {
    enum class Kind { select, adopt };
    Kind kind = Kind::select;
    std::size_t target = 0; ///< choice index for select, agent index for adopt

    static AgentAction select(std::size_t choice) { return {Kind::select, choice}; }
    static AgentAction adopt(std::size_t agent) { return {Kind::adopt, agent}; }
};

/**
 * Per-agent categorical tables over the |A| + |C| - 1 actions.
 *
 * Sampling is by inverse CDF with a binary search over the agent's cumulative weights.
 */
class ActionSampler {
  public:
    explicit ActionSampler(const NetworkModel& model);

    [[nodiscard]] AgentAction sample(std::size_t agent, Rng& rng) const;
    [[nodiscard]] std::size_t num_choices() const { return num_choices_; }
    [[nodiscard]] std::size_t num_agents() const { return offsets_.size() - 1; }

  private:
    std::size_t num_choices_;
    std::vector<std::size_t> offsets_;
    std::vector<double> cumulative_;
    std::vector<std::size_t> actions_; // < num_choices: select; otherwise adopt (value - num_choices)
};

inline constexpr std::size_t max_walk_steps = 10'000'000;

/// Absorbing random walk from `agent`: an unbiased single draw from row `agent` of the
/// choice matrix. Throws ComputationError after max_walk_steps steps.
[[nodiscard]] std::size_t sample_walk_choice(const ActionSampler& sampler, std::size_t agent, Rng& rng);
[[nodiscard]] std::size_t sample_walk_choice(const NetworkModel& model, std::size_t agent, Rng& rng);

struct MonteCarloEstimate {
    Matrix probabilities;   ///< empirical frequencies, |A| x |C|
    Matrix standard_errors; ///< sqrt(p (1 - p) / n)
    std::size_t samples_per_agent = 0;
};

/// `samples` independent walks per agent; agent i draws from substream (seed, i).
[[nodiscard]] MonteCarloEstimate estimate_choice_probs_mc(const NetworkModel& model, std::size_t samples,
                                                          std::uint64_t seed, unsigned threads = 1);

enum class Rejection { none, unresolved_cycle, u_rule };

struct JointOutcome {
    /// Final choice per agent; empty for agents whose adoption chain never reaches a choice.
    std::vector<std::optional<std::size_t>> choices;
    bool rejected = false;
    Rejection reason = Rejection::none;
};

/**
 * Follows adoption pointers to their resolution.
 *
 * A realization containing a pointer cycle cannot be resolved and is rejected. When
 * `u_choice` is given (the choice standing for non-activation), such a realization in
 * which no agent selected u directly is attributed to the u-rule instead.
 */
[[nodiscard]] JointOutcome resolve_actions(std::size_t num_choices, std::span<const AgentAction> actions,
                                           std::optional<std::size_t> u_choice = std::nullopt);

/// Every agent draws one action independently, then pointers are resolved.
[[nodiscard]] JointOutcome sample_joint_outcome(const ActionSampler& sampler, Rng& rng,
                                                std::optional<std::size_t> u_choice = std::nullopt);
[[nodiscard]] JointOutcome sample_joint_outcome(const NetworkModel& model, Rng& rng,
                                                std::optional<std::size_t> u_choice = std::nullopt);

/// Conditional probability that `attempter` activates `target` given that only the agents in
/// `remaining` (which includes `attempter`) are still able to: p_ta / sum_{k in remaining} p_tk.
[[nodiscard]] double activation_probability(const NetworkModel& model, std::size_t target, std::size_t attempter,
                                            std::span<const std::size_t> remaining);

struct JointSummary {
    std::size_t samples = 0;
    std::size_t accepted = 0;
    std::size_t rejected_cycle = 0;
    std::size_t rejected_u_rule = 0;
    Matrix marginals;   ///< choice frequencies over accepted outcomes
    Matrix discrepancy; ///< marginals minus the closed-form choice matrix
    double max_abs_discrepancy = 0.0;

    [[nodiscard]] double rejection_rate() const {
        return samples == 0 ? 0.0 : static_cast<double>(samples - accepted) / static_cast<double>(samples);
    }
};

inline constexpr std::size_t joint_block_size = 4096;

/// Joint-sampler statistics. Realizations are grouped in blocks of joint_block_size, block b
/// using substream (seed, b); blocks are reduced in index order.
[[nodiscard]] JointSummary summarize_joint(const NetworkModel& model, std::size_t samples, std::uint64_t seed,
                                           std::optional<std::size_t> u_choice = std::nullopt, unsigned threads = 1);

struct SecondMoment {
    Matrix moment; ///< empirical E[X X^T] with the two choices encoded as -1 and +1
    std::size_t accepted = 0;
    std::size_t samples = 0;
};

/// Requires exactly two choices: the first is encoded -1, the second +1.
[[nodiscard]] SecondMoment joint_second_moment(const NetworkModel& model, std::size_t samples, std::uint64_t seed,
                                               unsigned threads = 1);

} // namespace netchoice
