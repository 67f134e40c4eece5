#pragma once

#include <cstddef>
#include <random>

#include "netchoice/model.hpp"

namespace netchoice::families {

/// Three agents, choices {A, B}: agent 1 is influential, agents 2 and 3 lean on it.
/// Endowment is 1/3 per agent.
[[nodiscard]] NetworkModel influential_agent();

/// Every agent adopts each other agent with probability rho / (n - 1); direct mass split
/// evenly over `num_choices` choices.
[[nodiscard]] NetworkModel isotropic(std::size_t n, double rho, std::size_t num_choices = 2);

/// Agent 0 is the hub; every other agent adopts the hub with probability rho.
[[nodiscard]] NetworkModel hub_and_spoke(std::size_t n, double rho, std::size_t num_choices = 2);

/// Fully connected network (rho_f spread evenly) where everyone additionally leans on hub 0 with rho_h.
[[nodiscard]] NetworkModel hub_in_complete_network(std::size_t n, double rho_f, double rho_h,
                                                   std::size_t num_choices = 2);

struct RandomModelOptions {
    std::size_t agents = 5;
    std::size_t choices = 2;
    /// Probability that a given off-diagonal adoption entry is present.
    double density = 0.5;
    /// Fraction of agents that never decide directly (still reach a decisive agent).
    double indecisive_fraction = 0.2;
    /// Lower bound of direct-selection mass for decisive agents.
    double min_decisiveness = 0.05;
    /// Endowment drawn uniformly from [0, 2) when true, all ones otherwise.
    bool random_endowment = true;
};

/// Random collectively decisive model; resamples until the structural check passes.
[[nodiscard]] NetworkModel random_model(std::mt19937_64& rng, const RandomModelOptions& options);

} // namespace netchoice::families
