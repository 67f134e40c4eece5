#include "netchoice/cascade.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

ActionSampler::ActionSampler(const NetworkModel& model) : num_choices_(model.num_choices()) {
    require_decisive(model);
    const auto& q = model.direct();
    const auto& p = model.adoption();
    offsets_.reserve(model.num_agents() + 1);
    offsets_.push_back(0);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < q.cols(); ++j) {
            if (q(i, j) <= 0.0) continue;
            total += q(i, j);
            cumulative_.push_back(total);
            actions_.push_back(static_cast<std::size_t>(j));
        }
        for (SparseMatrix::InnerIterator it(p, i); it; ++it) {
            if (it.value() <= 0.0) continue;
            total += it.value();
            cumulative_.push_back(total);
            actions_.push_back(num_choices_ + static_cast<std::size_t>(it.col()));
        }
        offsets_.push_back(cumulative_.size());
    }
}

AgentAction ActionSampler::sample(std::size_t agent, Rng& rng) const {
    const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[agent]);
    const auto end = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[agent + 1]);
    // rows sum to one only up to rounding, so draw against the stored total
    std::uniform_real_distribution<double> uniform(0.0, *(end - 1));
    auto hit = std::upper_bound(begin, end, uniform(rng));
    if (hit == end) --hit;
    const auto action = actions_[static_cast<std::size_t>(hit - cumulative_.begin())];
    return action < num_choices_ ? AgentAction::select(action) : AgentAction::adopt(action - num_choices_);
}

std::size_t sample_walk_choice(const ActionSampler& sampler, std::size_t agent, Rng& rng) {
    if (agent >= sampler.num_agents()) throw DomainError(fmt::format("agent index {} out of range", agent));
    for (std::size_t step = 0; step < max_walk_steps; ++step) {
        const auto action = sampler.sample(agent, rng);
        if (action.kind == AgentAction::Kind::select) return action.target;
        agent = action.target;
    }
    throw ComputationError(
        fmt::format("random walk did not absorb within {} steps; the model is close to violating the "
                    "decisiveness assumption",
                    max_walk_steps));
}

std::size_t sample_walk_choice(const NetworkModel& model, std::size_t agent, Rng& rng) {
    return sample_walk_choice(ActionSampler(model), agent, rng);
}

MonteCarloEstimate estimate_choice_probs_mc(const NetworkModel& model, std::size_t samples, std::uint64_t seed,
                                            unsigned threads) {
    if (samples < 1) throw DomainError("sample count must be at least 1");
    const ActionSampler sampler(model);
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const auto m = static_cast<Eigen::Index>(model.num_choices());
    std::vector<std::vector<std::size_t>> counts(model.num_agents(), std::vector<std::size_t>(model.num_choices(), 0));
    parallel_for(model.num_agents(), threads, [&](std::size_t i) {
        auto rng = substream(seed, i);
        for (std::size_t s = 0; s < samples; ++s) ++counts[i][sample_walk_choice(sampler, i, rng)];
    });
    MonteCarloEstimate est;
    est.samples_per_agent = samples;
    est.probabilities.resize(n, m);
    est.standard_errors.resize(n, m);
    const auto total = static_cast<double>(samples);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double p = static_cast<double>(counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) / total;
            est.probabilities(i, j) = p;
            est.standard_errors(i, j) = std::sqrt(p * (1.0 - p) / total);
        }
    }
    return est;
}

JointOutcome resolve_actions(std::size_t num_choices, std::span<const AgentAction> actions,
                             std::optional<std::size_t> u_choice) {
    const auto n = actions.size();
    if (u_choice && *u_choice >= num_choices) throw DomainError("u-choice index out of range");
    JointOutcome out;
    out.choices.assign(n, std::nullopt);
    enum class State : unsigned char { fresh, on_path, resolved, unresolved };
    std::vector<State> state(n, State::fresh);
    std::vector<std::size_t> path;
    bool cycle = false;
    bool someone_picked_u = false;

    for (std::size_t start = 0; start < n; ++start) {
        const auto& a = actions[start];
        if (a.kind == AgentAction::Kind::select) {
            if (a.target >= num_choices) throw DomainError("action selects an unknown choice");
            if (u_choice && a.target == *u_choice) someone_picked_u = true;
        } else if (a.target >= n || a.target == start) {
            throw DomainError("action adopts from an invalid agent");
        }
    }

    for (std::size_t start = 0; start < n; ++start) {
        if (state[start] != State::fresh) continue;
        path.clear();
        std::size_t cur = start;
        std::optional<std::size_t> result;
        bool dead = false;
        while (true) {
            if (state[cur] == State::resolved) {
                result = out.choices[cur];
                break;
            }
            if (state[cur] == State::unresolved) {
                dead = true;
                break;
            }
            if (state[cur] == State::on_path) {
                dead = true;
                cycle = true;
                break;
            }
            const auto& a = actions[cur];
            if (a.kind == AgentAction::Kind::select) {
                state[cur] = State::resolved;
                out.choices[cur] = a.target;
                result = a.target;
                break;
            }
            state[cur] = State::on_path;
            path.push_back(cur);
            cur = a.target;
        }
        // path compression: every agent on the chain shares the chain's resolution
        for (auto v : path) {
            state[v] = dead ? State::unresolved : State::resolved;
            if (!dead) out.choices[v] = result;
        }
    }

    if (cycle) {
        out.rejected = true;
        out.reason = (u_choice && !someone_picked_u) ? Rejection::u_rule : Rejection::unresolved_cycle;
    }
    return out;
}

JointOutcome sample_joint_outcome(const ActionSampler& sampler, Rng& rng, std::optional<std::size_t> u_choice) {
    std::vector<AgentAction> actions(sampler.num_agents());
    for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = sampler.sample(i, rng);
    return resolve_actions(sampler.num_choices(), actions, u_choice);
}

JointOutcome sample_joint_outcome(const NetworkModel& model, Rng& rng, std::optional<std::size_t> u_choice) {
    return sample_joint_outcome(ActionSampler(model), rng, u_choice);
}

double activation_probability(const NetworkModel& model, std::size_t target, std::size_t attempter,
                              std::span<const std::size_t> remaining) {
    const auto n = model.num_agents();
    if (target >= n || attempter >= n) throw DomainError("agent index out of range");
    if (std::find(remaining.begin(), remaining.end(), attempter) == remaining.end())
        throw DomainError("the attempting agent must be among the remaining agents");
    const auto& p = model.adoption();
    const auto t = static_cast<Eigen::Index>(target);
    double total = 0.0;
    for (auto k : remaining) {
        if (k >= n) throw DomainError("agent index out of range");
        total += p.coeff(t, static_cast<Eigen::Index>(k));
    }
    if (total <= 0.0) throw DomainError("no remaining agent can activate the target");
    return p.coeff(t, static_cast<Eigen::Index>(attempter)) / total;
}

namespace {

struct BlockTally {
    std::size_t accepted = 0;
    std::size_t rejected_cycle = 0;
    std::size_t rejected_u_rule = 0;
    Matrix counts;
};

template <class Visit>
std::vector<BlockTally> run_blocks(const ActionSampler& sampler, std::size_t samples, std::uint64_t seed,
                                   std::optional<std::size_t> u_choice, unsigned threads, Eigen::Index rows,
                                   Eigen::Index cols, Visit visit) {
    const std::size_t blocks = (samples + joint_block_size - 1) / joint_block_size;
    std::vector<BlockTally> tally(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        auto rng = substream(seed, b);
        auto& t = tally[b];
        t.counts = Matrix::Zero(rows, cols);
        const auto count = std::min(joint_block_size, samples - b * joint_block_size);
        for (std::size_t s = 0; s < count; ++s) {
            const auto outcome = sample_joint_outcome(sampler, rng, u_choice);
            if (outcome.rejected) {
                ++(outcome.reason == Rejection::u_rule ? t.rejected_u_rule : t.rejected_cycle);
                continue;
            }
            ++t.accepted;
            visit(outcome, t.counts);
        }
    });
    return tally;
}

} // namespace

JointSummary summarize_joint(const NetworkModel& model, std::size_t samples, std::uint64_t seed,
                             std::optional<std::size_t> u_choice, unsigned threads) {
    if (samples < 1) throw DomainError("sample count must be at least 1");
    if (u_choice && *u_choice >= model.num_choices()) throw DomainError("u-choice index out of range");
    const ActionSampler sampler(model);
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const auto m = static_cast<Eigen::Index>(model.num_choices());
    const auto tally = run_blocks(sampler, samples, seed, u_choice, threads, n, m,
                                  [](const JointOutcome& o, Matrix& counts) {
                                      for (std::size_t i = 0; i < o.choices.size(); ++i)
                                          counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*o.choices[i])) += 1.0;
                                  });
    JointSummary s;
    s.samples = samples;
    s.marginals = Matrix::Zero(n, m);
    for (const auto& t : tally) {
        s.accepted += t.accepted;
        s.rejected_cycle += t.rejected_cycle;
        s.rejected_u_rule += t.rejected_u_rule;
        s.marginals += t.counts;
    }
    const Matrix pi = solve_choice_matrix(model).pi;
    if (s.accepted > 0) {
        s.marginals /= static_cast<double>(s.accepted);
        s.discrepancy = s.marginals - pi;
        s.max_abs_discrepancy = s.discrepancy.cwiseAbs().maxCoeff();
    } else {
        s.discrepancy = Matrix::Constant(n, m, std::nan(""));
        s.max_abs_discrepancy = std::nan("");
    }
    return s;
}

SecondMoment joint_second_moment(const NetworkModel& model, std::size_t samples, std::uint64_t seed, unsigned threads) {
    if (model.num_choices() != 2)
        throw DomainError(fmt::format("second moment needs exactly two choices, model has {}", model.num_choices()));
    if (samples < 1) throw DomainError("sample count must be at least 1");
    const ActionSampler sampler(model);
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const auto tally = run_blocks(sampler, samples, seed, std::nullopt, threads, n, n,
                                  [n](const JointOutcome& o, Matrix& acc) {
                                      Vector x(n);
                                      for (Eigen::Index i = 0; i < n; ++i)
                                          x[i] = *o.choices[static_cast<std::size_t>(i)] == 0 ? -1.0 : 1.0;
                                      acc.noalias() += x * x.transpose();
                                  });
    SecondMoment r;
    r.samples = samples;
    r.moment = Matrix::Zero(n, n);
    for (const auto& t : tally) {
        r.accepted += t.accepted;
        r.moment += t.counts;
    }
    if (r.accepted > 0) r.moment /= static_cast<double>(r.accepted);
    return r;
}

} // namespace netchoice
