#include "netchoice/ambassador.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

namespace {

constexpr double max_enumerated_subsets = 1e6;

std::vector<bool> membership(std::size_t n, std::span<const std::size_t> set) {
    std::vector<bool> in(n, false);
    for (auto a : set) {
        if (a >= n) throw DomainError(fmt::format("agent index {} out of range", a));
        in[a] = true;
    }
    return in;
}

void check_choice(const NetworkModel& model, std::size_t choice) {
    if (choice >= model.num_choices()) throw DomainError(fmt::format("choice index {} out of range", choice));
}

// Share of `choice` with ambassadors `in`, straight from a dense factorization.
double dense_share(const Matrix& p, const Matrix& q, const std::vector<bool>& in, std::size_t choice, const Vector& w) {
    const auto n = p.rows();
    Matrix a = -p;
    Vector target = q.col(static_cast<Eigen::Index>(choice));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (in[static_cast<std::size_t>(i)]) {
            a.row(i).setZero();
            target[i] = 1.0;
        }
    }
    a.diagonal().array() += 1.0;
    const Vector c = a.transpose().partialPivLu().solve(w);
    return c.dot(target);
}

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

} // namespace

NetworkModel apply_ambassadors(const NetworkModel& model, std::span<const std::size_t> ambassadors, std::size_t choice) {
    check_choice(model, choice);
    const auto in = membership(model.num_agents(), ambassadors);
    std::vector<AdoptionEntry> entries;
    for (const auto& e : model.adoption_entries())
        if (!in[e.from]) entries.push_back(e);
    Matrix q = model.direct();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!in[i]) continue;
        q.row(static_cast<Eigen::Index>(i)).setZero();
        q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(choice)) = 1.0;
    }
    return {model.agents(), model.choices(), std::move(entries), std::move(q), model.endowment()};
}

double ambassador_share(const NetworkModel& model, std::span<const std::size_t> ambassadors, std::size_t choice,
                        const Vector& endowment) {
    const auto modified = apply_ambassadors(model, ambassadors, choice);
    return choice_shares(modified, endowment)[static_cast<Eigen::Index>(choice)];
}

// --- cache -------------------------------------------------------------------------------

AmbassadorCache::AmbassadorCache(const NetworkModel& model, std::size_t choice, Vector endowment)
    : adoption_(model.adoption()), choice_(choice), endowment_(std::move(endowment)),
      in_set_(model.num_agents(), false) {
    check_choice(model, choice);
    check_endowment(model, endowment_);
    direct_target_ = model.direct().col(static_cast<Eigen::Index>(choice));
    decisiveness_ = model.decisiveness();
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const ChoiceSystem system(model);
    inverse_ = system.solve(Matrix::Identity(n, n));
    pi_ = inverse_ * direct_target_;
    centrality_ = inverse_.transpose() * endowment_;
    share_ = endowment_.dot(pi_);
}

double AmbassadorCache::gain(std::size_t agent) const {
    if (agent >= in_set_.size()) throw DomainError("agent index out of range");
    if (in_set_[agent]) throw DomainError("agent is already an ambassador");
    const auto a = static_cast<Eigen::Index>(agent);
    double loop = 0.0;     // p_a^T M_B e_a
    double diverted = 0.0; // sum_k p_ak (1 - pi_kj(B))
    for (SparseMatrix::InnerIterator it(adoption_, a); it; ++it) {
        loop += it.value() * inverse_(it.col(), a);
        diverted += it.value() * (1.0 - pi_[it.col()]);
    }
    const double other_choices = decisiveness_[a] - direct_target_[a];
    return centrality_[a] * (other_choices + diverted) / (1.0 + loop);
}

void AmbassadorCache::add(std::size_t agent) {
    if (agent >= in_set_.size()) throw DomainError("agent index out of range");
    if (in_set_[agent]) throw DomainError("agent is already an ambassador");
    const auto a = static_cast<Eigen::Index>(agent);
    const auto n = inverse_.rows();
    // I - P(B + a) = I - P(B) + e_a p_a^T
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n); // p_a^T M_B
    for (SparseMatrix::InnerIterator it(adoption_, a); it; ++it) row += it.value() * inverse_.row(it.col());
    const Vector column = inverse_.col(a);
    inverse_.noalias() -= column * row / (1.0 + row[a]);

    in_set_[agent] = true;
    members_.push_back(agent);
    Vector target = direct_target_;
    for (auto m : members_) target[static_cast<Eigen::Index>(m)] = 1.0;
    pi_ = inverse_ * target;
    centrality_ = inverse_.transpose() * endowment_;
    share_ = endowment_.dot(pi_);
}

double marginal_gain(const NetworkModel& model, std::span<const std::size_t> ambassadors, std::size_t agent,
                     std::size_t choice, const Vector& endowment, const AmbassadorCache& cache) {
    const auto in = membership(model.num_agents(), ambassadors);
    if (agent >= model.num_agents()) throw DomainError("agent index out of range");
    if (in[agent]) throw DomainError("agent is already an ambassador");
    const bool fresh = cache.choice() == choice && cache.endowment().size() == endowment.size() &&
                       cache.endowment() == endowment &&
                       std::set<std::size_t>(cache.members().begin(), cache.members().end()) ==
                           std::set<std::size_t>(ambassadors.begin(), ambassadors.end());
    if (!fresh) throw DomainError("stale ambassador cache: it does not describe the requested set");
    return cache.gain(agent);
}

// --- selection ---------------------------------------------------------------------------

AmbassadorPlan greedy_select(const NetworkModel& model, std::size_t choice, const Vector& endowment,
                             std::size_t budget, bool lazy) {
    const auto n = model.num_agents();
    if (budget < 1 || budget > n) throw DomainError(fmt::format("budget must lie in [1, {}]", n));
    AmbassadorCache cache(model, choice, endowment);
    AmbassadorPlan plan;
    plan.target_choice = choice;
    plan.budget = budget;
    plan.lazy = lazy;
    plan.baseline_share = cache.share();

    auto accept = [&](std::size_t agent, double gain) {
        cache.add(agent);
        plan.selected.push_back(agent);
        plan.marginal_gains.push_back(gain);
    };

    if (!lazy) {
        for (std::size_t step = 0; step < budget; ++step) {
            std::size_t best = n;
            double best_gain = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                if (cache.contains(a)) continue;
                const double g = cache.gain(a);
                ++plan.gain_evaluations;
                if (best == n || g > best_gain) {
                    best = a;
                    best_gain = g;
                }
            }
            accept(best, best_gain);
        }
    } else {
        struct Entry {
            double bound;
            std::size_t agent;
            std::size_t round;
        };
        // max-heap on (bound, -agent)
        auto lower = [](const Entry& x, const Entry& y) {
            return x.bound < y.bound || (x.bound == y.bound && x.agent > y.agent);
        };
        std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> heap(lower);
        for (std::size_t a = 0; a < n; ++a) {
            heap.push({cache.gain(a), a, 0});
            ++plan.gain_evaluations;
        }
        for (std::size_t round = 0; round < budget; ++round) {
            while (true) {
                auto top = heap.top();
                heap.pop();
                if (top.round == round) {
                    accept(top.agent, top.bound);
                    break;
                }
                top.bound = cache.gain(top.agent);
                top.round = round;
                ++plan.gain_evaluations;
                heap.push(top);
            }
        }
    }
    plan.final_share = cache.share();
    return plan;
}

BruteForceResult brute_force_select(const NetworkModel& model, std::size_t choice, const Vector& endowment,
                                    std::size_t budget, double tie_tolerance) {
    check_choice(model, choice);
    check_endowment(model, endowment);
    const auto n = model.num_agents();
    if (budget > n) throw DomainError("budget exceeds the number of agents");
    double count = 0.0;
    for (std::size_t k = 0; k <= budget; ++k) count += binomial(n, k);
    if (count > max_enumerated_subsets)
        throw DomainError(fmt::format("instance too large for enumeration ({:.0f} subsets)", count));

    const Matrix p = model.adoption_dense();
    const Matrix& q = model.direct();
    (void)ChoiceSystem(model); // decisiveness with no ambassadors implies it for every set

    BruteForceResult result;
    std::vector<std::pair<std::vector<std::size_t>, double>> exact;
    std::vector<bool> in(n, false);
    std::vector<std::size_t> current;
    bool have_best = false;

    // subsets in lexicographic order of sorted member lists, sizes 0..budget
    auto visit = [&](auto&& self, std::size_t start) -> void {
        const double value = dense_share(p, q, in, choice, endowment);
        ++result.subsets_evaluated;
        if (!have_best || value > result.best_value) {
            result.best = current;
            result.best_value = value;
            have_best = true;
        }
        if (current.size() == budget) {
            exact.emplace_back(current, value);
            return;
        }
        for (std::size_t a = start; a < n; ++a) {
            in[a] = true;
            current.push_back(a);
            self(self, a + 1);
            current.pop_back();
            in[a] = false;
        }
    };
    visit(visit, 0);

    result.best_value_exact_budget = exact.front().second;
    for (const auto& [set, value] : exact) result.best_value_exact_budget = std::max(result.best_value_exact_budget, value);
    for (auto& [set, value] : exact)
        if (value >= result.best_value_exact_budget - tie_tolerance) result.optimal_exact_budget.push_back(set);
    return result;
}

VertexCoverInstance vertex_cover_instance(std::size_t vertices,
                                          std::span<const std::pair<std::size_t, std::size_t>> edges,
                                          std::size_t budget) {
    if (vertices == 0) throw DomainError("graph needs at least one vertex");
    if (budget > vertices) throw DomainError("budget exceeds the number of vertices");
    std::vector<std::set<std::size_t>> neighbours(vertices);
    for (const auto& [u, v] : edges) {
        if (u >= vertices || v >= vertices) throw DomainError("edge references an unknown vertex");
        if (u == v) throw DomainError("self-loops are not allowed");
        if (!neighbours[u].insert(v).second) throw DomainError("duplicate edge");
        neighbours[v].insert(u);
    }
    const auto n = static_cast<Eigen::Index>(vertices);
    Matrix p = Matrix::Zero(n, n);
    Matrix q = Matrix::Zero(n, 2);
    for (std::size_t i = 0; i < vertices; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        q(row, 1) = 0.5;
        if (neighbours[i].empty()) {
            // an isolated vertex has nobody to adopt from; it keeps the other half on alpha
            q(row, 0) = 0.5;
            continue;
        }
        const double share = 1.0 / (2.0 * static_cast<double>(neighbours[i].size()));
        for (auto k : neighbours[i]) p(row, static_cast<Eigen::Index>(k)) = share;
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < vertices; ++i) ids.push_back(std::to_string(i));
    return {NetworkModel::from_dense(std::move(ids), {"alpha", "beta"}, p, q, Vector::Ones(n)), 0, budget};
}

} // namespace netchoice
