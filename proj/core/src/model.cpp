#include "netchoice/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

namespace {

void check_unique(const std::vector<std::string>& ids, std::string_view what) {
    std::set<std::string_view> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) throw ModelError(fmt::format("duplicate {} id '{}'", what, id));
    }
}

std::size_t index_of(const std::vector<std::string>& ids, std::string_view id, std::string_view what) {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw DomainError(fmt::format("unknown {} '{}'", what, id));
    return static_cast<std::size_t>(it - ids.begin());
}

} // namespace

NetworkModel::NetworkModel(std::vector<std::string> agents, std::vector<std::string> choices,
                           std::vector<AdoptionEntry> adoption, Matrix direct, Vector endowment)
    : agents_(std::move(agents)), choices_(std::move(choices)), direct_(std::move(direct)),
      endowment_(std::move(endowment)) {
    const auto n = agents_.size();
    const auto m = choices_.size();
    if (n == 0) throw ModelError("model needs at least one agent");
    if (m == 0) throw ModelError("model needs at least one choice");
    check_unique(agents_, "agent");
    check_unique(choices_, "choice");
    if (static_cast<std::size_t>(direct_.rows()) != n || static_cast<std::size_t>(direct_.cols()) != m)
        throw ModelError("direct-selection matrix has the wrong shape");
    if (static_cast<std::size_t>(endowment_.size()) != n) throw ModelError("endowment has the wrong length");

    std::sort(adoption.begin(), adoption.end(), [](const AdoptionEntry& a, const AdoptionEntry& b) {
        return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(adoption.size());
    for (std::size_t e = 0; e < adoption.size(); ++e) {
        const auto& a = adoption[e];
        if (a.from >= n || a.to >= n) throw ModelError("adoption entry references an unknown agent");
        if (e > 0 && adoption[e - 1].from == a.from && adoption[e - 1].to == a.to)
            throw ModelError(fmt::format("duplicate adoption entry ({}, {})", agents_[a.from], agents_[a.to]));
        if (!std::isfinite(a.p) || a.p < 0.0)
            throw ModelError(fmt::format("negative adoption probability p[{}][{}]", agents_[a.from], agents_[a.to]));
        if (a.from == a.to && a.p != 0.0)
            throw ModelError(fmt::format("self-adoption p[{0}][{0}] must be zero", agents_[a.from]));
        if (a.p != 0.0) triplets.emplace_back(static_cast<int>(a.from), static_cast<int>(a.to), a.p);
    }
    adoption_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    adoption_.setFromTriplets(triplets.begin(), triplets.end());
    adoption_.makeCompressed();

    if (!direct_.allFinite() || (direct_.array() < 0.0).any())
        throw ModelError("direct-selection probabilities must be finite and non-negative");
    if (!endowment_.allFinite() || (endowment_.array() < 0.0).any())
        throw ModelError("endowment must be finite and non-negative");

    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        double p_sum = 0.0;
        for (SparseMatrix::InnerIterator it(adoption_, row); it; ++it) p_sum += it.value();
        const double q_sum = direct_.row(row).sum();
        const double total = p_sum + q_sum;
        if (std::abs(total - 1.0) > row_sum_tolerance)
            throw ModelError(fmt::format("row of agent '{}' sums to {} (adoption {} + direct {}), expected 1",
                                         agents_[i], total, p_sum, q_sum));
        // rows already exact to rounding are left bit-identical so re-parsing is idempotent
        if (q_sum > 0.0 && std::abs(total - 1.0) > 1e-14) direct_.row(row) *= std::max(0.0, 1.0 - p_sum) / q_sum;
    }
}

NetworkModel NetworkModel::from_dense(std::vector<std::string> agents, std::vector<std::string> choices,
                                      const Matrix& adoption, Matrix direct, Vector endowment) {
    std::vector<AdoptionEntry> entries;
    for (Eigen::Index i = 0; i < adoption.rows(); ++i)
        for (Eigen::Index k = 0; k < adoption.cols(); ++k)
            if (adoption(i, k) != 0.0)
                entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(k), adoption(i, k)});
    return {std::move(agents), std::move(choices), std::move(entries), std::move(direct), std::move(endowment)};
}

std::vector<AdoptionEntry> NetworkModel::adoption_entries() const {
    std::vector<AdoptionEntry> out;
    out.reserve(static_cast<std::size_t>(adoption_.nonZeros()));
    for (Eigen::Index i = 0; i < adoption_.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(adoption_, i); it; ++it)
            out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(it.col()), it.value()});
    return out;
}

std::size_t NetworkModel::agent_index(std::string_view id) const { return index_of(agents_, id, "agent"); }

std::size_t NetworkModel::choice_index(std::string_view id) const { return index_of(choices_, id, "choice"); }

NetworkModel NetworkModel::with_endowment(Vector endowment) const {
    return {agents_, choices_, adoption_entries(), direct_, std::move(endowment)};
}

double spectral_radius(const NetworkModel& model, int max_iterations, double relative_tolerance) {
    const auto n = model.num_agents();
    const auto entries = model.adoption_entries();
    if (entries.empty()) return 0.0;
    std::vector<std::vector<std::pair<std::size_t, double>>> out(n);
    for (const auto& e : entries) out[e.from].emplace_back(e.to, e.p);

    // Iterative Tarjan; the radius is the largest radius over strongly connected components.
    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unvisited), low(n, 0), component(n, unvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        std::vector<std::pair<std::size_t, std::size_t>> frames{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& [v, next] = frames.back();
            if (next < out[v].size()) {
                const auto w = out[v][next++].first;
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const auto finished = v;
            frames.pop_back();
            if (!frames.empty()) low[frames.back().first] = std::min(low[frames.back().first], low[finished]);
            if (low[finished] != index[finished]) continue;
            auto& members = components.emplace_back();
            std::size_t w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                component[w] = components.size() - 1;
                members.push_back(w);
            } while (w != finished);
        }
    }

    double radius = 0.0;
    for (std::size_t c = 0; c < components.size(); ++c) {
        const auto& members = components[c];
        std::vector<std::size_t> local(n, unvisited);
        for (std::size_t k = 0; k < members.size(); ++k) local[members[k]] = k;
        std::vector<Eigen::Triplet<double>> triplets;
        for (auto v : members)
            for (const auto& [w, p] : out[v])
                if (component[w] == c) triplets.emplace_back(static_cast<int>(local[v]), static_cast<int>(local[w]), p);
        if (triplets.empty()) continue;
        const auto m = static_cast<Eigen::Index>(members.size());
        SparseMatrix block(m, m);
        block.setFromTriplets(triplets.begin(), triplets.end());
        // I + block is primitive, so x stays positive and the Collatz-Wielandt bounds bracket the root.
        Vector x = Vector::Ones(m);
        double lower = 0.0, upper = 1e300;
        for (int iter = 0; iter < max_iterations; ++iter) {
            const Vector px = block * x;
            const Vector ratio = px.cwiseQuotient(x);
            lower = std::max(lower, ratio.minCoeff());
            upper = std::min(upper, ratio.maxCoeff());
            if (upper - lower <= relative_tolerance * upper) break;
            x = x + px;
            x /= x.maxCoeff();
        }
        radius = std::max(radius, 0.5 * (lower + upper));
    }
    return std::clamp(radius, 0.0, 1.0);
}

ValidationReport validate(const NetworkModel& model) {
    const auto n = model.num_agents();
    ValidationReport report;
    const Vector q_bar = model.decisiveness();
    report.row_sum_residuals = Vector::Zero(static_cast<Eigen::Index>(n));

    // reverse adjacency: k -> {i : p_ik > 0}
    std::vector<std::vector<std::size_t>> adopters(n);
    for (const auto& e : model.adoption_entries()) {
        adopters[e.to].push_back(e.from);
        report.row_sum_residuals[static_cast<Eigen::Index>(e.from)] += e.p;
    }
    report.row_sum_residuals += q_bar - Vector::Ones(static_cast<Eigen::Index>(n));

    std::vector<bool> reached(n, false);
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (q_bar[static_cast<Eigen::Index>(i)] > 0.0) {
            report.decisive_agents.push_back(i);
            reached[i] = true;
            frontier.push_back(i);
        }
    }
    while (!frontier.empty()) {
        const auto k = frontier.front();
        frontier.pop_front();
        for (auto i : adopters[k]) {
            if (!reached[i]) {
                reached[i] = true;
                frontier.push_back(i);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!reached[i]) report.unreachable_agents.push_back(i);

    report.collectively_decisive = !report.decisive_agents.empty() && report.unreachable_agents.empty();
    report.spectral_radius_estimate = spectral_radius(model);
    return report;
}

// --- document I/O -----------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

NetworkModel parse_model(std::string_view document) {
    using detail::json;
    const json doc = detail::parse_json(document);
    detail::require_object(doc, "model");
    detail::reject_unknown_keys(doc, {"agents", "choices", "adoption", "direct", "endowment", "pricing"}, "model");

    auto read_ids = [&](std::string_view key) {
        const auto& node = detail::require_key(doc, key, "model");
        if (!node.is_array()) throw ParseError(fmt::format("model: '{}' must be a list", key));
        std::vector<std::string> ids;
        for (const auto& v : node) ids.push_back(detail::as_string(v, key));
        std::set<std::string> seen(ids.begin(), ids.end());
        if (seen.size() != ids.size()) throw ParseError(fmt::format("model: duplicate id in '{}'", key));
        return ids;
    };
    auto agents = read_ids("agents");
    auto choices = read_ids("choices");
    std::unordered_map<std::string, std::size_t> agent_pos;
    std::unordered_map<std::string, std::size_t> choice_pos;
    for (std::size_t i = 0; i < agents.size(); ++i) agent_pos[agents[i]] = i;
    for (std::size_t j = 0; j < choices.size(); ++j) choice_pos[choices[j]] = j;
    auto lookup = [](const auto& table, const std::string& id, std::string_view what) {
        auto it = table.find(id);
        if (it == table.end()) throw ParseError(fmt::format("model: unknown {} '{}'", what, id));
        return it->second;
    };

    std::vector<AdoptionEntry> adoption;
    std::set<std::pair<std::size_t, std::size_t>> adoption_seen;
    if (auto it = doc.find("adoption"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("model: 'adoption' must be a list");
        for (const auto& entry : *it) {
            detail::require_object(entry, "adoption entry");
            detail::reject_unknown_keys(entry, {"from", "to", "p"}, "adoption entry");
            const auto from = lookup(agent_pos, detail::as_string(detail::require_key(entry, "from", "adoption"), "from"), "agent");
            const auto to = lookup(agent_pos, detail::as_string(detail::require_key(entry, "to", "adoption"), "to"), "agent");
            const double p = detail::as_number(detail::require_key(entry, "p", "adoption"), "p");
            if (!adoption_seen.emplace(from, to).second)
                throw ParseError(fmt::format("model: duplicate adoption entry {} -> {}", agents[from], agents[to]));
            adoption.push_back({from, to, p});
        }
    }

    Matrix direct = Matrix::Zero(static_cast<Eigen::Index>(agents.size()), static_cast<Eigen::Index>(choices.size()));
    std::set<std::pair<std::size_t, std::size_t>> direct_seen;
    if (auto it = doc.find("direct"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("model: 'direct' must be a list");
        for (const auto& entry : *it) {
            detail::require_object(entry, "direct entry");
            detail::reject_unknown_keys(entry, {"agent", "choice", "q"}, "direct entry");
            const auto i = lookup(agent_pos, detail::as_string(detail::require_key(entry, "agent", "direct"), "agent"), "agent");
            const auto j = lookup(choice_pos, detail::as_string(detail::require_key(entry, "choice", "direct"), "choice"), "choice");
            if (!direct_seen.emplace(i, j).second)
                throw ParseError(fmt::format("model: duplicate direct entry {} / {}", agents[i], choices[j]));
            direct(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                detail::as_number(detail::require_key(entry, "q", "direct"), "q");
        }
    }

    Vector endowment = Vector::Ones(static_cast<Eigen::Index>(agents.size()));
    if (auto it = doc.find("endowment"); it != doc.end()) {
        detail::require_object(*it, "endowment");
        for (const auto& [id, value] : it->items())
            endowment[static_cast<Eigen::Index>(lookup(agent_pos, id, "agent"))] = detail::as_number(value, "endowment");
    }

    return {std::move(agents), std::move(choices), std::move(adoption), std::move(direct), std::move(endowment)};
}

NetworkModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

std::string serialize_model(const NetworkModel& model) {
    using ojson = nlohmann::ordered_json;
    ojson doc;
    doc["agents"] = model.agents();
    doc["choices"] = model.choices();
    auto adoption = ojson::array();
    for (const auto& e : model.adoption_entries())
        adoption.push_back({{"from", model.agents()[e.from]}, {"to", model.agents()[e.to]}, {"p", e.p}});
    doc["adoption"] = std::move(adoption);
    auto direct = ojson::array();
    const auto& q = model.direct();
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            if (q(i, j) != 0.0)
                direct.push_back({{"agent", model.agents()[static_cast<std::size_t>(i)]},
                                  {"choice", model.choices()[static_cast<std::size_t>(j)]},
                                  {"q", q(i, j)}});
    doc["direct"] = std::move(direct);
    ojson endowment = ojson::object();
    for (std::size_t i = 0; i < model.num_agents(); ++i)
        endowment[model.agents()[i]] = model.endowment()[static_cast<Eigen::Index>(i)];
    doc["endowment"] = std::move(endowment);
    return doc.dump(2) + "\n";
}

} // namespace netchoice
