#include "netchoice/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/LU>
#include <fmt/format.h>

#include "json_util.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

namespace {

constexpr double distribution_tolerance = 1e-9;
constexpr double positive_margin = 1e-9;
constexpr double dual_threshold = 1e-9;

// a . x >= b over the parameter variables
struct MarginRow {
    std::string name;
    std::vector<Term> terms;
    double rhs = 0.0;
};

void check_agent(std::size_t i, std::size_t n, std::size_t item) {
    if (i >= n) throw DomainError(fmt::format("knowledge item {}: agent index out of range", item));
}

void check_choice(std::size_t j, std::size_t m, std::size_t item) {
    if (j >= m) throw DomainError(fmt::format("knowledge item {}: choice index out of range", item));
}

void check_finite(double v, std::size_t item) {
    if (!std::isfinite(v)) throw DomainError(fmt::format("knowledge item {}: K and delta must be finite", item));
}

std::vector<Term> negated(std::vector<Term> terms) {
    for (auto& t : terms) t.coef = -t.coef;
    return terms;
}

double norm(const std::vector<Term>& terms) {
    double s = 0.0;
    for (const auto& t : terms) s += t.coef * t.coef;
    return std::sqrt(s);
}

LinearProgram phase1_program(const EstimationPolyhedron& poly) {
    LinearProgram lp = poly.program;
    const auto t = lp.add_variable("t", 0.0, 2.0 / pi_floor);
    for (std::size_t i = 0; i < poly.agents; ++i) {
        for (std::size_t j = 0; j < poly.choices; ++j) {
            const double scale = std::max(poly.observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), pi_floor);
            lp.add_constraint(fmt::format("ratio_{}_{}", i, j),
                              {{poly.eps_plus_var(i, j), 1.0}, {poly.eps_minus_var(i, j), 1.0}, {t, -scale}}, Sense::le,
                              0.0);
        }
    }
    lp.sense = ObjectiveSense::minimize;
    lp.objective = {{t, 1.0}};
    return lp;
}

// Knowledge inequalities plus non-negativity of every parameter not pinned to zero.
std::vector<MarginRow> margin_rows(const EstimationPolyhedron& poly) {
    std::vector<MarginRow> rows;
    std::set<std::size_t> pinned;
    for (std::size_t r = 0; r < poly.program.constraints.size(); ++r) {
        const auto& c = poly.program.constraints[r];
        if (poly.tags[r] == RowTag::sparsity) pinned.insert(c.terms.front().var);
        if (c.sense == Sense::eq) continue;
        if (c.sense == Sense::ge)
            rows.push_back({c.name, c.terms, c.rhs});
        else
            rows.push_back({c.name, negated(c.terms), -c.rhs});
    }
    for (std::size_t v = 0; v < poly.num_parameter_vars(); ++v) {
        if (pinned.contains(v)) continue;
        rows.push_back({"nonneg_" + poly.program.variables[v].name, {{v, 1.0}}, 0.0});
    }
    return rows;
}

LinearProgram interior_program(const EstimationPolyhedron& poly, const SlackSolution& slack,
                               const std::vector<MarginRow>& margins, const std::vector<MarginRow>& equalities) {
    LinearProgram lp;
    lp.variables = poly.program.variables;
    for (std::size_t i = 0; i < poly.agents; ++i) {
        for (std::size_t j = 0; j < poly.choices; ++j) {
            const auto e = std::pair{static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)};
            auto& plus = lp.variables[poly.eps_plus_var(i, j)];
            auto& minus = lp.variables[poly.eps_minus_var(i, j)];
            plus.lower = plus.upper = slack.eps_plus(e.first, e.second);
            minus.lower = minus.upper = slack.eps_minus(e.first, e.second);
        }
    }
    for (const auto& c : poly.program.constraints)
        if (c.sense == Sense::eq) lp.constraints.push_back(c);
    for (const auto& r : equalities) lp.add_constraint(r.name, r.terms, Sense::eq, r.rhs);
    const auto s = lp.add_variable("s", 0.0, 1.0);
    for (const auto& r : margins) {
        auto terms = r.terms;
        terms.push_back({s, -norm(r.terms)});
        lp.add_constraint("margin_" + r.name, std::move(terms), Sense::ge, r.rhs);
    }
    lp.sense = ObjectiveSense::maximize;
    lp.objective = {{s, 1.0}};
    return lp;
}

void check_slack(const EstimationPolyhedron& poly, const SlackSolution& slack) {
    const auto n = static_cast<Eigen::Index>(poly.agents);
    const auto m = static_cast<Eigen::Index>(poly.choices);
    if (slack.eps_plus.rows() != n || slack.eps_plus.cols() != m || slack.eps_minus.rows() != n ||
        slack.eps_minus.cols() != m)
        throw DomainError("slack solution does not match the polyhedron");
}

} // namespace

const char* to_string(RowTag tag) {
    switch (tag) {
    case RowTag::fit: return "fit";
    case RowTag::nonneg: return "nonneg";
    case RowTag::rowsum: return "rowsum";
    case RowTag::group_importance: return "group_importance";
    case RowTag::preference_ratio: return "preference_ratio";
    case RowTag::decisiveness: return "decisiveness";
    case RowTag::sparsity: return "sparsity";
    }
    return "unknown";
}

std::size_t EstimationPolyhedron::p_var(std::size_t i, std::size_t k) const {
    if (i >= agents || k >= agents || i == k) throw DomainError("no adoption variable for this pair");
    return i * (agents - 1) + (k < i ? k : k - 1);
}

std::size_t EstimationPolyhedron::q_var(std::size_t i, std::size_t j) const {
    if (i >= agents || j >= choices) throw DomainError("direct-selection index out of range");
    return agents * (agents - 1) + i * choices + j;
}

std::size_t EstimationPolyhedron::eps_plus_var(std::size_t i, std::size_t j) const {
    return q_var(i, j) + agents * choices;
}

std::size_t EstimationPolyhedron::eps_minus_var(std::size_t i, std::size_t j) const {
    return q_var(i, j) + 2 * agents * choices;
}

EstimationPolyhedron build_polyhedron(const Matrix& observed, const std::vector<KnowledgeItem>& knowledge) {
    if (observed.rows() < 1 || observed.cols() < 1) throw DomainError("observed matrix is empty");
    if (!observed.allFinite()) throw DomainError("observed matrix has non-finite entries");
    for (Eigen::Index i = 0; i < observed.rows(); ++i) {
        if (observed.row(i).minCoeff() < 0.0 || std::abs(observed.row(i).sum() - 1.0) > distribution_tolerance)
            throw DomainError(fmt::format("observed row {} is not a probability distribution", i));
    }
    EstimationPolyhedron poly;
    poly.agents = static_cast<std::size_t>(observed.rows());
    poly.choices = static_cast<std::size_t>(observed.cols());
    poly.observed = observed;
    const auto n = poly.agents;
    const auto m = poly.choices;
    auto& lp = poly.program;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            if (i != k) lp.add_variable(fmt::format("p_{}_{}", i, k), 0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) lp.add_variable(fmt::format("q_{}_{}", i, j), 0.0, 1.0);
    for (const char* family : {"epsp", "epsm"})
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) lp.add_variable(fmt::format("{}_{}_{}", family, i, j), 0.0, 1.0);

    auto add = [&](std::string name, std::vector<Term> terms, Sense sense, double rhs, RowTag tag) {
        lp.add_constraint(std::move(name), std::move(terms), sense, rhs);
        poly.tags.push_back(tag);
    };

    // pi_ij + eps+ - eps- = q_ij + sum_k p_ik pi_kj
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            std::vector<Term> terms{{poly.q_var(i, j), 1.0}};
            for (std::size_t k = 0; k < n; ++k) {
                const double pi = observed(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
                if (k != i && pi != 0.0) terms.push_back({poly.p_var(i, k), pi});
            }
            terms.push_back({poly.eps_plus_var(i, j), -1.0});
            terms.push_back({poly.eps_minus_var(i, j), 1.0});
            add(fmt::format("fit_{}_{}", i, j), std::move(terms), Sense::eq,
                observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), RowTag::fit);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Term> terms;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) terms.push_back({poly.p_var(i, k), 1.0});
        for (std::size_t j = 0; j < m; ++j) terms.push_back({poly.q_var(i, j), 1.0});
        add(fmt::format("rowsum_{}", i), std::move(terms), Sense::eq, 1.0, RowTag::rowsum);
    }

    for (std::size_t item = 0; item < knowledge.size(); ++item) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, GroupImportance>) {
                    check_agent(k.agent, n, item);
                    check_finite(k.k, item);
                    if (k.s1.empty()) throw DomainError(fmt::format("knowledge item {}: S1 is empty", item));
                    std::set<std::size_t> seen;
                    std::vector<Term> terms;
                    for (auto a : k.s1) {
                        check_agent(a, n, item);
                        if (a == k.agent || !seen.insert(a).second)
                            throw DomainError(fmt::format("knowledge item {}: S1 must list distinct other agents", item));
                        terms.push_back({poly.p_var(k.agent, a), 1.0});
                    }
                    for (auto a : k.s2) {
                        check_agent(a, n, item);
                        if (a == k.agent || !seen.insert(a).second)
                            throw DomainError(fmt::format(
                                "knowledge item {}: S2 must list distinct other agents disjoint from S1", item));
                        terms.push_back({poly.p_var(k.agent, a), -k.k});
                    }
                    add(fmt::format("group_{}", item), std::move(terms), Sense::ge, 0.0, RowTag::group_importance);
                } else if constexpr (std::is_same_v<T, PreferenceRatio>) {
                    check_agent(k.agent, n, item);
                    check_choice(k.preferred, m, item);
                    check_choice(k.other, m, item);
                    check_finite(k.k, item);
                    check_finite(k.delta, item);
                    if (k.preferred == k.other)
                        throw DomainError(fmt::format("knowledge item {}: the two choices must differ", item));
                    if (k.delta < 0.0) throw DomainError(fmt::format("knowledge item {}: delta must be >= 0", item));
                    const auto a = poly.q_var(k.agent, k.preferred);
                    const auto b = poly.q_var(k.agent, k.other);
                    if (k.delta == 0.0) {
                        add(fmt::format("pref_{}", item), {{a, 1.0}, {b, -k.k}}, Sense::eq, 0.0, RowTag::preference_ratio);
                    } else {
                        add(fmt::format("pref_lo_{}", item), {{a, 1.0}, {b, -(k.k - k.delta)}}, Sense::ge, 0.0,
                            RowTag::preference_ratio);
                        add(fmt::format("pref_hi_{}", item), {{a, -1.0}, {b, k.k + k.delta}}, Sense::ge, 0.0,
                            RowTag::preference_ratio);
                    }
                } else if constexpr (std::is_same_v<T, RelianceBound>) {
                    check_agent(k.agent, n, item);
                    check_finite(k.k, item);
                    std::vector<Term> terms;
                    for (std::size_t o = 0; o < n; ++o)
                        if (o != k.agent) terms.push_back({poly.p_var(k.agent, o), 1.0});
                    for (std::size_t j = 0; j < m; ++j) terms.push_back({poly.q_var(k.agent, j), -k.k});
                    add(fmt::format("decisive_{}", item), std::move(terms),
                        k.relation == RelianceBound::Relation::at_least ? Sense::ge : Sense::le, 0.0,
                        RowTag::decisiveness);
                } else {
                    check_agent(k.agent, n, item);
                    check_agent(k.other, n, item);
                    if (k.agent == k.other)
                        throw DomainError(fmt::format("knowledge item {}: self-adoption is always zero", item));
                    add(fmt::format("pin_{}", item), {{poly.p_var(k.agent, k.other), 1.0}}, Sense::eq, 0.0,
                        RowTag::sparsity);
                }
            },
            knowledge[item]);
    }
    return poly;
}

SlackSolution phase1_min_slack(const EstimationPolyhedron& poly) {
    const auto lp = phase1_program(poly);
    const auto result = simplex_solve(lp);
    if (result.status == LpStatus::infeasible)
        throw ComputationError("knowledge constraints are inconsistent with any slack assignment");
    if (result.status != LpStatus::optimal)
        throw ComputationError(fmt::format("slack minimization failed: {} ({})", to_string(result.status),
                                           result.diagnostics));
    SlackSolution out;
    out.objective = std::max(0.0, result.value);
    const auto n = static_cast<Eigen::Index>(poly.agents);
    const auto m = static_cast<Eigen::Index>(poly.choices);
    out.eps_plus.resize(n, m);
    out.eps_minus.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto ii = static_cast<std::size_t>(i);
            const auto jj = static_cast<std::size_t>(j);
            out.eps_plus(i, j) = result.x[static_cast<Eigen::Index>(poly.eps_plus_var(ii, jj))];
            out.eps_minus(i, j) = result.x[static_cast<Eigen::Index>(poly.eps_minus_var(ii, jj))];
        }
    }
    out.point = result.x.head(static_cast<Eigen::Index>(poly.program.variables.size()));
    return out;
}

namespace {

// With slacks fixed, the parameters are pinned down when the equality rows have full column rank.
bool single_point(const EstimationPolyhedron& poly, const std::vector<MarginRow>& converted) {
    const auto vars = poly.num_parameter_vars();
    std::vector<const std::vector<Term>*> rows;
    for (const auto& c : poly.program.constraints)
        if (c.sense == Sense::eq) rows.push_back(&c.terms);
    for (const auto& r : converted) rows.push_back(&r.terms);
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vars));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& t : *rows[r])
            if (t.var < vars) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t.var)) += t.coef;
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-10);
    return static_cast<std::size_t>(lu.rank()) == vars;
}

} // namespace

InteriorEstimate interior_point_estimate(const EstimationPolyhedron& poly, const SlackSolution& slack) {
    check_slack(poly, slack);
    auto margins = margin_rows(poly);
    std::vector<MarginRow> equalities;
    InteriorEstimate out;
    const std::size_t max_rounds = margins.size() + 1;
    LpResult result;
    while (true) {
        if (++out.rounds > max_rounds) throw ComputationError("equality conversion did not terminate");
        const auto lp = interior_program(poly, slack, margins, equalities);
        result = simplex_solve(lp);
        if (result.status != LpStatus::optimal)
            throw ComputationError(fmt::format("interior-point program failed: {} ({})", to_string(result.status),
                                               result.diagnostics));
        if (margins.empty()) {
            out.margin = 0.0;
            break;
        }
        if (result.value > positive_margin) {
            out.margin = result.value;
            break;
        }
        // Every point of the set is optimal when the margin is zero, so complementary slackness
        // makes each row with a non-zero shadow price tight everywhere on the set.
        const auto first_margin = lp.constraints.size() - margins.size();
        std::vector<bool> implicit(margins.size(), false);
        std::size_t strongest = 0;
        for (std::size_t r = 0; r < margins.size(); ++r) {
            const double y = std::abs(result.duals[static_cast<Eigen::Index>(first_margin + r)]);
            implicit[r] = y > dual_threshold;
            if (y > std::abs(result.duals[static_cast<Eigen::Index>(first_margin + strongest)])) strongest = r;
        }
        if (std::none_of(implicit.begin(), implicit.end(), [](bool b) { return b; })) implicit[strongest] = true;
        std::vector<MarginRow> kept;
        for (std::size_t r = 0; r < margins.size(); ++r) {
            if (implicit[r]) {
                out.converted.push_back(margins[r].name);
                equalities.push_back(std::move(margins[r]));
            } else {
                kept.push_back(std::move(margins[r]));
            }
        }
        margins = std::move(kept);
    }

    if (single_point(poly, equalities)) out.margin = 0.0;

    const auto n = static_cast<Eigen::Index>(poly.agents);
    const auto m = static_cast<Eigen::Index>(poly.choices);
    out.point = result.x.head(static_cast<Eigen::Index>(poly.program.variables.size()));
    out.p = Matrix::Zero(n, n);
    out.q = Matrix::Zero(n, m);
    for (std::size_t i = 0; i < poly.agents; ++i) {
        for (std::size_t k = 0; k < poly.agents; ++k)
            if (k != i)
                out.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                    std::max(0.0, out.point[static_cast<Eigen::Index>(poly.p_var(i, k))]);
        for (std::size_t j = 0; j < poly.choices; ++j)
            out.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::max(0.0, out.point[static_cast<Eigen::Index>(poly.q_var(i, j))]);
    }
    return out;
}

LinearProgram estimation_program(const EstimationPolyhedron& poly, ExportPhase phase, const SlackSolution* slack) {
    switch (phase) {
    case ExportPhase::feasibility: return poly.program;
    case ExportPhase::phase1: return phase1_program(poly);
    case ExportPhase::interior:
        if (slack == nullptr) throw DomainError("the interior program needs the phase-1 slacks");
        check_slack(poly, *slack);
        return interior_program(poly, *slack, margin_rows(poly), {});
    }
    throw DomainError("unknown export phase");
}

NetworkModel estimate_to_model(const InteriorEstimate& estimate, std::vector<std::string> agents,
                               std::vector<std::string> choices) {
    const auto n = static_cast<Eigen::Index>(agents.size());
    return NetworkModel::from_dense(std::move(agents), std::move(choices), estimate.p, estimate.q, Vector::Ones(n));
}

// --- documents -----------------------------------------------------------------------------

namespace {

std::size_t lookup(const std::vector<std::string>& ids, const detail::json& node, std::string_view where,
                   std::string_view kind) {
    const auto id = detail::as_string(node, where);
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw ParseError(fmt::format("{}: unknown {} '{}'", where, kind, id));
    return static_cast<std::size_t>(it - ids.begin());
}

std::vector<std::size_t> lookup_all(const std::vector<std::string>& ids, const detail::json& node,
                                    std::string_view where) {
    if (!node.is_array()) throw ParseError(fmt::format("{}: expected an array of agent ids", where));
    std::vector<std::size_t> out;
    for (const auto& e : node) out.push_back(lookup(ids, e, where, "agent"));
    return out;
}

} // namespace

std::vector<KnowledgeItem> parse_knowledge(std::string_view document, const std::vector<std::string>& agents,
                                           const std::vector<std::string>& choices) {
    using detail::as_number;
    using detail::as_string;
    using detail::require_key;
    const auto root = detail::parse_json(document);
    if (!root.is_array()) throw ParseError("knowledge: expected an array");
    std::vector<KnowledgeItem> items;
    for (std::size_t n = 0; n < root.size(); ++n) {
        const auto where = fmt::format("knowledge[{}]", n);
        const auto& node = root[n];
        detail::require_object(node, where);
        const auto type = as_string(require_key(node, "type", where), where + ".type");
        auto agent = [&](std::string_view key) { return lookup(agents, require_key(node, key, where), where, "agent"); };
        auto choice = [&](std::string_view key) {
            return lookup(choices, require_key(node, key, where), where, "choice");
        };
        auto number = [&](std::string_view key) { return as_number(require_key(node, key, where), where); };
        if (type == "group_importance") {
            detail::reject_unknown_keys(node, {"type", "agent", "S1", "S2", "K"}, where);
            items.emplace_back(GroupImportance{agent("agent"), lookup_all(agents, require_key(node, "S1", where), where),
                                               lookup_all(agents, require_key(node, "S2", where), where), number("K")});
        } else if (type == "preference_ratio") {
            detail::reject_unknown_keys(node, {"type", "agent", "preferred", "other", "K", "delta"}, where);
            items.emplace_back(PreferenceRatio{agent("agent"), choice("preferred"), choice("other"), number("K"),
                                               node.contains("delta") ? number("delta") : 0.0});
        } else if (type == "decisiveness") {
            detail::reject_unknown_keys(node, {"type", "agent", "K", "relation"}, where);
            const auto rel = as_string(require_key(node, "relation", where), where + ".relation");
            if (rel != ">=" && rel != "<=") throw ParseError(where + ".relation: expected \">=\" or \"<=\"");
            items.emplace_back(RelianceBound{agent("agent"), number("K"),
                                             rel == ">=" ? RelianceBound::Relation::at_least
                                                         : RelianceBound::Relation::at_most});
        } else if (type == "sparsity") {
            detail::reject_unknown_keys(node, {"type", "agent", "other"}, where);
            items.emplace_back(Sparsity{agent("agent"), agent("other")});
        } else {
            throw ParseError(fmt::format("{}: unknown knowledge type '{}'", where, type));
        }
    }
    return items;
}

ObservedChoices parse_observed(std::string_view document) {
    using detail::require_key;
    const auto root = detail::parse_json(document);
    detail::require_object(root, "observed");
    detail::reject_unknown_keys(root, {"agents", "choices", "pi"}, "observed");
    ObservedChoices out;
    for (auto [key, target] : {std::pair{"agents", &out.agents}, std::pair{"choices", &out.choices}}) {
        const auto& list = require_key(root, key, "observed");
        if (!list.is_array()) throw ParseError(fmt::format("observed.{}: expected an array", key));
        for (const auto& e : list) target->push_back(detail::as_string(e, fmt::format("observed.{}", key)));
    }
    const auto& pi = require_key(root, "pi", "observed");
    if (!pi.is_array() || pi.size() != out.agents.size())
        throw ParseError("observed.pi: expected one row per agent");
    out.pi.resize(static_cast<Eigen::Index>(out.agents.size()), static_cast<Eigen::Index>(out.choices.size()));
    for (std::size_t i = 0; i < pi.size(); ++i) {
        if (!pi[i].is_array() || pi[i].size() != out.choices.size())
            throw ParseError(fmt::format("observed.pi[{}]: expected one entry per choice", i));
        for (std::size_t j = 0; j < out.choices.size(); ++j)
            out.pi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                detail::as_number(pi[i][j], fmt::format("observed.pi[{}]", i));
    }
    return out;
}

} // namespace netchoice
