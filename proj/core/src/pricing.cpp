#include "netchoice/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "json_util.hpp"
#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"

namespace netchoice {

namespace {

constexpr double box_tolerance = 1e-12;
constexpr double entry_tolerance = 1e-12;
constexpr double golden = 0.6180339887498949; // (sqrt(5) - 1) / 2

// Entries at z without any validation beyond clamping rounding noise at the bounds.
std::pair<Matrix, Matrix> affine_entries(const NetworkModel& base, const std::vector<Matrix>& dq,
                                         const std::vector<Matrix>& dp, const Vector& z) {
    Matrix q = base.direct();
    Matrix p = base.adoption_dense();
    for (std::size_t f = 0; f < dq.size(); ++f) {
        q += z[static_cast<Eigen::Index>(f)] * dq[f];
        p += z[static_cast<Eigen::Index>(f)] * dp[f];
    }
    return {std::move(q), std::move(p)};
}

bool entries_in_unit_interval(const Matrix& m) {
    return m.minCoeff() >= -entry_tolerance && m.maxCoeff() <= 1.0 + entry_tolerance;
}

NetworkModel build(const NetworkModel& base, Matrix q, Matrix p) {
    q = q.cwiseMax(0.0).cwiseMin(1.0);
    p = p.cwiseMax(0.0).cwiseMin(1.0);
    return NetworkModel::from_dense(base.agents(), base.choices(), p, std::move(q), base.endowment());
}

void check_firm(std::size_t f, std::size_t n, std::size_t num_choices, const Firm& firm) {
    if (firm.choice >= num_choices) throw ModelError(fmt::format("firm {}: choice index out of range", f));
    if (!(std::isfinite(firm.margin) && firm.margin > 0.0)) throw ModelError(fmt::format("firm {}: margin must be positive", f));
    if (!(std::isfinite(firm.lower) && std::isfinite(firm.upper) && firm.lower <= firm.upper))
        throw ModelError(fmt::format("firm {}: bounds must be finite with lower <= upper", f));
    if (firm.upper > firm.margin) throw ModelError(fmt::format("firm {}: the discount bound exceeds the margin", f));

    std::vector<double> row_total(n, 0.0);
    std::vector<double> row_scale(n, 0.0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& s : firm.direct) {
        if (s.agent >= n || s.choice >= num_choices)
            throw ModelError(fmt::format("firm {}: direct sensitivity index out of range", f));
        if (!std::isfinite(s.slope)) throw ModelError(fmt::format("firm {}: non-finite sensitivity", f));
        if (!seen.emplace(s.agent, s.choice).second)
            throw ModelError(fmt::format("firm {}: duplicate direct sensitivity", f));
        if (s.choice == firm.choice && s.slope < 0.0)
            throw ModelError(fmt::format("firm {}: shape condition violated, own-choice selection must not "
                                         "decrease with the discount", f));
        if (s.choice != firm.choice && s.slope > 0.0)
            throw ModelError(fmt::format("firm {}: shape condition violated, other choices must not gain "
                                         "from the discount", f));
        row_total[s.agent] += s.slope;
        row_scale[s.agent] += std::abs(s.slope);
    }
    seen.clear();
    for (const auto& s : firm.adoption) {
        if (s.from >= n || s.to >= n) throw ModelError(fmt::format("firm {}: adoption sensitivity index out of range", f));
        if (s.from == s.to) throw ModelError(fmt::format("firm {}: self-adoption cannot vary", f));
        if (!std::isfinite(s.slope)) throw ModelError(fmt::format("firm {}: non-finite sensitivity", f));
        if (!seen.emplace(s.from, s.to).second)
            throw ModelError(fmt::format("firm {}: duplicate adoption sensitivity", f));
        if (s.slope > 0.0)
            throw ModelError(fmt::format("firm {}: shape condition violated, adoption must not increase "
                                         "with the discount", f));
        row_total[s.from] += s.slope;
        row_scale[s.from] += std::abs(s.slope);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(row_total[i]) > 1e-12 * std::max(1.0, row_scale[i]))
            throw ModelError(fmt::format("firm {}: sensitivities of agent {} do not sum to zero", f, i));
    }
}

ChoiceSystem system_at(const ParametricModel& pm, const Vector& z, NetworkModel& model_out) {
    model_out = evaluate_model(pm, z);
    return ChoiceSystem(model_out);
}

} // namespace

ParametricModel::ParametricModel(NetworkModel base, std::vector<Firm> firms)
    : base_(std::move(base)), firms_(std::move(firms)) {
    const auto n = base_.num_agents();
    const auto m = base_.num_choices();
    if (firms_.empty()) throw ModelError("a parametric model needs at least one firm");
    if (firms_.size() > max_firms) throw ModelError(fmt::format("at most {} firms are supported", max_firms));
    std::set<std::size_t> sold;
    for (std::size_t f = 0; f < firms_.size(); ++f) {
        check_firm(f, n, m, firms_[f]);
        if (!sold.insert(firms_[f].choice).second) throw ModelError("two firms sell the same choice");
        Matrix dq = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
        Matrix dp = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (const auto& s : firms_[f].direct)
            dq(static_cast<Eigen::Index>(s.agent), static_cast<Eigen::Index>(s.choice)) = s.slope;
        for (const auto& s : firms_[f].adoption)
            dp(static_cast<Eigen::Index>(s.from), static_cast<Eigen::Index>(s.to)) = s.slope;
        dq_.push_back(std::move(dq));
        dp_.push_back(std::move(dp));
    }

    // Corners bound every affine entry and realize every zero pattern; the midpoint has the
    // largest support. Decisiveness only improves with support, so the corners settle it.
    const auto num_firms = firms_.size();
    const Vector lo = lower_bounds();
    const Vector hi = upper_bounds();
    auto check_point = [&](const Vector& z, std::string_view what) {
        auto [q, p] = affine_entries(base_, dq_, dp_, z);
        if (!entries_in_unit_interval(q) || !entries_in_unit_interval(p))
            throw ModelError(fmt::format("discount box is infeasible: entries leave [0, 1] at {}", what));
        const auto model = build(base_, std::move(q), std::move(p));
        if (!validate(model).collectively_decisive)
            throw ModelError(fmt::format("discount box is infeasible: decisiveness fails at {}", what));
    };
    for (std::size_t mask = 0; mask < (std::size_t{1} << num_firms); ++mask) {
        Vector z(static_cast<Eigen::Index>(num_firms));
        for (std::size_t f = 0; f < num_firms; ++f) {
            const auto e = static_cast<Eigen::Index>(f);
            z[e] = (mask >> f) & 1U ? hi[e] : lo[e];
        }
        check_point(z, fmt::format("corner {}", mask));
    }
    check_point((lo + hi) / 2.0, "the midpoint");
}

Vector ParametricModel::lower_bounds() const {
    Vector v(static_cast<Eigen::Index>(firms_.size()));
    for (std::size_t f = 0; f < firms_.size(); ++f) v[static_cast<Eigen::Index>(f)] = firms_[f].lower;
    return v;
}

Vector ParametricModel::upper_bounds() const {
    Vector v(static_cast<Eigen::Index>(firms_.size()));
    for (std::size_t f = 0; f < firms_.size(); ++f) v[static_cast<Eigen::Index>(f)] = firms_[f].upper;
    return v;
}

Vector ParametricModel::clamped_origin() const {
    return Vector::Zero(static_cast<Eigen::Index>(firms_.size())).cwiseMax(lower_bounds()).cwiseMin(upper_bounds());
}

bool ParametricModel::in_box(const Vector& z) const {
    if (z.size() != static_cast<Eigen::Index>(firms_.size())) return false;
    for (std::size_t f = 0; f < firms_.size(); ++f) {
        const double x = z[static_cast<Eigen::Index>(f)];
        if (!(x >= firms_[f].lower - box_tolerance && x <= firms_[f].upper + box_tolerance)) return false;
    }
    return true;
}

bool ParametricModel::interior(const Vector& z, std::size_t firm) const {
    if (firm >= firms_.size() || !in_box(z)) return false;
    const double x = z[static_cast<Eigen::Index>(firm)];
    return x > firms_[firm].lower && x < firms_[firm].upper;
}

NetworkModel evaluate_model(const ParametricModel& pm, const Vector& z) {
    if (z.size() != static_cast<Eigen::Index>(pm.num_firms()))
        throw DomainError(fmt::format("expected {} discounts, got {}", pm.num_firms(), z.size()));
    if (!pm.in_box(z)) throw DomainError("discount vector lies outside the feasible box");
    std::vector<Matrix> dq, dp;
    for (std::size_t f = 0; f < pm.num_firms(); ++f) {
        dq.push_back(pm.direct_slope(f));
        dp.push_back(pm.adoption_slope(f));
    }
    auto [q, p] = affine_entries(pm.base(), dq, dp, z);
    auto model = build(pm.base(), std::move(q), std::move(p));
    require_decisive(model);
    return model;
}

double parametric_share(const ParametricModel& pm, const Vector& z, std::size_t choice, const Vector& endowment) {
    const auto model = evaluate_model(pm, z);
    if (choice >= model.num_choices()) throw DomainError("choice index out of range");
    return choice_shares(model, endowment)[static_cast<Eigen::Index>(choice)];
}

ShareSensitivity share_sensitivities(const ParametricModel& pm, const Vector& z, std::size_t firm,
                                     const Vector& endowment) {
    if (firm >= pm.num_firms()) throw DomainError("firm index out of range");
    return share_sensitivities(pm, z, firm, endowment, pm.firms()[firm].choice);
}

ShareSensitivity share_sensitivities(const ParametricModel& pm, const Vector& z, std::size_t firm,
                                     const Vector& endowment, std::size_t choice) {
    if (firm >= pm.num_firms()) throw DomainError("firm index out of range");
    if (choice >= pm.base().num_choices()) throw DomainError("choice index out of range");
    if (!pm.interior(z, firm))
        throw DomainError("sensitivities need a discount strictly inside the firm's bounds");
    check_endowment(pm.base(), endowment);
    NetworkModel model = pm.base();
    const auto system = system_at(pm, z, model);
    const auto j = static_cast<Eigen::Index>(choice);
    const Matrix& dp = pm.adoption_slope(firm);
    const Vector pi = system.solve(model.direct().col(j));
    // G_k = dq_kj + sum_s dp_ks pi_sj
    const Vector g = pm.direct_slope(firm).col(j) + dp * pi;
    ShareSensitivity out;
    out.first = system.solve(g);
    // affine entries have no second derivatives, so H_k = sum_s dp_ks d pi_sj
    const Vector h = dp * out.first;
    const Vector dtheta_g = system.solve(dp * system.solve(g)); // (theta dP theta) G
    out.second = dtheta_g + system.solve(h);
    out.share_first = endowment.dot(out.first);
    out.share_second = endowment.dot(out.second);
    return out;
}

Matrix theta_derivative(const ParametricModel& pm, const Vector& z, std::size_t firm) {
    if (firm >= pm.num_firms()) throw DomainError("firm index out of range");
    NetworkModel model = pm.base();
    const auto system = system_at(pm, z, model);
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const Matrix theta = system.solve(Matrix::Identity(n, n));
    return theta * pm.adoption_slope(firm) * theta;
}

// --- single-agent affine variation ---------------------------------------------------------

void check_variation(const NetworkModel& base, const SingleAgentVariation& var) {
    const auto n = base.num_agents();
    const auto m = base.num_choices();
    if (var.agent >= n) throw DomainError("varied agent out of range");
    if (var.choice >= m) throw DomainError("varied choice out of range");
    if (var.v.size() != static_cast<Eigen::Index>(n)) throw DomainError("v needs one entry per agent");
    if (var.beta.size() != static_cast<Eigen::Index>(m)) throw DomainError("beta needs one entry per choice");
    if (!var.v.allFinite() || !var.beta.allFinite() || var.v.minCoeff() < 0.0 || var.beta.minCoeff() < 0.0)
        throw DomainError("v and beta must be finite and non-negative");
    if (var.v[static_cast<Eigen::Index>(var.agent)] != 0.0) throw DomainError("v must vanish at the varied agent");
    if (var.beta[static_cast<Eigen::Index>(var.choice)] != 0.0)
        throw DomainError("beta must vanish at the varied choice");
    if (std::abs(var.v.sum() + var.beta.sum() - 1.0) > 1e-9)
        throw DomainError("v and beta must sum to one so that the agent's row stays a distribution");
}

std::pair<double, double> validity_interval(const NetworkModel& base, const SingleAgentVariation& var) {
    check_variation(base, var);
    const auto r = static_cast<Eigen::Index>(var.agent);
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    // entry e + u s must stay in [0, 1]
    auto bound = [&](double e, double s) {
        if (s > 0.0) {
            lo = std::max(lo, -e / s);
            hi = std::min(hi, (1.0 - e) / s);
        } else if (s < 0.0) {
            lo = std::max(lo, (1.0 - e) / s);
            hi = std::min(hi, -e / s);
        }
    };
    const auto& q = base.direct();
    for (Eigen::Index l = 0; l < q.cols(); ++l)
        bound(q(r, l), l == static_cast<Eigen::Index>(var.choice) ? 1.0 : -var.beta[l]);
    for (Eigen::Index k = 0; k < var.v.size(); ++k) bound(base.adoption().coeff(r, k), -var.v[k]);
    return {lo, hi};
}

double affine_single_agent_share(const NetworkModel& base, const SingleAgentVariation& var, double u,
                                 const Vector& endowment) {
    const auto [lo, hi] = validity_interval(base, var);
    if (!(u >= lo - box_tolerance && u <= hi + box_tolerance))
        throw DomainError(fmt::format("u = {} lies outside the validity interval [{}, {}]", u, lo, hi));
    check_endowment(base, endowment);
    const ChoiceSystem system(base);
    const auto r = static_cast<Eigen::Index>(var.agent);
    const Vector pi = system.solve(base.direct().col(static_cast<Eigen::Index>(var.choice)));
    const Vector c = system.solve_transpose(endowment);
    const Vector column_r = system.solve(Vector::Unit(pi.size(), r)); // theta_{. r}
    const double denominator = 1.0 + u * var.v.dot(column_r);
    if (!(denominator > 0.0)) throw DomainError("varied model is not collectively decisive at this u");
    return endowment.dot(pi) + u * c[r] * (1.0 - var.v.dot(pi)) / denominator;
}

ParametricModel to_parametric(const NetworkModel& base, const SingleAgentVariation& var, double margin, double lower,
                              double upper) {
    check_variation(base, var);
    Firm firm;
    firm.choice = var.choice;
    firm.margin = margin;
    firm.lower = lower;
    firm.upper = upper;
    firm.direct.push_back({var.agent, var.choice, 1.0});
    for (Eigen::Index l = 0; l < var.beta.size(); ++l)
        if (var.beta[l] > 0.0) firm.direct.push_back({var.agent, static_cast<std::size_t>(l), -var.beta[l]});
    for (Eigen::Index k = 0; k < var.v.size(); ++k)
        if (var.v[k] > 0.0) firm.adoption.push_back({var.agent, static_cast<std::size_t>(k), -var.v[k]});
    return {base, {std::move(firm)}};
}

// --- competition ---------------------------------------------------------------------------

double Profit::value() const {
    if (!defined_) throw DomainError("profit is undefined at this discount vector");
    return value_;
}

Profit profit(const ParametricModel& pm, std::size_t firm, const Vector& z, const Vector& endowment) {
    if (firm >= pm.num_firms()) throw DomainError("firm index out of range");
    if (!pm.in_box(z)) return Profit::undefined();
    try {
        const auto& f = pm.firms()[firm];
        return Profit((f.margin - z[static_cast<Eigen::Index>(firm)]) * parametric_share(pm, z, f.choice, endowment));
    } catch (const AssumptionError&) {
        return Profit::undefined();
    } catch (const ModelError&) {
        return Profit::undefined();
    }
}

double best_response(const ParametricModel& pm, std::size_t firm, const Vector& z, const Vector& endowment,
                     double tol) {
    if (firm >= pm.num_firms()) throw DomainError("firm index out of range");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    check_endowment(pm.base(), endowment);
    const auto& f = pm.firms()[firm];
    Vector point = z;
    const auto e = static_cast<Eigen::Index>(firm);
    auto value = [&](double x) {
        point[e] = x;
        return profit(pm, firm, point, endowment);
    };
    double a = f.lower;
    double b = f.upper;
    double x1 = b - golden * (b - a);
    double x2 = a + golden * (b - a);
    Profit v1 = value(x1);
    Profit v2 = value(x2);
    while (b - a > tol) {
        if (v1 < v2) {
            a = x1;
            x1 = x2;
            v1 = v2;
            x2 = a + golden * (b - a);
            v2 = value(x2);
        } else {
            b = x2;
            x2 = x1;
            v2 = v1;
            x1 = b - golden * (b - a);
            v1 = value(x1);
        }
    }
    double best = f.lower;
    Profit best_value = value(best);
    for (double x : {(a + b) / 2.0, f.upper}) {
        const Profit v = value(x);
        if (best_value < v) {
            best = x;
            best_value = v;
        }
    }
    return best;
}

EquilibriumResult find_equilibrium(const ParametricModel& pm, const Vector& endowment, double damping, double tol,
                                   std::size_t max_rounds) {
    if (pm.num_firms() < 2) throw DomainError("an equilibrium search needs at least two firms");
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    check_endowment(pm.base(), endowment);
    const double br_tol = std::max(tol * 1e-3, 1e-13);
    EquilibriumResult out;
    out.z = pm.clamped_origin();
    out.residual = std::numeric_limits<double>::infinity();
    for (std::size_t round = 0; round < max_rounds; ++round) {
        for (std::size_t f = 0; f < pm.num_firms(); ++f) {
            const auto e = static_cast<Eigen::Index>(f);
            out.z[e] = (1.0 - damping) * out.z[e] + damping * best_response(pm, f, out.z, endowment, br_tol);
        }
        out.trace.push_back(out.z);
        out.rounds = round + 1;
        out.residual = 0.0;
        for (std::size_t f = 0; f < pm.num_firms(); ++f) {
            const auto e = static_cast<Eigen::Index>(f);
            out.residual = std::max(out.residual, std::abs(out.z[e] - best_response(pm, f, out.z, endowment, br_tol)));
        }
        if (out.residual < tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

// --- document ------------------------------------------------------------------------------

ParametricModel parse_parametric_model(std::string_view document) {
    using detail::as_number;
    using detail::as_string;
    using detail::require_key;
    auto base = parse_model(document);
    const auto root = detail::parse_json(document);
    const auto& block = require_key(root, "pricing", "model");
    detail::require_object(block, "pricing");
    detail::reject_unknown_keys(block, {"firms"}, "pricing");
    const auto& list = require_key(block, "firms", "pricing");
    if (!list.is_array()) throw ParseError("pricing.firms: expected an array");

    auto agent = [&](const detail::json& node, std::string_view key, std::string_view where) {
        try {
            return base.agent_index(as_string(require_key(node, key, where), where));
        } catch (const DomainError& e) {
            throw ParseError(fmt::format("{}: {}", where, e.what()));
        }
    };
    auto choice = [&](const detail::json& node, std::string_view key, std::string_view where) {
        try {
            return base.choice_index(as_string(require_key(node, key, where), where));
        } catch (const DomainError& e) {
            throw ParseError(fmt::format("{}: {}", where, e.what()));
        }
    };

    std::vector<Firm> firms;
    for (std::size_t f = 0; f < list.size(); ++f) {
        const auto where = fmt::format("pricing.firms[{}]", f);
        const auto& node = list[f];
        detail::require_object(node, where);
        detail::reject_unknown_keys(node, {"choice", "margin", "bounds", "direct", "adoption"}, where);
        Firm firm;
        firm.choice = choice(node, "choice", where);
        firm.margin = as_number(require_key(node, "margin", where), where + ".margin");
        const auto& bounds = require_key(node, "bounds", where);
        if (!bounds.is_array() || bounds.size() != 2) throw ParseError(where + ".bounds: expected [lower, upper]");
        firm.lower = as_number(bounds[0], where + ".bounds");
        firm.upper = as_number(bounds[1], where + ".bounds");
        if (auto it = node.find("direct"); it != node.end()) {
            if (!it->is_array()) throw ParseError(where + ".direct: expected an array");
            for (const auto& s : *it) {
                const auto w = where + ".direct";
                detail::require_object(s, w);
                detail::reject_unknown_keys(s, {"agent", "choice", "dq"}, w);
                firm.direct.push_back({agent(s, "agent", w), choice(s, "choice", w), as_number(require_key(s, "dq", w), w)});
            }
        }
        if (auto it = node.find("adoption"); it != node.end()) {
            if (!it->is_array()) throw ParseError(where + ".adoption: expected an array");
            for (const auto& s : *it) {
                const auto w = where + ".adoption";
                detail::require_object(s, w);
                detail::reject_unknown_keys(s, {"from", "to", "dp"}, w);
                firm.adoption.push_back({agent(s, "from", w), agent(s, "to", w), as_number(require_key(s, "dp", w), w)});
            }
        }
        firms.push_back(std::move(firm));
    }
    return {std::move(base), std::move(firms)};
}

ParametricModel load_parametric_model(const std::filesystem::path& path) {
    return parse_parametric_model(read_text_file(path));
}

} // namespace netchoice
