#include <doctest.h>

#include <fstream>

#include <Eigen/LU>
#include <random>
#include <sstream>

#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"
#include "netchoice/estimate.hpp"
#include "netchoice/families.hpp"
#include "netchoice/lp_format.hpp"
#include "netchoice/simplex.hpp"
#include "oracles.hpp"

using namespace netchoice;

namespace {

Matrix example_pi() { return solve_choice_matrix(families::influential_agent()).pi; }

double row_value(const Constraint& c, const Vector& x) {
    double v = 0.0;
    for (const auto& t : c.terms) v += t.coef * x[static_cast<Eigen::Index>(t.var)];
    return v;
}

bool satisfies(const LinearProgram& lp, const Vector& x, double tol = 1e-9) {
    for (std::size_t v = 0; v < lp.variables.size(); ++v) {
        const double xv = x[static_cast<Eigen::Index>(v)];
        if (xv < lp.variables[v].lower - tol || xv > lp.variables[v].upper + tol) return false;
    }
    for (const auto& c : lp.constraints) {
        const double v = row_value(c, x);
        if (c.sense == Sense::le && v > c.rhs + tol) return false;
        if (c.sense == Sense::ge && v < c.rhs - tol) return false;
        if (c.sense == Sense::eq && std::abs(v - c.rhs) > tol) return false;
    }
    return true;
}

// Example probabilities with agent 2 unable to adopt and forced to split evenly between A and B.
std::vector<KnowledgeItem> inconsistent_knowledge() {
    return {Sparsity{1, 0}, Sparsity{1, 2}, PreferenceRatio{1, 0, 1, 1.0, 0.0}};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("simplex basics") {
    LinearProgram lp;
    const auto x = lp.add_variable("x", 0.0, 1.0);
    lp.add_constraint("cap", {{x, 1.0}}, Sense::le, 0.5);
    lp.sense = ObjectiveSense::maximize;
    lp.objective = {{x, 1.0}};
    const auto r = simplex_solve(lp);
    CHECK(r.status == LpStatus::optimal);
    CHECK(r.value == doctest::Approx(0.5));
    CHECK(r.x[0] == doctest::Approx(0.5));
    CHECK(r.duals[0] == doctest::Approx(1.0));

    LinearProgram bad;
    const auto y = bad.add_variable("y", 0.0, 1.0);
    bad.add_constraint("lo", {{y, 1.0}}, Sense::ge, 0.6);
    bad.add_constraint("hi", {{y, 1.0}}, Sense::le, 0.4);
    CHECK(simplex_solve(bad).status == LpStatus::infeasible);
    CHECK(std::string(to_string(LpStatus::infeasible)) == "infeasible");
}

TEST_CASE("shadow prices") {
    // max x + y s.t. x + 2y <= 1.5 on the unit box: x = 1, y = 1/4 and the row is worth 1/2 per unit
    LinearProgram lp;
    const auto x = lp.add_variable("x", 0.0, 1.0);
    const auto y = lp.add_variable("y", 0.0, 1.0);
    lp.add_constraint("r", {{x, 1.0}, {y, 2.0}}, Sense::le, 1.5);
    lp.sense = ObjectiveSense::maximize;
    lp.objective = {{x, 1.0}, {y, 1.0}};
    auto r = simplex_solve(lp);
    CHECK(r.value == doctest::Approx(1.25));
    CHECK(r.duals[0] == doctest::Approx(0.5));

    lp.sense = ObjectiveSense::minimize;
    lp.objective = {{x, -1.0}, {y, -1.0}};
    r = simplex_solve(lp);
    CHECK(r.value == doctest::Approx(-1.25));
    CHECK(r.duals[0] == doctest::Approx(-0.5));

    // min x s.t. x >= 0.3: raising the bound raises the optimum one for one
    LinearProgram g;
    const auto z = g.add_variable("z", -1.0, 1.0);
    g.add_constraint("floor", {{z, 1.0}}, Sense::ge, 0.3);
    g.objective = {{z, 1.0}};
    r = simplex_solve(g);
    CHECK(r.value == doctest::Approx(0.3));
    CHECK(r.duals[0] == doctest::Approx(1.0));
}

TEST_CASE("simplex limits and errors") {
    LinearProgram lp;
    const auto a = lp.add_variable("a", 0.0, 1.0);
    const auto b = lp.add_variable("b", 0.0, 1.0);
    lp.add_constraint("s", {{a, 1.0}, {b, 1.0}}, Sense::eq, 1.5);
    lp.objective = {{a, 1.0}};
    SimplexOptions tight;
    tight.max_pivots = 0;
    CHECK(simplex_solve(lp, tight).status == LpStatus::iteration_limit);
    CHECK(simplex_solve(lp).value == doctest::Approx(0.5));

    LinearProgram inf;
    inf.add_variable("u", 0.0, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS((void)simplex_solve(inf), DomainError);
    LinearProgram oob;
    oob.add_variable("u", 0.0, 1.0);
    oob.add_constraint("r", {{3, 1.0}}, Sense::le, 1.0);
    CHECK_THROWS_AS((void)simplex_solve(oob), DomainError);
}

TEST_CASE("simplex agrees with vertex enumeration") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 2);
    int feasible = 0;
    for (int trial = 0; trial < 60; ++trial) {
        LinearProgram lp;
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        for (std::size_t v = 0; v < n; ++v) lp.add_variable("x" + std::to_string(v), coef(rng) - 1.0, coef(rng) + 1.0);
        const std::size_t rows = 1 + static_cast<std::size_t>(trial % 4);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<Term> terms;
            for (std::size_t v = 0; v < n; ++v) terms.push_back({v, coef(rng)});
            const int s = pick(rng);
            lp.add_constraint("r" + std::to_string(r), terms, s == 0 ? Sense::le : (s == 1 ? Sense::ge : Sense::eq),
                              0.5 * coef(rng));
        }
        for (std::size_t v = 0; v < n; ++v) lp.objective.push_back({v, coef(rng)});
        lp.sense = trial % 2 ? ObjectiveSense::maximize : ObjectiveSense::minimize;
        const auto oracle = test::vertex_enumeration_optimum(lp);
        const auto r = simplex_solve(lp);
        if (!oracle) {
            CHECK(r.status == LpStatus::infeasible);
            continue;
        }
        ++feasible;
        REQUIRE(r.status == LpStatus::optimal);
        CHECK(r.value == doctest::Approx(*oracle).epsilon(1e-8).scale(1.0));
        CHECK(satisfies(lp, r.x));
    }
    CHECK(feasible > 20);
}

TEST_CASE("polyhedron structure") {
    const Matrix pi = example_pi();
    const auto empty = build_polyhedron(pi, {});
    CHECK(empty.program.variables.size() == 3 * 2 + 3 * 2 * 3);
    CHECK(empty.num_parameter_vars() == 12);
    CHECK(empty.program.constraints.size() == 3 * 2 + 3);
    CHECK(empty.program.variables[empty.p_var(0, 1)].name == "p_0_1");
    CHECK(empty.program.variables[empty.q_var(2, 1)].name == "q_2_1");

    Vector trivial = Vector::Zero(static_cast<Eigen::Index>(empty.program.variables.size()));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            trivial[static_cast<Eigen::Index>(empty.q_var(i, j))] = pi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    CHECK(satisfies(empty.program, trivial, 1e-12));

    const auto pinned = build_polyhedron(pi, {Sparsity{0, 1}});
    CHECK(pinned.program.constraints.size() == empty.program.constraints.size() + 1);
    CHECK(pinned.tags.back() == RowTag::sparsity);

    const auto ratio = build_polyhedron(pi, {PreferenceRatio{0, 0, 1, 2.0, 0.0}});
    REQUIRE(ratio.program.constraints.size() == empty.program.constraints.size() + 1);
    CHECK(ratio.program.constraints.back().sense == Sense::eq);
    CHECK(ratio.tags.back() == RowTag::preference_ratio);
    const auto band = build_polyhedron(pi, {PreferenceRatio{0, 0, 1, 2.0, 0.5}});
    CHECK(band.program.constraints.size() == empty.program.constraints.size() + 2);

    const auto both = build_polyhedron(pi, {GroupImportance{0, {1}, {2}, 2.0}, RelianceBound{1, 1.0}});
    CHECK(both.tags[both.tags.size() - 2] == RowTag::group_importance);
    CHECK(both.tags.back() == RowTag::decisiveness);
    CHECK(std::string(to_string(RowTag::fit)) == "fit");
}

TEST_CASE("polyhedron input errors") {
    Matrix bad(1, 2);
    bad << 0.5, 0.6;
    CHECK_THROWS_AS((void)build_polyhedron(bad, {}), DomainError);
    const Matrix pi = example_pi();
    CHECK_THROWS_AS((void)build_polyhedron(pi, {Sparsity{0, 0}}), DomainError);
    CHECK_THROWS_AS((void)build_polyhedron(pi, {Sparsity{0, 5}}), DomainError);
    CHECK_THROWS_AS((void)build_polyhedron(pi, {PreferenceRatio{0, 1, 1, 1.0, 0.0}}), DomainError);
    CHECK_THROWS_AS((void)build_polyhedron(pi, {GroupImportance{0, {1}, {1}, 1.0}}), DomainError);
    CHECK_THROWS_AS((void)build_polyhedron(pi, {PreferenceRatio{0, 0, 1, 1.0, -0.1}}), DomainError);
}

TEST_CASE("phase one") {
    const Matrix pi = example_pi();
    CHECK(phase1_min_slack(build_polyhedron(pi, {})).objective < 1e-12);
    // consistent with the generating model: agent 1 weighs A twice as much as B
    const auto consistent = phase1_min_slack(build_polyhedron(pi, {PreferenceRatio{0, 0, 1, 2.0, 0.0}}));
    CHECK(consistent.objective < 1e-12);

    const auto slack = phase1_min_slack(build_polyhedron(pi, inconsistent_knowledge()));
    CHECK(slack.objective == doctest::Approx(0.25).epsilon(1e-9));
    // only the net slack is determined; the split may carry any mass within t * pi
    const Matrix net = slack.eps_plus - slack.eps_minus;
    CHECK(net(1, 0) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(net(1, 1) == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(((slack.eps_plus + slack.eps_minus).array() <= slack.objective * pi.array() + 1e-12).all());

    // knowledge rows contradicting each other admit no slack at all
    const std::vector<KnowledgeItem> contradiction{RelianceBound{0, 2.0, RelianceBound::Relation::at_least},
                                                   Sparsity{0, 1}, Sparsity{0, 2}};
    CHECK_THROWS_AS((void)phase1_min_slack(build_polyhedron(pi, contradiction)), ComputationError);
}

TEST_CASE("grid scan confirms the inconsistent instance needs slack") {
    // With both of agent 2's adoption entries pinned, its row reduces to q_2A = q_2B, q_2A + q_2B = 1.
    const Matrix pi = example_pi();
    double best = 1e300;
    for (int k = 0; k <= 1000; ++k) {
        const double qa = k / 1000.0;
        const double qb = 1.0 - qa;
        if (std::abs(qa - qb) > 1e-12) continue;
        const double t = std::max(std::abs(qa - pi(1, 0)) / pi(1, 0), std::abs(qb - pi(1, 1)) / pi(1, 1));
        best = std::min(best, t);
    }
    CHECK(best == doctest::Approx(0.25));
}

TEST_CASE("interior estimate of an unconstrained instance") {
    const Matrix pi = example_pi();
    const auto poly = build_polyhedron(pi, {});
    const auto slack = phase1_min_slack(poly);
    const auto est = interior_point_estimate(poly, slack);
    CHECK(est.margin > 1e-3);
    CHECK(est.converted.empty());
    CHECK(satisfies(poly.program, est.point));
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index k = 0; k < 3; ++k)
            if (i != k) CHECK(est.p(i, k) >= est.margin - 1e-9);
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(est.q(i, j) >= est.margin - 1e-9);
    }
    const auto model = estimate_to_model(est, {"1", "2", "3"}, {"A", "B"});
    CHECK((solve_choice_matrix(model).pi - pi).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("interior estimate reproduces observations within the fixed slacks") {
    const Matrix pi = example_pi();
    const auto poly = build_polyhedron(pi, inconsistent_knowledge());
    const auto slack = phase1_min_slack(poly);
    const auto est = interior_point_estimate(poly, slack);
    CHECK(est.p(1, 0) == 0.0);
    CHECK(est.p(1, 2) == 0.0);
    // fit rows read Pi + eps = Q + P Pi, so the refit choice matrix is Pi + (I - P)^{-1} eps
    const Matrix target = pi + (Matrix::Identity(3, 3) - est.p).inverse() * (slack.eps_plus - slack.eps_minus);
    const auto model = estimate_to_model(est, {"1", "2", "3"}, {"A", "B"});
    CHECK((solve_choice_matrix(model).pi - target).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((pi + slack.eps_plus - slack.eps_minus - est.q - est.p * pi).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::find(est.converted.begin(), est.converted.end(), "nonneg_p_1_0") == est.converted.end());
}

TEST_CASE("implicit equalities are converted") {
    // p_0_1 >= p_0_2 and p_0_2 >= p_0_1 leave no room between the two planes
    const Matrix pi = example_pi();
    const std::vector<KnowledgeItem> items{GroupImportance{0, {1}, {2}, 1.0}, GroupImportance{0, {2}, {1}, 1.0}};
    const auto poly = build_polyhedron(pi, items);
    const auto slack = phase1_min_slack(poly);
    CHECK(slack.objective < 1e-12);
    const auto est = interior_point_estimate(poly, slack);
    CHECK(est.rounds >= 2);
    CHECK_FALSE(est.converted.empty());
    for (const auto& name : est.converted) CHECK(name.rfind("group_", 0) == 0);
    CHECK(est.margin > 1e-3);
    CHECK(est.p(0, 1) == doctest::Approx(est.p(0, 2)).epsilon(1e-9));
}

TEST_CASE("a single-point polyhedron") {
    Matrix pi(1, 2);
    pi << 1.0, 0.0;
    const auto poly = build_polyhedron(pi, {});
    const auto est = interior_point_estimate(poly, phase1_min_slack(poly));
    CHECK(est.q(0, 0) == doctest::Approx(1.0));
    CHECK(est.q(0, 1) == doctest::Approx(0.0));
    CHECK(est.margin == 0.0);
}

TEST_CASE("lp export") {
    const auto trivial = build_polyhedron(Matrix::Ones(1, 1), {});
    const auto text = write_lp(estimation_program(trivial, ExportPhase::feasibility));
    CHECK(text == read_file(NETCHOICE_TEST_DATA "/trivial_feasibility.lp"));

    const auto poly = build_polyhedron(example_pi(), inconsistent_knowledge());
    for (auto phase : {ExportPhase::feasibility, ExportPhase::phase1}) {
        const auto lp = estimation_program(poly, phase);
        const auto out = write_lp(lp);
        CHECK(test::count_lp_rows(out) == lp.constraints.size());
        CHECK(out == write_lp(estimation_program(build_polyhedron(example_pi(), inconsistent_knowledge()), phase)));
        std::istringstream lines(out);
        for (std::string line; std::getline(lines, line);) CHECK(line.size() <= 78);
    }
    const auto slack = phase1_min_slack(poly);
    const auto interior = estimation_program(poly, ExportPhase::interior, &slack);
    CHECK(test::count_lp_rows(write_lp(interior)) == interior.constraints.size());
    CHECK_THROWS_AS((void)estimation_program(poly, ExportPhase::interior), DomainError);
}

TEST_CASE("documents") {
    const std::vector<std::string> agents{"1", "2", "3"};
    const std::vector<std::string> choices{"A", "B"};
    const auto items = parse_knowledge(R"([
        {"type": "group_importance", "agent": "1", "S1": ["2"], "S2": ["3"], "K": 1.5},
        {"type": "preference_ratio", "agent": "2", "preferred": "B", "other": "A", "K": 1.5, "delta": 0.1},
        {"type": "decisiveness", "agent": "3", "K": 0.5, "relation": "<="},
        {"type": "sparsity", "agent": "2", "other": "3"}
    ])",
                                       agents, choices);
    REQUIRE(items.size() == 4);
    CHECK(std::get<GroupImportance>(items[0]).s2 == std::vector<std::size_t>{2});
    CHECK(std::get<PreferenceRatio>(items[1]).delta == 0.1);
    CHECK(std::get<RelianceBound>(items[2]).relation == RelianceBound::Relation::at_most);
    CHECK(std::get<Sparsity>(items[3]).other == 2);
    CHECK_THROWS_AS((void)parse_knowledge(R"([{"type": "hunch", "agent": "1"}])", agents, choices), ParseError);
    CHECK_THROWS_AS((void)parse_knowledge(R"([{"type": "sparsity", "agent": "1", "other": "9"}])", agents, choices),
                    ParseError);
    CHECK_THROWS_AS((void)parse_knowledge(R"({})", agents, choices), ParseError);

    const auto obs = parse_observed(R"({"agents": ["x", "y"], "choices": ["A"], "pi": [[1.0], [1.0]]})");
    CHECK(obs.pi.rows() == 2);
    CHECK_THROWS_AS((void)parse_observed(R"({"agents": ["x"], "choices": ["A"], "pi": [[1.0], [1.0]]})"), ParseError);
}
