#include <doctest.h>

#include <random>

#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"
#include "netchoice/families.hpp"
#include "netchoice/pricing.hpp"
#include "oracles.hpp"
#include "pricing_fixtures.hpp"

using namespace netchoice;

namespace {

ParametricModel example_firm(double lower = 0.0, double upper = 2.5) {
    Firm firm;
    firm.choice = 0;
    firm.margin = 3.0;
    firm.lower = lower;
    firm.upper = upper;
    firm.direct = {{1, 0, 0.1}, {1, 1, -0.1}};
    return ParametricModel(families::influential_agent(), {firm});
}

Vector z1(double v) { return Vector::Constant(1, v); }

SingleAgentVariation rank_one_variation(const NetworkModel& base, std::size_t r, std::size_t j) {
    const auto n = static_cast<Eigen::Index>(base.num_agents());
    const auto m = static_cast<Eigen::Index>(base.num_choices());
    SingleAgentVariation var{r, j, Vector::Zero(n), Vector::Zero(m)};
    const Matrix p = base.adoption_dense();
    const auto row = static_cast<Eigen::Index>(r);
    var.v = p.row(row).transpose();
    var.beta = base.direct().row(row).transpose();
    var.beta[static_cast<Eigen::Index>(j)] = 0.0;
    const double total = var.v.sum() + var.beta.sum();
    var.v /= total;
    var.beta /= total;
    return var;
}

} // namespace

TEST_CASE("parametric model evaluation") {
    const auto pm = example_firm();
    CHECK(serialize_model(evaluate_model(pm, z1(0.0))) == serialize_model(pm.base()));
    const auto at1 = evaluate_model(pm, z1(1.0));
    CHECK(at1.direct()(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(at1.direct()(1, 1) == doctest::Approx(0.15).epsilon(1e-15));
    for (double corner : {0.0, 2.5}) {
        const auto m = evaluate_model(pm, z1(corner));
        CHECK(m.direct().minCoeff() >= 0.0);
        CHECK(m.direct().maxCoeff() <= 1.0);
    }
    CHECK_THROWS_AS((void)evaluate_model(pm, z1(2.6)), DomainError);
    CHECK_THROWS_AS((void)evaluate_model(pm, Vector::Zero(2)), DomainError);
    CHECK(pm.in_box(z1(2.5)));
    CHECK_FALSE(pm.interior(z1(2.5), 0));
    CHECK(pm.interior(z1(1.0), 0));
    CHECK(pm.clamped_origin() == z1(0.0));
}

TEST_CASE("shape and box violations are rejected") {
    Firm bad_sign{0, 3.0, 0.0, 1.0, {{1, 0, -0.1}, {1, 1, 0.1}}, {}};
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {bad_sign}), ModelError);
    Firm unbalanced{0, 3.0, 0.0, 1.0, {{1, 0, 0.1}}, {}};
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {unbalanced}), ModelError);
    Firm rising_adoption{0, 3.0, 0.0, 1.0, {{1, 0, -0.1}}, {{1, 0, 0.1}}};
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {rising_adoption}), ModelError);
    CHECK_THROWS_AS(example_firm(0.0, 2.6), ModelError);
    CHECK_THROWS_AS(example_firm(1.0, 0.5), ModelError);
    Firm over_margin{0, 0.5, 0.0, 1.0, {}, {}};
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {over_margin}), ModelError);
    Firm a{0, 1.0, 0.0, 0.5, {}, {}};
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {a, a}), ModelError);
    CHECK_THROWS_AS(ParametricModel(families::influential_agent(), {}), ModelError);
}

TEST_CASE("boxes that break decisiveness are rejected") {
    // At the lower corner both agents lose all direct mass and only point at each other.
    Matrix p(2, 2);
    p << 0, 0.5, 0.5, 0;
    Matrix q(2, 2);
    q << 0.5, 0.0, 0.5, 0.0;
    const auto base = NetworkModel::from_dense({"a", "b"}, {"A", "B"}, p, q, Vector::Ones(2));
    Firm firm{0, 1.0, -1.0, 0.0, {{0, 0, 0.5}, {1, 0, 0.5}}, {{0, 1, -0.5}, {1, 0, -0.5}}};
    CHECK_THROWS_WITH_AS(ParametricModel(base, {firm}), doctest::Contains("decisiveness"), ModelError);
    firm.lower = -0.5;
    CHECK_NOTHROW(ParametricModel(base, {firm}));
}

TEST_CASE("zero sensitivities give zero derivatives") {
    Firm flat{0, 2.0, 0.0, 1.0, {}, {}};
    const ParametricModel pm(families::influential_agent(), {flat});
    const auto s = share_sensitivities(pm, z1(0.5), 0, Vector::Ones(3));
    CHECK(s.share_first == 0.0);
    CHECK(s.share_second == 0.0);
    CHECK(s.first.isZero());
    CHECK(best_response(pm, 0, z1(0.5), Vector::Ones(3)) == 0.0);
    CHECK_THROWS_AS((void)share_sensitivities(pm, z1(1.0), 0, Vector::Ones(3)), DomainError);
}

TEST_CASE("pure preference shifts are linear") {
    const auto base = families::influential_agent();
    SingleAgentVariation var{1, 0, Vector::Zero(3), Vector::Unit(2, 1)};
    const auto [lo, hi] = validity_interval(base, var);
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(0.25));
    const auto pm = to_parametric(base, var, 1.0, 0.0, 0.25);
    const Vector w = Vector::Constant(3, 1.0 / 3.0);
    const Matrix theta = (Matrix::Identity(3, 3) - base.adoption_dense()).inverse();
    const double expected = (w.transpose() * theta).eval()[1];
    for (double u : {0.05, 0.1, 0.2}) {
        const auto s = share_sensitivities(pm, z1(u), 0, w);
        CHECK(s.share_first == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(s.share_second) < 1e-13);
        CHECK(affine_single_agent_share(base, var, u, w) ==
              doctest::Approx(7.0 / 15.0 + u * expected).epsilon(1e-13));
    }
}

TEST_CASE("analytic derivatives match finite differences") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pm = test::random_parametric(rng, 3 + static_cast<std::size_t>(trial), 3, 2);
        const Vector& w = pm.base().endowment();
        std::uniform_real_distribution<double> inner(0.1, 0.9);
        Vector z(2);
        z << inner(rng), inner(rng);
        for (std::size_t f = 0; f < 2; ++f) {
            const auto s = share_sensitivities(pm, z, f, w);
            auto share = [&](double x) {
                Vector y = z;
                y[static_cast<Eigen::Index>(f)] = x;
                return parametric_share(pm, y, f, w);
            };
            const double x0 = z[static_cast<Eigen::Index>(f)];
            CHECK(test::relative_error(s.share_first, test::richardson_first(share, x0, 1e-2), 1e-6) < 1e-6);
            CHECK(test::relative_error(s.share_second, test::richardson_second(share, x0, 1e-2), 1e-6) < 1e-6);

            const Matrix d_theta = theta_derivative(pm, z, f);
            auto theta_at = [&](double x) {
                Vector y = z;
                y[static_cast<Eigen::Index>(f)] = x;
                const auto m = evaluate_model(pm, y);
                const auto n = static_cast<Eigen::Index>(m.num_agents());
                return Matrix((Matrix::Identity(n, n) - m.adoption_dense()).inverse());
            };
            const Matrix fd = (theta_at(x0 + 1e-5) - theta_at(x0 - 1e-5)) / 2e-5;
            CHECK((fd - d_theta).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, d_theta.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("single-agent closed form matches the generic path") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        families::RandomModelOptions opt;
        opt.agents = 2 + static_cast<std::size_t>(trial % 7);
        opt.choices = 2 + static_cast<std::size_t>(trial % 3);
        opt.indecisive_fraction = 0.0;
        const auto base = families::random_model(rng, opt);
        const auto var = rank_one_variation(base, static_cast<std::size_t>(trial) % opt.agents, 0);
        const auto [lo, hi] = validity_interval(base, var);
        CHECK(lo < 0.0 + 1e-15);
        CHECK(hi > 0.0);
        const auto pm = to_parametric(base, var, 2.0, std::max(lo, -1.0), std::min(hi * 0.99, 1.0));
        const Vector& w = base.endowment();
        CHECK(affine_single_agent_share(base, var, 0.0, w) == doctest::Approx(choice_shares(base, w)[0]).epsilon(1e-13));
        for (double t : {0.1, 0.5, 0.9}) {
            const double u = pm.firms()[0].lower + t * (pm.firms()[0].upper - pm.firms()[0].lower);
            CHECK(std::abs(affine_single_agent_share(base, var, u, w) - parametric_share(pm, z1(u), 0, w)) < 1e-10);
        }
        CHECK_THROWS_AS((void)affine_single_agent_share(base, var, hi + 1.0, w), DomainError);
    }
}

TEST_CASE("variation structure is checked") {
    const auto base = families::influential_agent();
    CHECK_THROWS_AS(check_variation(base, {0, 0, Vector::Zero(3), Vector::Zero(2)}), DomainError);
    CHECK_THROWS_AS(check_variation(base, {0, 0, Vector::Unit(3, 0), Vector::Zero(2)}), DomainError);
    CHECK_THROWS_AS(check_variation(base, {0, 0, Vector::Zero(3), Vector::Unit(2, 0)}), DomainError);
    CHECK_NOTHROW(check_variation(base, {0, 0, Vector::Unit(3, 1), Vector::Zero(2)}));
}

TEST_CASE("profit values and the sentinel") {
    const auto pm = example_firm();
    const Vector w = Vector::Constant(3, 1.0 / 3.0);
    CHECK(profit(pm, 0, z1(0.0), w).value() == doctest::Approx(3.0 * 7.0 / 15.0).epsilon(1e-13));
    const auto outside = profit(pm, 0, z1(3.0), w);
    CHECK_FALSE(outside.defined());
    CHECK_THROWS_AS((void)outside.value(), DomainError);
    CHECK(outside < Profit(-1e300));
    CHECK_FALSE(Profit(-1e300) < outside);
    CHECK_FALSE(outside < Profit::undefined());
    CHECK(Profit(1.0) < Profit(2.0));

    Firm at_margin{0, 1.0, 0.0, 1.0, {{1, 0, 0.1}, {1, 1, -0.1}}, {}};
    const ParametricModel tight(families::influential_agent(), {at_margin});
    CHECK(profit(tight, 0, z1(1.0), w).value() == 0.0);
}

TEST_CASE("profit is concave in the own discount") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pm = test::random_parametric(rng, 4 + static_cast<std::size_t>(trial % 5), 3, 2);
        const Vector& w = pm.base().endowment();
        Vector z(2);
        z << 0.3, 0.6;
        for (std::size_t f = 0; f < 2; ++f) {
            const double h = 1e-3;
            for (double x = h; x <= 1.0 - h; x += 0.05) {
                Vector a = z, b = z, c = z;
                a[static_cast<Eigen::Index>(f)] = x - h;
                b[static_cast<Eigen::Index>(f)] = x;
                c[static_cast<Eigen::Index>(f)] = x + h;
                const double second = profit(pm, f, a, w).value() - 2.0 * profit(pm, f, b, w).value() +
                                      profit(pm, f, c, w).value();
                CHECK(second <= 1e-8);
            }
        }
    }
}

TEST_CASE("best response against a grid") {
    const auto pm = test::symmetric_duopoly();
    const Vector w = Vector::Ones(4);
    Vector z(2);
    z << 0.0, 0.3;
    const double br = best_response(pm, 0, z, w);
    CHECK(br == doctest::Approx(0.5 * 0.3 - 0.125).epsilon(1e-8));
    double best_z = 0.0;
    Profit best = Profit::undefined();
    for (int k = 0; k <= 10'000; ++k) {
        Vector y = z;
        y[0] = -0.5 + k * 1e-4;
        const auto v = profit(pm, 0, y, w);
        if (best < v) {
            best = v;
            best_z = y[0];
        }
    }
    Vector at = z;
    at[0] = br;
    CHECK(std::abs(br - best_z) <= 1e-4);
    CHECK(best.value() <= profit(pm, 0, at, w).value() + 1e-12);
    CHECK_THROWS_AS((void)best_response(pm, 0, z, w, 0.0), DomainError);
}

TEST_CASE("symmetric duopoly equilibrium") {
    const auto pm = test::symmetric_duopoly();
    const auto eq = find_equilibrium(pm, Vector::Ones(4));
    CHECK(eq.converged);
    CHECK(eq.residual < 1e-6);
    CHECK(eq.z[0] == doctest::Approx(-0.25).epsilon(1e-7));
    CHECK(std::abs(eq.z[1] - eq.z[0]) < 1e-8);
    CHECK(eq.trace.size() == eq.rounds);
    for (std::size_t f = 0; f < 2; ++f)
        CHECK(std::abs(best_response(pm, f, eq.z, Vector::Ones(4)) - eq.z[static_cast<Eigen::Index>(f)]) < 1e-6);
    CHECK_THROWS_AS((void)find_equilibrium(pm, Vector::Ones(4), 0.0), DomainError);
    CHECK_THROWS_AS((void)find_equilibrium(example_firm(), Vector::Ones(3)), DomainError);

    const auto capped = find_equilibrium(pm, Vector::Ones(4), 0.5, 1e-14, 2);
    CHECK_FALSE(capped.converged);
    CHECK(capped.rounds == 2);
}

TEST_CASE("decoupled firms respond independently") {
    // choices A, B, C; firm A moves mass from C to A, firm B from C to B
    Matrix p = Matrix::Zero(3, 3);
    p(0, 1) = 0.2;
    p(1, 2) = 0.3;
    p(2, 0) = 0.1;
    Matrix q(3, 3);
    q << 0.2, 0.2, 0.4, 0.1, 0.2, 0.4, 0.3, 0.1, 0.5;
    const auto base = NetworkModel::from_dense({"1", "2", "3"}, {"A", "B", "C"}, p, q, Vector::Ones(3));
    Firm a{0, 1.0, 0.0, 0.8, {{0, 0, 0.2}, {0, 2, -0.2}, {2, 0, 0.3}, {2, 2, -0.3}}, {}};
    Firm b{1, 1.0, 0.0, 0.8, {{1, 1, 0.25}, {1, 2, -0.25}, {2, 1, 0.2}, {2, 2, -0.2}}, {}};
    const ParametricModel pm(base, {a, b});
    const Vector w = Vector::Ones(3);
    const auto eq = find_equilibrium(pm, w, 1.0);
    CHECK(eq.converged);
    for (double other : {0.0, 0.4, 0.8}) {
        CHECK(best_response(pm, 0, Vector{{0.0, other}}, w) == doctest::Approx(eq.z[0]).epsilon(1e-8));
        CHECK(best_response(pm, 1, Vector{{other, 0.0}}, w) == doctest::Approx(eq.z[1]).epsilon(1e-8));
    }
}

TEST_CASE("parametric documents") {
    const std::string doc = R"({
      "agents": ["1", "2", "3"], "choices": ["A", "B"],
      "adoption": [{"from": "1", "to": "2", "p": 0.125}, {"from": "1", "to": "3", "p": 0.125},
                   {"from": "2", "to": "1", "p": 0.5}, {"from": "2", "to": "3", "p": 0.25},
                   {"from": "3", "to": "1", "p": 0.5}, {"from": "3", "to": "2", "p": 0.25}],
      "direct": [{"agent": "1", "choice": "A", "q": 0.5}, {"agent": "1", "choice": "B", "q": 0.25},
                 {"agent": "2", "choice": "B", "q": 0.25}, {"agent": "3", "choice": "B", "q": 0.25}],
      "pricing": {"firms": [{"choice": "A", "margin": 3, "bounds": [0, 2.5],
                             "direct": [{"agent": "2", "choice": "A", "dq": 0.1},
                                        {"agent": "2", "choice": "B", "dq": -0.1}]}]}
    })";
    const auto pm = parse_parametric_model(doc);
    CHECK(pm.num_firms() == 1);
    CHECK(pm.direct_slope(0)(1, 0) == 0.1);
    CHECK(pm.upper_bounds()[0] == 2.5);
    std::string broken = doc;
    broken.replace(broken.find("\"dq\": 0.1"), 9, "\"dq\": 0.2");
    CHECK_THROWS_AS((void)parse_parametric_model(broken), ModelError);
    std::string unknown = doc;
    unknown.replace(unknown.find("\"margin\""), 8, "\"markup\"");
    CHECK_THROWS_AS((void)parse_parametric_model(unknown), ParseError);
}
