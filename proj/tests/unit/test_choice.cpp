#include <doctest.h>

#include <functional>
#include <random>
#include <set>

#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"
#include "netchoice/families.hpp"
#include "oracles.hpp"

using namespace netchoice;

TEST_CASE("example choice probabilities") {
    const auto sol = solve_choice_matrix(families::influential_agent());
    CHECK(sol.pi(1, 0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(sol.pi(2, 0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(sol.pi(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(sol.choice_shares[0] == doctest::Approx(7.0 / 15.0).epsilon(1e-12));
    CHECK(sol.choice_shares[1] == doctest::Approx(8.0 / 15.0).epsilon(1e-12));
    CHECK(sol.decision_shares[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(sol.decision_shares[1] == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(sol.decision_shares[2] == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("without adoption the choice matrix is the direct-selection matrix") {
    Matrix q(3, 2);
    q << 0.2, 0.8, 1.0, 0.0, 0.5, 0.5;
    const auto model = NetworkModel::from_dense({"a", "b", "c"}, {"A", "B"}, Matrix::Zero(3, 3), q, Vector::Ones(3));
    CHECK(solve_choice_matrix(model).pi == q);
}

TEST_CASE("dense and iterative solvers agree with the fixed-point oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        families::RandomModelOptions opt;
        opt.agents = 1 + static_cast<std::size_t>(trial % 15);
        opt.choices = 1 + static_cast<std::size_t>(trial % 4);
        const auto model = families::random_model(rng, opt);
        const Matrix oracle = test::fixed_point_choice_matrix(model);
        const auto dense = solve_choice_matrix(model, Solver::dense);
        const auto iterative = solve_choice_matrix(model, Solver::iterative);
        CHECK((dense.pi - oracle).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((iterative.pi - oracle).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((iterative.centrality - dense.centrality).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(dense.iterations == 0);
        CHECK(((dense.pi.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
    }
}

TEST_CASE("choice shares under special endowments") {
    const auto model = families::influential_agent();
    CHECK(choice_shares(model, Vector::Zero(3)).isZero());
    const Matrix pi = solve_choice_matrix(model).pi;
    for (Eigen::Index i = 0; i < 3; ++i) {
        const Vector e = Vector::Unit(3, i);
        CHECK((choice_shares(model, e).transpose() - pi.row(i)).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK_THROWS_AS((void)choice_shares(model, Vector::Ones(2)), DomainError);
    CHECK_THROWS_AS((void)choice_shares(model, Vector::Constant(3, -1.0)), DomainError);
}

TEST_CASE("decision shares conserve endowment and factor into centrality times decisiveness") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        families::RandomModelOptions opt;
        opt.agents = 2 + static_cast<std::size_t>(trial % 9);
        const auto model = families::random_model(rng, opt);
        Vector w(static_cast<Eigen::Index>(opt.agents));
        for (auto& x : w) x = unit(rng);
        const Vector delta = decision_shares(model, w);
        CHECK(delta.sum() == doctest::Approx(w.sum()).epsilon(1e-12));
        const Vector c = centrality(model, w);
        CHECK((delta - c.cwiseProduct(model.decisiveness())).cwiseAbs().maxCoeff() < 1e-12);
        // c^T (I - P) = w^T
        CHECK((c.transpose() * (Matrix::Identity(w.size(), w.size()) - model.adoption_dense()) - w.transpose())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
}

TEST_CASE("isotropic network decision shares follow the closed form") {
    for (std::size_t n : {2u, 3u, 7u}) {
        for (double rho : {0.0, 0.3, 0.9}) {
            const auto model = families::isotropic(n, rho);
            Vector w(static_cast<Eigen::Index>(n));
            for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 1.0 + static_cast<double>(i);
            const Vector delta = decision_shares(model, w);
            const double a = static_cast<double>(n - 1);
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                const double expected = a / (a + rho) * ((1.0 - rho) * w[i] + rho / a * w.sum());
                CHECK(delta[i] == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("hub-and-spoke decision shares") {
    const auto model = families::hub_and_spoke(3, 0.5);
    const Vector delta = decision_shares(model, Vector::Ones(3));
    CHECK(delta[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(delta[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(delta[2] == doctest::Approx(0.5).epsilon(1e-14));

    const auto bigger = families::hub_and_spoke(6, 0.8);
    Vector w(6);
    w << 1, 2, 0, 3, 1, 0.5;
    const Vector d = decision_shares(bigger, w);
    CHECK(d[0] == doctest::Approx(0.2 * w[0] + 0.8 * w.sum()).epsilon(1e-12));
    for (Eigen::Index i = 1; i < 6; ++i) CHECK(d[i] == doctest::Approx(0.2 * w[i]).epsilon(1e-12));
}

TEST_CASE("hub asymptotic ratio") {
    CHECK(hub_asymptotic_ratio(0.0, 1.0) == 1.0);
    CHECK(hub_asymptotic_ratio(0.0, 0.5) == doctest::Approx(0.5));
    CHECK(hub_asymptotic_ratio(0.25, 0.25) == doctest::Approx(3.0 / 11.0));
    CHECK_THROWS_AS((void)hub_asymptotic_ratio(0.5, 0.6), DomainError);
}

TEST_CASE("finite hub networks approach the asymptotic ratio") {
    for (auto [rho_f, rho_h] : {std::pair{0.0, 0.5}, std::pair{0.25, 0.25}, std::pair{0.3, 0.6}}) {
        const double limit = hub_asymptotic_ratio(rho_f, rho_h);
        double previous = 1e300;
        for (std::size_t n : {10u, 100u, 1000u}) {
            const auto model = families::hub_in_complete_network(n, rho_f, rho_h);
            const Vector w = Vector::Ones(static_cast<Eigen::Index>(n));
            const double ratio = decision_shares(model, w)[0] / w.sum();
            const double gap = std::abs(ratio - limit);
            CHECK(gap <= previous);
            previous = gap;
        }
        CHECK(previous < 2e-3);
    }
}

TEST_CASE("mixture choice share") {
    const auto model = families::influential_agent();
    const Vector w = Vector::Constant(3, 1.0 / 3.0);
    using Measure = std::function<double(const std::size_t&)>;
    std::vector<Measure> full(3, [](const std::size_t&) { return 1.0; });
    CHECK(mixture_choice_share<std::size_t>(model, w, full, 0) == doctest::Approx(1.0));
    std::vector<Measure> none(3, [](const std::size_t&) { return 0.0; });
    CHECK(mixture_choice_share<std::size_t>(model, w, none, 0) == 0.0);

    const Matrix& q = model.direct();
    const Vector qbar = model.decisiveness();
    std::vector<Measure> finite;
    for (Eigen::Index i = 0; i < 3; ++i)
        finite.emplace_back([&q, &qbar, i](const std::size_t& j) { return q(i, static_cast<Eigen::Index>(j)) / qbar[i]; });
    const Vector shares = choice_shares(model, w);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(mixture_choice_share<std::size_t>(model, w, finite, j) ==
              doctest::Approx(shares[static_cast<Eigen::Index>(j)]).epsilon(1e-12));

    std::vector<Measure> two(2, [](const std::size_t&) { return 1.0; });
    CHECK_THROWS_AS((void)mixture_choice_share<std::size_t>(model, w, two, 0), DomainError);
}

TEST_CASE("linear learning reaches the choice matrix") {
    const auto model = families::influential_agent();
    const auto a = linear_learning_limit(model, 0);
    CHECK(a.limit[0] == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(a.limit[1] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(a.limit[2] == doctest::Approx(0.4).epsilon(1e-10));
    const auto b = linear_learning_limit(model, 1);
    CHECK(((a.limit + b.limit).array() - 1.0).abs().maxCoeff() < 1e-10);

    Matrix q(2, 2);
    q << 0.25, 0.75, 1.0, 0.0;
    const auto flat = NetworkModel::from_dense({"a", "b"}, {"A", "B"}, Matrix::Zero(2, 2), q, Vector::Ones(2));
    CHECK(linear_learning_limit(flat, 0).limit == q.col(0));
}

TEST_CASE("linear learning with always-adopting agents") {
    std::mt19937_64 rng(21);
    families::RandomModelOptions opt;
    opt.agents = 8;
    opt.choices = 3;
    opt.indecisive_fraction = 0.5;
    const auto model = families::random_model(rng, opt);
    const Matrix pi = solve_choice_matrix(model).pi;
    for (std::size_t j = 0; j < 3; ++j) {
        const auto r = linear_learning_limit(model, j);
        CHECK((r.limit - pi.col(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("collective decisiveness is required") {
    Matrix p(2, 2);
    p << 0, 1, 1, 0;
    const auto cyc = NetworkModel::from_dense({"a", "b"}, {"X"}, p, Matrix::Zero(2, 1), Vector::Ones(2));
    CHECK_THROWS_AS((void)solve_choice_matrix(cyc), AssumptionError);
    CHECK_THROWS_AS(require_decisive(cyc), AssumptionError);
    CHECK_THROWS_AS((void)ChoiceSystem(cyc), AssumptionError);
}
