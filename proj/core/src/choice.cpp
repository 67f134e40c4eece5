#include "netchoice/choice.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace netchoice {

namespace {

constexpr double jacobi_relative_residual = 1e-12;
constexpr int jacobi_max_sweeps = 200'000;
constexpr double ill_conditioned_adoption = 0.999;

Matrix identity_minus_adoption(const NetworkModel& model) {
    const auto n = static_cast<Eigen::Index>(model.num_agents());
    Matrix a = Matrix::Identity(n, n);
    a -= model.adoption_dense();
    return a;
}

// Jacobi on (I - op) x = b where op has zero diagonal: x <- b + op x.
template <class Op>
Vector jacobi(const Op& op, const Vector& b, int& sweeps) {
    Vector x = b;
    const double scale = b.lpNorm<Eigen::Infinity>();
    if (scale == 0.0) return x;
    for (int k = 1; k <= jacobi_max_sweeps; ++k) {
        Vector next = b + op * x;
        const double residual = (next - x).lpNorm<Eigen::Infinity>(); // == ||b - (I - op) x||
        x = std::move(next);
        if (residual <= jacobi_relative_residual * scale) {
            sweeps = std::max(sweeps, k);
            return x;
        }
    }
    throw ComputationError("Jacobi iteration did not reach the residual target");
}

} // namespace

void require_decisive(const NetworkModel& model) {
    const auto report = validate(model);
    if (!report.collectively_decisive) {
        if (report.decisive_agents.empty()) throw AssumptionError("no agent selects a choice directly");
        throw AssumptionError(fmt::format("{} agent(s) have no adoption path to a decisive agent (first: '{}')",
                                          report.unreachable_agents.size(),
                                          model.agents()[report.unreachable_agents.front()]));
    }
}

void check_endowment(const NetworkModel& model, const Vector& endowment) {
    if (static_cast<std::size_t>(endowment.size()) != model.num_agents())
        throw DomainError(fmt::format("endowment has {} entries, model has {} agents", endowment.size(),
                                      model.num_agents()));
    if (!endowment.allFinite() || (endowment.array() < 0.0).any())
        throw DomainError("endowment must be finite and non-negative");
}

ChoiceSystem::ChoiceSystem(const NetworkModel& model) {
    require_decisive(model);
    lu_.compute(identity_minus_adoption(model));
}

ChoiceSolution solve_choice_matrix(const NetworkModel& model, Solver solver) {
    ChoiceSolution s;
    const Vector& w = model.endowment();
    if (solver == Solver::dense) {
        const ChoiceSystem system(model);
        s.pi = system.solve(model.direct());
        s.centrality = system.solve_transpose(w);
    } else {
        require_decisive(model);
        const SparseMatrix& p = model.adoption();
        const SparseMatrix pt = p.transpose();
        s.pi.resize(model.direct().rows(), model.direct().cols());
        for (Eigen::Index j = 0; j < s.pi.cols(); ++j) s.pi.col(j) = jacobi(p, model.direct().col(j), s.iterations);
        s.centrality = jacobi(pt, w, s.iterations);
    }
    s.decisiveness = model.decisiveness();
    s.decision_shares = s.centrality.cwiseProduct(s.decisiveness);
    s.choice_shares = s.pi.transpose() * w;
    s.ill_conditioned = (1.0 - s.decisiveness.array()).maxCoeff() > ill_conditioned_adoption;
    return s;
}

Vector centrality(const NetworkModel& model, const Vector& endowment) {
    check_endowment(model, endowment);
    return ChoiceSystem(model).solve_transpose(endowment);
}

Vector choice_shares(const NetworkModel& model, const Vector& endowment) {
    // w^T (I-P)^{-1} Q == c^T Q
    return model.direct().transpose() * centrality(model, endowment);
}

Vector decision_shares(const NetworkModel& model, const Vector& endowment) {
    return centrality(model, endowment).cwiseProduct(model.decisiveness());
}

double hub_asymptotic_ratio(double rho_f, double rho_h) {
    if (!(rho_f >= 0.0 && rho_f < 1.0)) throw DomainError("rho_F must lie in [0, 1)");
    if (!(rho_h > 0.0 && rho_h <= 1.0)) throw DomainError("rho_H must lie in (0, 1]");
    if (rho_f + rho_h > 1.0 + 1e-15) throw DomainError("rho_F + rho_H must not exceed 1");
    return 1.0 / (1.0 / rho_h - rho_f / (1.0 - rho_f));
}

LearningResult linear_learning_limit(const NetworkModel& model, std::size_t choice, double tol, int max_iterations) {
    if (choice >= model.num_choices()) throw DomainError("choice index out of range");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    require_decisive(model);

    const auto n = static_cast<Eigen::Index>(model.num_agents());
    const SparseMatrix& p = model.adoption();
    Vector alpha = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (SparseMatrix::InnerIterator it(p, i); it; ++it) alpha[i] += it.value();

    // V: rows of P scaled to sum to one (rows with alpha_i = 0 stay empty, D zeroes them anyway)
    SparseMatrix v = p;
    for (Eigen::Index i = 0; i < n; ++i)
        for (SparseMatrix::InnerIterator it(v, i); it; ++it) it.valueRef() /= alpha[i];

    LearningResult result;
    Vector x0 = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double own = 1.0 - alpha[i];
        if (own <= 0.0) {
            result.zero_filled_agents.push_back(static_cast<std::size_t>(i));
        } else {
            x0[i] = model.direct()(i, static_cast<Eigen::Index>(choice)) / own;
        }
    }

    const Vector anchor = (Vector::Ones(n) - alpha).cwiseMax(0.0).cwiseProduct(x0);
    const double step_target = tol * std::max(1.0 - spectral_radius(model), 1e-6);
    Vector x = x0;
    for (int t = 1; t <= max_iterations; ++t) {
        Vector next = alpha.cwiseProduct(v * x) + anchor;
        const double step = (next - x).lpNorm<Eigen::Infinity>();
        x = std::move(next);
        if (step <= step_target) {
            result.limit = std::move(x);
            result.iterations = t;
            return result;
        }
    }
    throw ComputationError("linear learning process did not converge within the iteration limit");
}

} // namespace netchoice
