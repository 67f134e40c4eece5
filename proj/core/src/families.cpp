#include "netchoice/families.hpp"

#include <string>

#include "netchoice/error.hpp"

namespace netchoice::families {

namespace {

std::vector<std::string> numbered(std::size_t n, std::size_t first = 1) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(first + i));
    return ids;
}

std::vector<std::string> lettered(std::size_t m) {
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < m; ++j) {
        std::string id;
        for (std::size_t k = j + 1; k > 0; k = (k - 1) / 26) id.insert(id.begin(), static_cast<char>('A' + (k - 1) % 26));
        ids.push_back(id);
    }
    return ids;
}

// Spreads each agent's remaining mass 1 - sum_k p_ik evenly over the choices.
Matrix even_direct(const Matrix& p, std::size_t num_choices) {
    const Vector remaining = (Vector::Ones(p.rows()) - p.rowwise().sum()).cwiseMax(0.0);
    Matrix q(p.rows(), static_cast<Eigen::Index>(num_choices));
    for (Eigen::Index j = 0; j < q.cols(); ++j) q.col(j) = remaining / static_cast<double>(num_choices);
    return q;
}

} // namespace

NetworkModel influential_agent() {
    Matrix p(3, 3);
    p << 0.0, 1.0 / 8, 1.0 / 8, //
        1.0 / 2, 0.0, 1.0 / 4,  //
        1.0 / 2, 1.0 / 4, 0.0;
    Matrix q(3, 2);
    q << 1.0 / 2, 1.0 / 4, //
        0.0, 1.0 / 4,      //
        0.0, 1.0 / 4;
    return NetworkModel::from_dense(numbered(3), {"A", "B"}, p, q, Vector::Constant(3, 1.0 / 3));
}

NetworkModel isotropic(std::size_t n, double rho, std::size_t num_choices) {
    if (n < 2 || !(rho >= 0.0 && rho < 1.0)) throw DomainError("isotropic network needs n >= 2 and rho in [0, 1)");
    const auto size = static_cast<Eigen::Index>(n);
    Matrix p = Matrix::Constant(size, size, rho / static_cast<double>(n - 1));
    p.diagonal().setZero();
    return NetworkModel::from_dense(numbered(n), lettered(num_choices), p, even_direct(p, num_choices),
                                    Vector::Ones(size));
}

NetworkModel hub_and_spoke(std::size_t n, double rho, std::size_t num_choices) {
    if (n < 2 || !(rho >= 0.0 && rho <= 1.0)) throw DomainError("hub-and-spoke needs n >= 2 and rho in [0, 1]");
    const auto size = static_cast<Eigen::Index>(n);
    Matrix p = Matrix::Zero(size, size);
    p.col(0).setConstant(rho);
    p(0, 0) = 0.0;
    return NetworkModel::from_dense(numbered(n), lettered(num_choices), p, even_direct(p, num_choices),
                                    Vector::Ones(size));
}

NetworkModel hub_in_complete_network(std::size_t n, double rho_f, double rho_h, std::size_t num_choices) {
    if (n < 2 || !(rho_f >= 0.0 && rho_f < 1.0) || !(rho_h > 0.0 && rho_h <= 1.0) || rho_f + rho_h > 1.0)
        throw DomainError("hub network needs rho_F in [0,1), rho_H in (0,1], rho_F + rho_H <= 1");
    const auto size = static_cast<Eigen::Index>(n);
    Matrix p = Matrix::Constant(size, size, rho_f / static_cast<double>(n - 1));
    p.col(0).array() += rho_h;
    p.diagonal().setZero();
    return NetworkModel::from_dense(numbered(n), lettered(num_choices), p, even_direct(p, num_choices),
                                    Vector::Ones(size));
}

NetworkModel random_model(std::mt19937_64& rng, const RandomModelOptions& options) {
    const auto n = static_cast<Eigen::Index>(options.agents);
    const auto m = static_cast<Eigen::Index>(options.choices);
    if (n < 1 || m < 1) throw DomainError("random model needs at least one agent and one choice");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < 10'000; ++attempt) {
        Matrix p = Matrix::Zero(n, n);
        Matrix q = Matrix::Zero(n, m);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool indecisive = n > 1 && unit(rng) < options.indecisive_fraction;
            double adopt = 0.0;
            for (Eigen::Index k = 0; k < n; ++k)
                if (k != i && unit(rng) < options.density) adopt += (p(i, k) = unit(rng));
            double decide = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) decide += (q(i, j) = unit(rng));
            if (indecisive && adopt > 0.0) {
                p.row(i) /= adopt;
                q.row(i).setZero();
                continue;
            }
            // direct mass in [min_decisiveness, 1]
            const double qbar = options.min_decisiveness + (1.0 - options.min_decisiveness) * unit(rng);
            const double adopt_mass = adopt > 0.0 ? 1.0 - qbar : 0.0;
            const double direct_mass = 1.0 - adopt_mass;
            if (adopt > 0.0) p.row(i) *= adopt_mass / adopt;
            q.row(i) *= direct_mass / decide;
        }
        Vector w = Vector::Ones(n);
        if (options.random_endowment)
            for (Eigen::Index i = 0; i < n; ++i) w[i] = 2.0 * unit(rng);
        auto model = NetworkModel::from_dense(numbered(options.agents), lettered(options.choices), p, q, w);
        if (validate(model).collectively_decisive) return model;
    }
    throw ComputationError("could not sample a collectively decisive model");
}

} // namespace netchoice::families
