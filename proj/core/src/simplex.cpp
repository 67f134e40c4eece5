#include "netchoice/simplex.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "netchoice/error.hpp"

namespace netchoice {

std::size_t LinearProgram::add_variable(std::string name, double lower, double upper) {
    variables.push_back({std::move(name), lower, upper});
    return variables.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
    constraints.push_back({std::move(name), std::move(terms), sense, rhs});
    return constraints.size() - 1;
}

const char* to_string(LpStatus status) {
    switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::numerical_breakdown: return "numerical_breakdown";
    case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

constexpr double reduced_cost_tolerance = 1e-10;
constexpr double residual_tolerance = 1e-7;

class Tableau {
  public:
    Tableau(Matrix a, Vector b, std::vector<std::size_t> basis, std::vector<bool> artificial)
        : t_(std::move(a)), b_(std::move(b)), basis_(std::move(basis)), artificial_(std::move(artificial)) {}

    [[nodiscard]] Eigen::Index rows() const { return t_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return t_.cols(); }
    [[nodiscard]] const std::vector<std::size_t>& basis() const { return basis_; }
    [[nodiscard]] const Vector& rhs() const { return b_; }
    [[nodiscard]] double at(Eigen::Index r, Eigen::Index c) const { return t_(r, c); }
    [[nodiscard]] bool is_artificial(std::size_t c) const { return artificial_[c]; }

    /// c - c_B^T B^{-1} A over every column.
    [[nodiscard]] Vector reduced_costs(const Vector& cost) const {
        Vector cb(rows());
        for (Eigen::Index r = 0; r < rows(); ++r) cb[r] = cost[static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(r)])];
        return cost - t_.transpose() * cb;
    }

    void pivot(Eigen::Index row, Eigen::Index col) {
        const double p = t_(row, col);
        t_.row(row) /= p;
        b_[row] /= p;
        for (Eigen::Index r = 0; r < rows(); ++r) {
            if (r == row) continue;
            const double f = t_(r, col);
            if (f == 0.0) continue;
            t_.row(r) -= f * t_.row(row);
            b_[r] -= f * b_[row];
            if (b_[r] < 0.0 && b_[r] > -1e-13) b_[r] = 0.0;
        }
        basis_[static_cast<std::size_t>(row)] = static_cast<std::size_t>(col);
    }

    // Bland's rule: lowest-index improving column, lowest-index basic variable among tied ratios.
    LpStatus optimize(const Vector& cost, bool allow_artificial, const SimplexOptions& opt, std::size_t& pivots) {
        Vector d = reduced_costs(cost);
        while (true) {
            Eigen::Index enter = -1;
            for (Eigen::Index c = 0; c < cols(); ++c) {
                if (!allow_artificial && artificial_[static_cast<std::size_t>(c)]) continue;
                if (d[c] < -reduced_cost_tolerance) {
                    enter = c;
                    break;
                }
            }
            if (enter < 0) return LpStatus::optimal;
            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < rows(); ++r) {
                const double a = t_(r, enter);
                if (a <= opt.pivot_tolerance) continue;
                const double ratio = b_[r] / a;
                if (leave < 0 || ratio < best - 1e-12) {
                    best = ratio;
                    leave = r;
                } else if (ratio <= best + 1e-12 &&
                           basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)]) {
                    leave = r;
                }
            }
            if (leave < 0) return LpStatus::unbounded;
            if (++pivots > opt.max_pivots) return LpStatus::iteration_limit;
            const double dc = d[enter];
            pivot(leave, enter);
            d -= dc * t_.row(leave).transpose();
        }
    }

  private:
    Matrix t_;
    Vector b_;
    std::vector<std::size_t> basis_;
    std::vector<bool> artificial_;
};

} // namespace

LpResult simplex_solve(const LinearProgram& program, const SimplexOptions& opt) {
    const auto n = static_cast<Eigen::Index>(program.variables.size());
    Vector lo(n), hi(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& v = program.variables[static_cast<std::size_t>(j)];
        if (!std::isfinite(v.lower) || !std::isfinite(v.upper))
            throw DomainError(fmt::format("variable '{}' needs finite bounds", v.name));
        if (v.lower > v.upper) throw DomainError(fmt::format("variable '{}' has lower > upper", v.name));
        lo[j] = v.lower;
        hi[j] = v.upper;
    }
    auto dense = [&](const std::vector<Term>& terms) {
        Vector a = Vector::Zero(n);
        for (const auto& t : terms) {
            if (t.var >= program.variables.size()) throw DomainError("term references an unknown variable");
            a[static_cast<Eigen::Index>(t.var)] += t.coef;
        }
        return a;
    };

    // rows: original constraints, then x_j - lo_j <= hi_j - lo_j
    const auto m0 = static_cast<Eigen::Index>(program.constraints.size());
    const Eigen::Index m = m0 + n;
    Matrix rows_a(m, n);
    Vector rows_b(m);
    std::vector<Sense> sense(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < m0; ++r) {
        const auto& c = program.constraints[static_cast<std::size_t>(r)];
        const Vector a = dense(c.terms);
        rows_a.row(r) = a.transpose();
        rows_b[r] = c.rhs - a.dot(lo);
        sense[static_cast<std::size_t>(r)] = c.sense;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        rows_a.row(m0 + j).setZero();
        rows_a(m0 + j, j) = 1.0;
        rows_b[m0 + j] = hi[j] - lo[j];
        sense[static_cast<std::size_t>(m0 + j)] = Sense::le;
    }
    Vector flip = Vector::Ones(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        if (rows_b[r] >= 0.0) continue;
        flip[r] = -1.0;
        rows_a.row(r) *= -1.0;
        rows_b[r] *= -1.0;
        auto& s = sense[static_cast<std::size_t>(r)];
        if (s != Sense::eq) s = s == Sense::le ? Sense::ge : Sense::le;
    }

    Eigen::Index slacks = 0, artificials = 0;
    for (auto s : sense) {
        if (s != Sense::eq) ++slacks;
        if (s != Sense::le) ++artificials;
    }
    const Eigen::Index cols = n + slacks + artificials;
    Matrix a = Matrix::Zero(m, cols);
    a.leftCols(n) = rows_a;
    std::vector<std::size_t> basis(static_cast<std::size_t>(m));
    std::vector<std::size_t> unit_column(static_cast<std::size_t>(m));
    std::vector<bool> artificial(static_cast<std::size_t>(cols), false);
    Eigen::Index next_slack = n, next_art = n + slacks;
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto s = sense[static_cast<std::size_t>(r)];
        if (s == Sense::le) {
            a(r, next_slack) = 1.0;
            unit_column[static_cast<std::size_t>(r)] = static_cast<std::size_t>(next_slack++);
        } else {
            if (s == Sense::ge) a(r, next_slack++) = -1.0;
            a(r, next_art) = 1.0;
            artificial[static_cast<std::size_t>(next_art)] = true;
            unit_column[static_cast<std::size_t>(r)] = static_cast<std::size_t>(next_art++);
        }
        basis[static_cast<std::size_t>(r)] = unit_column[static_cast<std::size_t>(r)];
    }

    LpResult result;
    Tableau tab(std::move(a), rows_b, basis, artificial);

    if (artificials > 0) {
        Vector phase1 = Vector::Zero(cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            if (artificial[static_cast<std::size_t>(c)]) phase1[c] = 1.0;
        const auto status = tab.optimize(phase1, true, opt, result.pivots);
        if (status != LpStatus::optimal) {
            result.status = status == LpStatus::unbounded ? LpStatus::numerical_breakdown : status;
            result.diagnostics = fmt::format("phase 1 ended with status {}", to_string(status));
            return result;
        }
        double infeasibility = 0.0;
        for (Eigen::Index r = 0; r < m; ++r)
            if (artificial[tab.basis()[static_cast<std::size_t>(r)]]) infeasibility += tab.rhs()[r];
        if (infeasibility > opt.feasibility_tolerance * std::max(1.0, rows_b.cwiseAbs().maxCoeff())) {
            result.status = LpStatus::infeasible;
            result.diagnostics = fmt::format("phase 1 minimum infeasibility {:.3e}", infeasibility);
            return result;
        }
        // drive zero-level artificials out of the basis where a structural or slack pivot exists
        for (Eigen::Index r = 0; r < m; ++r) {
            if (!artificial[tab.basis()[static_cast<std::size_t>(r)]]) continue;
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (artificial[static_cast<std::size_t>(c)] || std::abs(tab.at(r, c)) <= opt.pivot_tolerance) continue;
                tab.pivot(r, c);
                ++result.pivots;
                break;
            }
        }
    }

    Vector cost = Vector::Zero(cols);
    const double direction = program.sense == ObjectiveSense::maximize ? -1.0 : 1.0;
    cost.head(n) = direction * dense(program.objective);
    const auto status = tab.optimize(cost, false, opt, result.pivots);
    if (status != LpStatus::optimal) {
        result.status = status;
        result.diagnostics = fmt::format("phase 2 ended with status {}", to_string(status));
        return result;
    }

    Vector shifted = Vector::Zero(cols);
    for (Eigen::Index r = 0; r < m; ++r) shifted[static_cast<Eigen::Index>(tab.basis()[static_cast<std::size_t>(r)])] = tab.rhs()[r];
    result.x = lo + shifted.head(n);
    result.value = dense(program.objective).dot(result.x);

    const Vector d = tab.reduced_costs(cost);
    result.duals.resize(m0);
    for (Eigen::Index r = 0; r < m0; ++r)
        result.duals[r] = direction * flip[r] * -d[static_cast<Eigen::Index>(unit_column[static_cast<std::size_t>(r)])];

    double worst = 0.0;
    std::string where;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double v = std::max(lo[j] - result.x[j], result.x[j] - hi[j]);
        if (v > worst) {
            worst = v;
            where = program.variables[static_cast<std::size_t>(j)].name;
        }
    }
    for (Eigen::Index r = 0; r < m0; ++r) {
        const auto& c = program.constraints[static_cast<std::size_t>(r)];
        const double lhs = dense(c.terms).dot(result.x);
        const double v = c.sense == Sense::le ? lhs - c.rhs : c.sense == Sense::ge ? c.rhs - lhs : std::abs(lhs - c.rhs);
        if (v > worst) {
            worst = v;
            where = c.name;
        }
    }
    if (worst > residual_tolerance) {
        result.status = LpStatus::numerical_breakdown;
        result.diagnostics = fmt::format("final point violates '{}' by {:.3e}", where, worst);
        return result;
    }
    result.status = LpStatus::optimal;
    return result;
}

} // namespace netchoice
