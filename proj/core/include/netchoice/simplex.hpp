#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "netchoice/model.hpp"

namespace netchoice {

enum class Sense { le, ge, eq };
enum class ObjectiveSense { minimize, maximize };

struct Term {
    std::size_t var = 0;
    double coef = 0.0;
};

struct Variable {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
};

struct Constraint {
    std::string name;
    std::vector<Term> terms;
    Sense sense = Sense::le;
    double rhs = 0.0;
};

/// A linear program over finitely boxed variables.
struct LinearProgram {
    std::vector<Variable> variables;
    std::vector<Constraint> constraints;
    ObjectiveSense sense = ObjectiveSense::minimize;
    std::vector<Term> objective;

    std::size_t add_variable(std::string name, double lower, double upper);
    std::size_t add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);
};

enum class LpStatus { optimal, infeasible, unbounded, numerical_breakdown, iteration_limit };

[[nodiscard]] const char* to_string(LpStatus status);

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    Vector x;
    double value = 0.0;
    /// Shadow price of every constraint: derivative of the optimal value (in the program's own
    /// sense) with respect to its right-hand side. Defined only when optimal.
    Vector duals;
    std::size_t pivots = 0;
    std::string diagnostics;
};

struct SimplexOptions {
    double pivot_tolerance = 1e-11;     ///< smaller column entries are treated as zero
    double feasibility_tolerance = 1e-9;
    std::size_t max_pivots = 200'000;
};

/**
 * Dense two-phase primal simplex with Bland's rule.
 *
 * Variables are shifted to their lower bounds and upper bounds become explicit rows. After the
 * solve the point is re-checked against the original rows; a residual above 1e-7 is reported as
 * numerical_breakdown. Throws DomainError for infinite bounds or out-of-range variable indices.
 */
[[nodiscard]] LpResult simplex_solve(const LinearProgram& program, const SimplexOptions& options = {});

} // namespace netchoice
