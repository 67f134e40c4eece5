#include "netchoice/lp_format.hpp"

#include <fmt/format.h>

#include "netchoice/error.hpp"

namespace netchoice {

namespace {

constexpr std::size_t wrap_column = 78;

// Appends " + 2 x" style terms, continuing on indented lines past wrap_column.
void append_terms(std::string& out, std::string line, const std::vector<Term>& terms, const LinearProgram& program) {
    bool first = true;
    for (const auto& t : terms) {
        if (t.var >= program.variables.size()) throw DomainError("term references an unknown variable");
        if (t.coef == 0.0) continue;
        const double mag = t.coef < 0.0 ? -t.coef : t.coef;
        const char* sign = t.coef < 0.0 ? " -" : (first ? "" : " +");
        const auto piece = fmt::format("{} {} {}", sign, mag, program.variables[t.var].name);
        if (line.size() + piece.size() > wrap_column && !first) {
            out += line;
            out += '\n';
            line = "   ";
        }
        line += piece;
        first = false;
    }
    if (first) line += fmt::format(" 0 {}", program.variables.empty() ? "x" : program.variables.front().name);
    out += line;
}

} // namespace

std::string write_lp(const LinearProgram& program) {
    std::string out;
    out += program.sense == ObjectiveSense::minimize ? "Minimize\n" : "Maximize\n";
    append_terms(out, " obj:", program.objective, program);
    out += "\nSubject To\n";
    for (const auto& c : program.constraints) {
        append_terms(out, fmt::format(" {}:", c.name), c.terms, program);
        const char* op = c.sense == Sense::le ? "<=" : c.sense == Sense::ge ? ">=" : "=";
        out += fmt::format(" {} {}\n", op, c.rhs);
    }
    out += "Bounds\n";
    for (const auto& v : program.variables) {
        if (v.lower == v.upper)
            out += fmt::format(" {} = {}\n", v.name, v.lower);
        else
            out += fmt::format(" {} <= {} <= {}\n", v.lower, v.name, v.upper);
    }
    out += "End\n";
    return out;
}

} // namespace netchoice
