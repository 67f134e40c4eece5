#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace netchoice::cli {

enum class Format { table, delimited, structured };

using Cell = std::variant<std::string, double, long long, bool>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

/// Everything one command emits, rendered identically by every output format.
struct Report {
    std::string command;
    std::vector<std::pair<std::string, Cell>> summary;
    std::vector<Table> tables;
    /// A model document in the input schema, embedded verbatim in structured output.
    std::optional<std::string> model_document;

    void set(std::string key, Cell value) { summary.emplace_back(std::move(key), std::move(value)); }
    Table& add_table(std::string name, std::vector<std::string> columns) {
        tables.push_back({std::move(name), std::move(columns), {}});
        return tables.back();
    }
};

/// Table format prints reals with 10 significant digits; delimited and structured formats use the
/// shortest representation that round-trips.
[[nodiscard]] std::string render(const Report& report, Format format);

} // namespace netchoice::cli
