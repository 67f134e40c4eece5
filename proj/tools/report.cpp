#include "report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

namespace netchoice::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::string text(const Cell& cell, bool precise) {
    return std::visit(
        [precise](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return v;
            } else if constexpr (std::is_same_v<T, double>) {
                if (std::isnan(v)) return "nan";
                return precise ? fmt::format("{}", v) : fmt::format("{:.10g}", v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                return std::to_string(v);
            }
        },
        cell);
}

ojson to_json(const Cell& cell) {
    return std::visit([](const auto& v) { return ojson(v); }, cell);
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string render_table(const Report& r) {
    std::string out;
    std::size_t key_width = 0;
    for (const auto& [k, _] : r.summary) key_width = std::max(key_width, k.size());
    for (const auto& [k, v] : r.summary) out += fmt::format("{:<{}}  {}\n", k, key_width, text(v, false));
    for (const auto& t : r.tables) {
        if (!out.empty()) out += '\n';
        out += fmt::format("[{}]\n", t.name);
        std::vector<std::size_t> width;
        for (const auto& c : t.columns) width.push_back(c.size());
        std::vector<std::vector<std::string>> cells;
        for (const auto& row : t.rows) {
            auto& line = cells.emplace_back();
            for (std::size_t c = 0; c < row.size(); ++c) {
                line.push_back(text(row[c], false));
                width[c] = std::max(width[c], line.back().size());
            }
        }
        auto emit = [&](const std::vector<std::string>& line) {
            std::string s;
            for (std::size_t c = 0; c < line.size(); ++c) s += fmt::format("{}{:<{}}", c ? "  " : "", line[c], width[c]);
            while (!s.empty() && s.back() == ' ') s.pop_back();
            out += s + '\n';
        };
        emit(t.columns);
        for (const auto& line : cells) emit(line);
    }
    if (r.model_document) out += "\n[model]\n" + *r.model_document;
    return out;
}

std::string render_delimited(const Report& r) {
    std::string out;
    for (const auto& [k, v] : r.summary) out += fmt::format("{},{}\n", quoted(k), quoted(text(v, true)));
    for (const auto& t : r.tables) {
        out += fmt::format("# {}\n", t.name);
        std::vector<std::string> header;
        for (const auto& c : t.columns) header.push_back(quoted(c));
        out += fmt::format("{}\n", fmt::join(header, ","));
        for (const auto& row : t.rows) {
            std::vector<std::string> line;
            for (const auto& cell : row) line.push_back(quoted(text(cell, true)));
            out += fmt::format("{}\n", fmt::join(line, ","));
        }
    }
    return out;
}

std::string render_structured(const Report& r) {
    ojson doc;
    doc["command"] = r.command;
    for (const auto& [k, v] : r.summary) doc[k] = to_json(v);
    for (const auto& t : r.tables) {
        auto rows = ojson::array();
        for (const auto& row : t.rows) {
            ojson obj;
            for (std::size_t c = 0; c < row.size(); ++c) obj[t.columns[c]] = to_json(row[c]);
            rows.push_back(std::move(obj));
        }
        doc[t.name] = std::move(rows);
    }
    if (r.model_document) doc["model"] = ojson::parse(*r.model_document);
    return doc.dump(2) + "\n";
}

} // namespace

std::string render(const Report& report, Format format) {
    switch (format) {
    case Format::table: return render_table(report);
    case Format::delimited: return render_delimited(report);
    case Format::structured: return render_structured(report);
    }
    return {};
}

} // namespace netchoice::cli
