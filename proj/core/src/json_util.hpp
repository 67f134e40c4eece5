#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "netchoice/error.hpp"

namespace netchoice::detail {

using json = nlohmann::json;

inline json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("invalid JSON: {}", e.what()));
    }
}

inline void require_object(const json& node, std::string_view where) {
    if (!node.is_object()) throw ParseError(fmt::format("{}: expected an object", where));
}

inline void reject_unknown_keys(const json& node, std::initializer_list<std::string_view> known,
                                std::string_view where) {
    for (const auto& [key, _] : node.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || key == k;
        if (!ok) throw ParseError(fmt::format("{}: unknown key '{}'", where, key));
    }
}

inline const json& require_key(const json& node, std::string_view key, std::string_view where) {
    auto it = node.find(key);
    if (it == node.end()) throw ParseError(fmt::format("{}: missing key '{}'", where, key));
    return *it;
}

inline double as_number(const json& node, std::string_view where) {
    if (!node.is_number()) throw ParseError(fmt::format("{}: expected a number", where));
    return node.get<double>();
}

inline std::string as_string(const json& node, std::string_view where) {
    if (!node.is_string()) throw ParseError(fmt::format("{}: expected a string", where));
    return node.get<std::string>();
}

} // namespace netchoice::detail
