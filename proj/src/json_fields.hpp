#pragma once
// Field-by-field JSON reading with path-qualified ConfigError messages.
// Internal; shared by the scenario and engine config loaders.

#include "vacdaq/error.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace vacdaq::detail {

using nlohmann::json;

// Byte offset -> "line L, column C" (1-based).
inline std::string position(std::string_view text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object())
            fail("", "expected an object");
    }

    [[noreturn]] void fail(std::string_view key, std::string_view msg) const {
        throw ConfigError(path_ + (key.empty() ? "" : "." + std::string(key)) + ": " + std::string(msg));
    }

    const json* find(std::string_view key) {
        seen_.insert(std::string(key));
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    double number(std::string_view key) {
        const json* v = find(key);
        if (!v)
            fail(key, "required");
        if (!v->is_number())
            fail(key, "expected a number");
        return v->get<double>();
    }

    std::optional<double> opt_number(std::string_view key) {
        if (!obj_.contains(key)) {
            seen_.insert(std::string(key));
            return std::nullopt;
        }
        return number(key);
    }

    bool boolean(std::string_view key, bool fallback) {
        const json* v = find(key);
        if (!v)
            return fallback;
        if (!v->is_boolean())
            fail(key, "expected true or false");
        return v->get<bool>();
    }

    std::string string(std::string_view key, std::optional<std::string> fallback = {}) {
        const json* v = find(key);
        if (!v) {
            if (fallback)
                return *fallback;
            fail(key, "required");
        }
        if (!v->is_string())
            fail(key, "expected a string");
        return v->get<std::string>();
    }

    /// Integer in [lo, hi]; `fallback` when absent.
    long long integer(std::string_view key, long long lo, long long hi, std::optional<long long> fallback = {}) {
        const json* v = find(key);
        if (!v) {
            if (fallback)
                return *fallback;
            fail(key, "required");
        }
        if (!v->is_number_integer())
            fail(key, "expected an integer");
        const auto n = v->get<long long>();
        if (n < lo || n > hi)
            fail(key, "must be within " + std::to_string(lo) + ".." + std::to_string(hi));
        return n;
    }

    bool has(std::string_view key) const { return obj_.contains(key); }

    // Typos in optional fields would otherwise be silently ignored.
    void reject_unknown() const {
        for (const auto& [k, _] : obj_.items())
            if (!seen_.count(k))
                fail(k, "unknown field");
    }

    const std::string& path() const { return path_; }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

/// Parses or throws ConfigError "<source>: syntax error at line L, column C".
inline json parse_json(std::string_view text, std::string_view source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(source) + ": syntax error at " + position(text, e.byte ? e.byte - 1 : 0));
    }
}

} // namespace vacdaq::detail
