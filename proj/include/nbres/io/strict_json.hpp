#pragma once

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "nbres/errors.hpp"

namespace nbres::io {

using json = nlohmann::json;

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

/// Object reader that remembers which keys were consumed; finish() rejects
/// anything left over so typos never fall back to a default.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw InvalidParameter(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw InvalidParameter(where_ + "." + key + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw InvalidParameter(where_ + "." + key + ": not finite");
        return d;
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    double positive(const std::string& key) {
        const double d = number(key);
        if (!(d > 0.0)) throw InvalidParameter(where_ + "." + key + ": must be positive");
        return d;
    }

    double positive(const std::string& key, double fallback) { return has(key) ? positive(key) : fallback; }

    double non_negative(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const double d = number(key);
        if (!(d >= 0.0)) throw InvalidParameter(where_ + "." + key + ": must be non-negative");
        return d;
    }

    int count(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_number_integer() || v.get<long long>() <= 0)
            throw InvalidParameter(where_ + "." + key + ": expected a positive integer");
        return v.get<int>();
    }

    std::string text(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw InvalidParameter(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

    StrictObject object(const std::string& key) { return StrictObject(at(key), where_ + "." + key); }

    const json& raw(const std::string& key) { return at(key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw InvalidParameter(where_ + ": unknown key '" + it.key() + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& at(const std::string& key) {
        if (!j_.contains(key)) throw InvalidParameter(where_ + ": missing key '" + key + "'");
        used_.insert(key);
        return j_.at(key);
    }

    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

}  // namespace nbres::io
