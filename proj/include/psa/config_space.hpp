#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psa/errors.hpp"
#include "psa/rng.hpp"

namespace psa {

// One categorical hyperparameter: a name and an ordered list of option
// labels. flag_template renders the chosen option onto a command line,
// "{value}" standing for the option label.
struct Dimension {
    std::string name;
    std::vector<std::string> options;
    std::string flag_template;

    std::optional<std::uint32_t> option_index(const std::string& label) const {
        for (std::uint32_t i = 0; i < options.size(); ++i)
            if (options[i] == label) return i;
        return std::nullopt;
    }
};

// A point in the space: one option index per dimension, in dimension order.
// Immutable value; structural equality is the cache key.
struct Configuration {
    std::vector<std::uint32_t> indices;

    friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct ConfigurationHash {
    std::size_t operator()(const Configuration& c) const {
        std::size_t h = 0x9e3779b97f4a7c15ull;
        for (std::uint32_t v : c.indices) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

// The full categorical space: an ordered list of dimensions plus a default
// configuration. Dimension order is fixed and defines the vector position
// used by hamming_distance and encode.
struct ConfigSpace {
    std::string solver_name;
    std::vector<Dimension> dimensions;
    Configuration default_config;

    std::size_t dimension_count() const { return dimensions.size(); }

    bool contains(const Configuration& c) const {
        if (c.indices.size() != dimensions.size()) return false;
        for (std::size_t i = 0; i < dimensions.size(); ++i)
            if (c.indices[i] >= dimensions[i].options.size()) return false;
        return true;
    }

    void require_valid(const Configuration& c) const {
        if (!contains(c)) throw ConfigError("configuration does not belong to this space");
    }

    // Human-readable "name=label" pairs, dimension order.
    std::string describe(const Configuration& c) const {
        std::string out;
        for (std::size_t i = 0; i < dimensions.size(); ++i) {
            if (i) out += ' ';
            out += dimensions[i].name;
            out += '=';
            out += dimensions[i].options[c.indices[i]];
        }
        return out;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::set<std::string>& known,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

} // namespace detail

// The {params} expansion: each dimension's flag template rendered with the
// chosen option label, joined in dimension order. Also the "flags" column of
// the CSV logs.
inline std::string flags_string(const ConfigSpace& space, const Configuration& c) {
    std::string out;
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        const auto& dim = space.dimensions[i];
        if (dim.flag_template.empty()) continue;
        if (!out.empty()) out += ' ';
        out += detail::replace_all(dim.flag_template, "{value}", dim.options[c.indices[i]]);
    }
    return out;
}

// Parses the space document:
//   { "solver": "...", "parameters": [ { "name", "flag", "values", "default" }, ... ] }
// Unknown keys and duplicate dimension names are rejected. "flag" is
// optional and defaults to "-<name>={value}".
inline ConfigSpace load_space_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("space document must be a JSON object");
    detail::reject_unknown_keys(doc, {"solver", "parameters"}, "space document");
    if (!doc.contains("parameters") || !doc["parameters"].is_array())
        throw ConfigError("space document needs a \"parameters\" array");

    ConfigSpace space;
    space.solver_name = doc.value("solver", "");
    std::set<std::string> seen;
    for (const auto& p : doc["parameters"]) {
        if (!p.is_object()) throw ConfigError("parameter entries must be objects");
        detail::reject_unknown_keys(p, {"name", "flag", "values", "default"}, "parameter entry");
        Dimension dim;
        if (!p.contains("name")) throw ConfigError("parameter entry missing \"name\"");
        dim.name = p["name"].get<std::string>();
        if (!seen.insert(dim.name).second)
            throw ConfigError("duplicate dimension name \"" + dim.name + "\"");
        if (!p.contains("values") || !p["values"].is_array() || p["values"].empty())
            throw ConfigError("dimension \"" + dim.name + "\" needs a non-empty \"values\" array");
        for (const auto& v : p["values"]) dim.options.push_back(v.get<std::string>());
        std::set<std::string> labels(dim.options.begin(), dim.options.end());
        if (labels.size() != dim.options.size())
            throw ConfigError("dimension \"" + dim.name + "\" has duplicate option labels");
        dim.flag_template = p.value("flag", "-" + dim.name + "={value}");

        if (!p.contains("default"))
            throw ConfigError("dimension \"" + dim.name + "\" missing \"default\"");
        const std::string def = p["default"].get<std::string>();
        auto idx = dim.option_index(def);
        if (!idx)
            throw ConfigError("dimension \"" + dim.name + "\" default \"" + def +
                              "\" is not among its values");
        space.default_config.indices.push_back(*idx);
        space.dimensions.push_back(std::move(dim));
    }
    return space;
}

inline ConfigSpace load_space(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open space file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed space file " + path + ": " + e.what());
    }
    return load_space_json(doc);
}

// N = product of option counts. Throws on (absurd) overflow rather than
// wrapping silently.
inline std::uint64_t cardinality(const ConfigSpace& space) {
    std::uint64_t n = 1;
    for (const auto& dim : space.dimensions) {
        const std::uint64_t k = dim.options.size();
        if (n > std::numeric_limits<std::uint64_t>::max() / k)
            throw ConfigError("space cardinality overflows 64 bits");
        n *= k;
    }
    return n;
}

// Number of positions where a and b differ.
inline std::size_t hamming_distance(const Configuration& a, const Configuration& b) {
    if (a.indices.size() != b.indices.size())
        throw ConfigError("hamming_distance: configurations from different spaces");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.indices.size(); ++i)
        if (a.indices[i] != b.indices[i]) ++d;
    return d;
}

// All configurations at Hamming distance exactly 1, enumerated dimension by
// dimension and option by option. Size is sum(|options_i| - 1).
inline std::vector<Configuration> neighbors(const ConfigSpace& space, const Configuration& c) {
    space.require_valid(c);
    std::vector<Configuration> out;
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        for (std::uint32_t opt = 0; opt < space.dimensions[i].options.size(); ++opt) {
            if (opt == c.indices[i]) continue;
            Configuration n = c;
            n.indices[i] = opt;
            out.push_back(std::move(n));
        }
    }
    return out;
}

// Each dimension drawn uniformly and independently.
inline Configuration random_config(const ConfigSpace& space, Rng& rng) {
    Configuration c;
    c.indices.reserve(space.dimensions.size());
    for (const auto& dim : space.dimensions)
        c.indices.push_back(std::uint32_t(rng.next_index(dim.options.size())));
    return c;
}

// Configuration at a given mixed-radix linear index; dimension 0 is the
// least significant digit. Inverse of linear_index.
inline Configuration config_at(const ConfigSpace& space, std::uint64_t linear) {
    Configuration c;
    c.indices.reserve(space.dimensions.size());
    for (const auto& dim : space.dimensions) {
        const std::uint64_t k = dim.options.size();
        c.indices.push_back(std::uint32_t(linear % k));
        linear /= k;
    }
    return c;
}

inline std::uint64_t linear_index(const ConfigSpace& space, const Configuration& c) {
    std::uint64_t idx = 0;
    std::uint64_t radix = 1;
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        idx += radix * c.indices[i];
        radix *= space.dimensions[i].options.size();
    }
    return idx;
}

// One-hot encoding, dimension-major: length sum(|options_i|), exactly one 1
// per dimension block. Numeric input for the surrogate.
inline std::vector<double> encode(const ConfigSpace& space, const Configuration& c) {
    space.require_valid(c);
    std::size_t len = 0;
    for (const auto& dim : space.dimensions) len += dim.options.size();
    std::vector<double> v(len, 0.0);
    std::size_t base = 0;
    for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
        v[base + c.indices[i]] = 1.0;
        base += space.dimensions[i].options.size();
    }
    return v;
}

// Recovers the configuration from a one-hot vector produced by encode.
inline Configuration decode(const ConfigSpace& space, const std::vector<double>& v) {
    Configuration c;
    std::size_t base = 0;
    for (const auto& dim : space.dimensions) {
        const auto begin = v.begin() + base;
        const auto end = begin + dim.options.size();
        const auto hot = std::max_element(begin, end);
        c.indices.push_back(std::uint32_t(hot - begin));
        base += dim.options.size();
    }
    if (base != v.size()) throw ConfigError("decode: vector length does not match space");
    return c;
}

} // namespace psa
