#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "psa/config_space.hpp"
#include "psa/evaluator.hpp"
#include "psa/solver.hpp"

namespace psa {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double hash_unit(std::uint64_t seed, std::uint64_t key, std::uint64_t salt) {
    const std::uint64_t h = splitmix64(splitmix64(seed ^ salt) ^ key);
    return double(h >> 11) * 0x1.0p-53;
}

} // namespace detail

// Deterministic stand-in for an external anytime solver. Every configuration
// has a best reachable objective q and a time to its first incumbent, both
// procedural functions of the landscape seed; the anytime curve starts at
// q + offset of the first improvement step and steps down to q. Quality is
// smooth in Hamming distance to a hidden optimum so that model-based search
// has structure to exploit.
struct SyntheticLandscape {
    ConfigSpace space;
    std::uint64_t seed = 0;
    Configuration optimum;

    double base_quality = 10.0;          // q at the optimum, before jitter
    double quality_slope = 5.0;          // added per unit of d_H to optimum
    double quality_jitter = 1.0;         // deterministic per-config noise < slope

    double time_to_first_s = 0.5;        // base seconds to the first incumbent
    double time_to_first_jitter = 0.5;   // relative spread of the above
    double curve_stretch = 4.0;          // curve duration = stretch * time_to_first

    // (fraction of [time_to_first, duration], objective offset above q).
    // Fractions ascend from 0 to 1, offsets descend to 0.
    std::vector<std::pair<double, double>> improvement_steps = {
        {0.0, 3.0}, {0.5, 1.0}, {1.0, 0.0}};

    void validate() const {
        if (!space.contains(optimum)) throw ConfigError("synthetic optimum not in space");
        if (quality_slope <= quality_jitter)
            throw ConfigError("synthetic landscape needs quality_slope > quality_jitter "
                              "for a unique optimum");
        if (improvement_steps.empty() || improvement_steps.front().first != 0.0 ||
            improvement_steps.back().first != 1.0 || improvement_steps.back().second != 0.0)
            throw ConfigError("improvement_steps must run from fraction 0 to 1 and end at offset 0");
        for (std::size_t i = 1; i < improvement_steps.size(); ++i) {
            if (improvement_steps[i].first < improvement_steps[i - 1].first ||
                improvement_steps[i].second > improvement_steps[i - 1].second)
                throw ConfigError("improvement_steps must be non-decreasing in time and "
                                  "non-increasing in objective");
        }
        if (time_to_first_s <= 0 || curve_stretch < 1.0)
            throw ConfigError("synthetic timing parameters out of range");
    }

    // Best reachable objective of c (canonical minimize).
    double quality(const Configuration& c) const {
        const double d = double(hamming_distance(c, optimum));
        const double u = detail::hash_unit(seed, linear_index(space, c), 0x71);
        return base_quality + quality_slope * d + quality_jitter * u;
    }

    double time_to_first(const Configuration& c) const {
        const double u = detail::hash_unit(seed, linear_index(space, c), 0x72);
        return time_to_first_s * (1.0 + time_to_first_jitter * u);
    }

    double curve_duration(const Configuration& c) const {
        return time_to_first(c) * curve_stretch;
    }

    // Objective available at elapsed time t, or nullopt before the first
    // incumbent. Non-increasing in t.
    std::optional<double> objective_at(const Configuration& c, double t) const {
        const double t_first = time_to_first(c);
        if (t < t_first) return std::nullopt;
        const double span = curve_duration(c) - t_first;
        const double q = quality(c);
        double obj = q + improvement_steps.front().second;
        for (const auto& [frac, offset] : improvement_steps) {
            if (t_first + frac * span <= t) obj = q + offset;
        }
        return obj;
    }
};

// Pure function of its inputs: same call, same outcome. The simulated run
// walks the config's anytime curve up to timeout_s; a bound that the curve
// cannot beat within the timeout turns the run into a TIMEOUT, mimicking an
// objective cut that makes the model harder.
inline SolverOutcome synth_evaluate(const SyntheticLandscape& land, const Configuration& c,
                                    double timeout_s, std::optional<double> bound = std::nullopt,
                                    EvalMode mode = EvalMode::full) {
    land.space.require_valid(c);
    SolverOutcome out;
    const double t_first = land.time_to_first(c);
    const double duration = land.curve_duration(c);
    const double q = land.quality(c);
    const double span = duration - t_first;

    if (mode == EvalMode::first_solution) {
        // Stop at the first incumbent that passes the cut, if any.
        for (const auto& [frac, offset] : land.improvement_steps) {
            const double t = t_first + frac * span;
            const double obj = q + offset;
            if (t > timeout_s) break;
            if (!bound || obj < *bound) {
                out.status = SolverStatus::satisfiable;
                out.objective = obj;
                out.runtime_s = t;
                return out;
            }
        }
        out.status = SolverStatus::timeout;
        out.runtime_s = timeout_s;
        return out;
    }

    const std::optional<double> reached = land.objective_at(c, timeout_s);
    if (!reached || (bound && *reached >= *bound)) {
        out.status = SolverStatus::timeout;
        out.runtime_s = timeout_s;
        return out;
    }
    const bool exhausted = timeout_s >= duration;
    out.status = exhausted ? SolverStatus::optimum_found : SolverStatus::satisfiable;
    out.objective = *reached;
    out.runtime_s = exhausted ? duration : timeout_s;
    return out;
}

// Evaluator over a synthetic landscape; advances the shared simulated clock
// by each run's simulated runtime, so whole PSA runs execute in microseconds
// of real time.
class SyntheticEvaluator final : public Evaluator {
public:
    SyntheticEvaluator(SyntheticLandscape landscape, SimulatedClock& clock)
        : landscape_(std::move(landscape)), clock_(clock) {
        landscape_.validate();
    }

    SolverOutcome evaluate(const Configuration& c, double timeout_s,
                           std::optional<double> bound = std::nullopt,
                           EvalMode mode = EvalMode::full,
                           const std::string& log_path = {}) override {
        (void)log_path; // no raw solver output to keep
        ++invocations_;
        SolverOutcome out = synth_evaluate(landscape_, c, timeout_s, bound, mode);
        clock_.advance(out.runtime_s);
        return out;
    }

    bool supports_bound() const override { return true; }
    double grace_s() const override { return 0.0; }

    const SyntheticLandscape& landscape() const { return landscape_; }

private:
    SyntheticLandscape landscape_;
    SimulatedClock& clock_;
};

// Reads a synthetic instance file:
//   { "synthetic": { "seed": 1, "optimum": [...], "base_quality": ...,
//                    "quality_slope": ..., "quality_jitter": ...,
//                    "time_to_first": ..., "time_to_first_jitter": ...,
//                    "curve_stretch": ..., "improvement_steps": [[f, off], ...] } }
// "optimum" gives option labels in dimension order; when absent the optimum
// is drawn from the seed.
inline SyntheticLandscape load_landscape_json(const nlohmann::json& doc, const ConfigSpace& space) {
    if (!doc.is_object() || !doc.contains("synthetic") || !doc["synthetic"].is_object())
        throw ConfigError("synthetic instance file needs a \"synthetic\" object");
    const auto& s = doc["synthetic"];
    detail::reject_unknown_keys(
        s,
        {"seed", "optimum", "base_quality", "quality_slope", "quality_jitter", "time_to_first",
         "time_to_first_jitter", "curve_stretch", "improvement_steps"},
        "synthetic instance");

    SyntheticLandscape land;
    land.space = space;
    land.seed = s.value("seed", std::uint64_t(0));
    land.base_quality = s.value("base_quality", land.base_quality);
    land.quality_slope = s.value("quality_slope", land.quality_slope);
    land.quality_jitter = s.value("quality_jitter", land.quality_jitter);
    land.time_to_first_s = s.value("time_to_first", land.time_to_first_s);
    land.time_to_first_jitter = s.value("time_to_first_jitter", land.time_to_first_jitter);
    land.curve_stretch = s.value("curve_stretch", land.curve_stretch);
    if (s.contains("improvement_steps")) {
        land.improvement_steps.clear();
        for (const auto& step : s["improvement_steps"])
            land.improvement_steps.emplace_back(step.at(0).get<double>(),
                                                step.at(1).get<double>());
    }
    if (s.contains("optimum")) {
        Configuration opt;
        const auto& labels = s["optimum"];
        if (!labels.is_array() || labels.size() != space.dimension_count())
            throw ConfigError("synthetic optimum needs one label per dimension");
        for (std::size_t i = 0; i < space.dimensions.size(); ++i) {
            auto idx = space.dimensions[i].option_index(labels[i].get<std::string>());
            if (!idx)
                throw ConfigError("synthetic optimum label not in dimension \"" +
                                  space.dimensions[i].name + "\"");
            opt.indices.push_back(*idx);
        }
        land.optimum = std::move(opt);
    } else {
        land.optimum = config_at(space, detail::splitmix64(land.seed) % cardinality(space));
    }
    land.validate();
    return land;
}

inline SyntheticLandscape load_landscape(const std::string& path, const ConfigSpace& space) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synthetic instance file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed synthetic instance " + path + ": " + e.what());
    }
    return load_landscape_json(doc, space);
}

} // namespace psa
