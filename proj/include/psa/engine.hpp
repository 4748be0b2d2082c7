#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "psa/config_space.hpp"
#include "psa/csv.hpp"
#include "psa/evaluator.hpp"
#include "psa/solver.hpp"
#include "psa/strategies.hpp"

namespace psa {

enum class GlobalTimeMode { percent, dynamic_tries };
enum class TimeoutInitMode { static_value, first_runtime };
enum class EvolutionMode { static_value, geometric, luby };
enum class StopMode { timeout, first_solution, stagnation };

// Resolved run settings. Defaults follow the reference evaluation setup:
// rho = 0.2, tau0 = 5 s, beta = 1.5, T_g = 1800 s.
struct PsaSettings {
    double global_timeout_s = 1800.0;
    double probing_ratio = 0.2;
    GlobalTimeMode global_time_mode = GlobalTimeMode::percent;
    std::uint32_t max_tries = 30;

    TimeoutInitMode timeout_init = TimeoutInitMode::static_value;
    double initial_timeout_s = 5.0;

    EvolutionMode evolution = EvolutionMode::static_value;
    double geometric_beta = 1.5;
    double luby_base_s = 0.0; // 0: use the resolved initial timeout

    StopMode stop = StopMode::timeout;
    std::uint32_t stagnation_limit = 10;

    std::string strategy_name = "bo";
    BoParams bo;
    std::uint64_t seed = 0;

    void validate() const {
        if (global_timeout_s <= 0) throw ConfigError("global time limit must be > 0");
        if (probing_ratio < 0 || probing_ratio > 1)
            throw ConfigError("probing ratio must lie in [0, 1]");
        if (timeout_init == TimeoutInitMode::static_value && initial_timeout_s <= 0)
            throw ConfigError("static initial timeout must be > 0");
        if (evolution == EvolutionMode::geometric && geometric_beta <= 1)
            throw ConfigError("geometric growth factor must be > 1");
        if (stop == StopMode::stagnation && stagnation_limit < 1)
            throw ConfigError("stagnation limit must be >= 1");
        if (max_tries < 1) throw ConfigError("max_tries must be >= 1");
        if (stop == StopMode::first_solution && evolution != EvolutionMode::static_value)
            throw ConfigError("stop condition first-solution permits only the static "
                              "timeout evolution pattern");
        if (strategy_name != "random" && strategy_name != "grid" && strategy_name != "hamming" &&
            strategy_name != "bo")
            throw ConfigError("unknown strategy \"" + strategy_name + "\"");
    }

    // Component tokens, used in variant names and parsed back by the
    // frequency report: <global>-<init>-<evolution>-<stop>.
    std::string component_label() const {
        std::string s = global_time_mode == GlobalTimeMode::percent ? "percent" : "dynamic";
        s += timeout_init == TimeoutInitMode::static_value ? "-static" : "-firstrt";
        s += evolution == EvolutionMode::static_value ? "-static"
             : evolution == EvolutionMode::geometric  ? "-geometric"
                                                      : "-luby";
        s += stop == StopMode::timeout          ? "-timeout"
             : stop == StopMode::first_solution ? "-firstsol"
                                                : "-stagnation";
        return s;
    }
};

// --- compact settings strings (shared by the CLI and matrix files) ---------

inline std::pair<GlobalTimeMode, std::optional<std::uint32_t>> parse_global_time(
    const std::string& s) {
    if (s == "percent") return {GlobalTimeMode::percent, std::nullopt};
    if (s == "dynamic") return {GlobalTimeMode::dynamic_tries, std::nullopt};
    if (s.rfind("dynamic:", 0) == 0)
        return {GlobalTimeMode::dynamic_tries, std::uint32_t(std::stoul(s.substr(8)))};
    throw ConfigError("global time mode must be percent or dynamic[:tries], got \"" + s + "\"");
}

inline std::pair<TimeoutInitMode, std::optional<double>> parse_timeout_init(const std::string& s) {
    if (s == "first-runtime" || s == "firstrt") return {TimeoutInitMode::first_runtime, std::nullopt};
    if (s == "static") return {TimeoutInitMode::static_value, std::nullopt};
    if (s.rfind("static:", 0) == 0)
        return {TimeoutInitMode::static_value, std::stod(s.substr(7))};
    throw ConfigError("timeout init must be static[:seconds] or first-runtime, got \"" + s + "\"");
}

inline std::tuple<EvolutionMode, std::optional<double>, std::optional<double>> parse_evolution(
    const std::string& s) {
    if (s == "static") return {EvolutionMode::static_value, std::nullopt, std::nullopt};
    if (s == "geometric") return {EvolutionMode::geometric, std::nullopt, std::nullopt};
    if (s.rfind("geometric:", 0) == 0)
        return {EvolutionMode::geometric, std::stod(s.substr(10)), std::nullopt};
    if (s == "luby") return {EvolutionMode::luby, std::nullopt, std::nullopt};
    if (s.rfind("luby:", 0) == 0) return {EvolutionMode::luby, std::nullopt, std::stod(s.substr(5))};
    throw ConfigError("evolution must be static, geometric[:beta] or luby[:base], got \"" + s +
                      "\"");
}

inline std::pair<StopMode, std::optional<std::uint32_t>> parse_stop(const std::string& s) {
    if (s == "timeout") return {StopMode::timeout, std::nullopt};
    if (s == "first-solution" || s == "firstsol") return {StopMode::first_solution, std::nullopt};
    if (s == "stagnation") return {StopMode::stagnation, std::nullopt};
    if (s.rfind("stagnation:", 0) == 0)
        return {StopMode::stagnation, std::uint32_t(std::stoul(s.substr(11)))};
    throw ConfigError("stop must be timeout, first-solution or stagnation[:limit], got \"" + s +
                      "\"");
}

inline void apply_global_time(PsaSettings& st, const std::string& s) {
    auto [mode, tries] = parse_global_time(s);
    st.global_time_mode = mode;
    if (tries) st.max_tries = *tries;
}

inline void apply_timeout_init(PsaSettings& st, const std::string& s) {
    auto [mode, tau0] = parse_timeout_init(s);
    st.timeout_init = mode;
    if (tau0) st.initial_timeout_s = *tau0;
}

inline void apply_evolution(PsaSettings& st, const std::string& s) {
    auto [mode, beta, base] = parse_evolution(s);
    st.evolution = mode;
    if (beta) st.geometric_beta = *beta;
    if (base) st.luby_base_s = *base;
}

inline void apply_stop(PsaSettings& st, const std::string& s) {
    auto [mode, limit] = parse_stop(s);
    st.stop = mode;
    if (limit) st.stagnation_limit = *limit;
}

inline std::string global_time_string(const PsaSettings& st) {
    return st.global_time_mode == GlobalTimeMode::percent
               ? "percent"
               : "dynamic:" + std::to_string(st.max_tries);
}

inline std::string timeout_init_string(const PsaSettings& st) {
    return st.timeout_init == TimeoutInitMode::first_runtime
               ? "first-runtime"
               : "static:" + csv_number(st.initial_timeout_s);
}

inline std::string evolution_string(const PsaSettings& st) {
    switch (st.evolution) {
        case EvolutionMode::static_value: return "static";
        case EvolutionMode::geometric: return "geometric:" + csv_number(st.geometric_beta);
        case EvolutionMode::luby:
            return st.luby_base_s > 0 ? "luby:" + csv_number(st.luby_base_s) : "luby";
    }
    return "static";
}

inline std::string stop_string(const PsaSettings& st) {
    switch (st.stop) {
        case StopMode::timeout: return "timeout";
        case StopMode::first_solution: return "first-solution";
        case StopMode::stagnation: return "stagnation:" + std::to_string(st.stagnation_limit);
    }
    return "timeout";
}

inline nlohmann::json settings_to_json(const PsaSettings& st) {
    return nlohmann::json{{"global_timeout_s", st.global_timeout_s},
                          {"probing_ratio", st.probing_ratio},
                          {"global_time_mode", global_time_string(st)},
                          {"timeout_init", timeout_init_string(st)},
                          {"evolution", evolution_string(st)},
                          {"stop", stop_string(st)},
                          {"strategy", st.strategy_name},
                          {"seed", st.seed},
                          {"bo", {{"n_init", st.bo.n_init}, {"pool_random", st.bo.pool_random}}}};
}

inline PsaSettings settings_from_json(const nlohmann::json& j, PsaSettings base = {}) {
    detail::reject_unknown_keys(j,
                                {"global_timeout_s", "probing_ratio", "global_time_mode",
                                 "timeout_init", "evolution", "stop", "strategy", "seed", "bo"},
                                "settings");
    PsaSettings st = std::move(base);
    st.global_timeout_s = j.value("global_timeout_s", st.global_timeout_s);
    st.probing_ratio = j.value("probing_ratio", st.probing_ratio);
    if (j.contains("global_time_mode")) apply_global_time(st, j["global_time_mode"]);
    if (j.contains("timeout_init")) apply_timeout_init(st, j["timeout_init"]);
    if (j.contains("evolution")) apply_evolution(st, j["evolution"]);
    if (j.contains("stop")) apply_stop(st, j["stop"]);
    st.strategy_name = j.value("strategy", st.strategy_name);
    st.seed = j.value("seed", st.seed);
    if (j.contains("bo")) {
        detail::reject_unknown_keys(j["bo"], {"n_init", "pool_random"}, "bo settings");
        st.bo.n_init = j["bo"].value("n_init", st.bo.n_init);
        st.bo.pool_random = j["bo"].value("pool_random", st.bo.pool_random);
    }
    st.validate();
    return st;
}

// ---------------------------------------------------------------------------

// Probe/solve budget split: t_p = rho * T_g, t_s = T_g - t_p. The smaller
// share is recomputed from the larger one so t_p + t_s equals T_g exactly
// (Sterbenz: a - b is exact when b is within a factor 2 of a).
inline std::pair<double, double> allocate_time(double global_timeout_s, double probing_ratio) {
    if (global_timeout_s <= 0) throw ConfigError("global time limit must be > 0");
    if (probing_ratio < 0 || probing_ratio > 1)
        throw ConfigError("probing ratio must lie in [0, 1]");
    double t_p = global_timeout_s * probing_ratio;
    const double t_s = global_timeout_s - t_p;
    if (t_p < t_s) t_p = global_timeout_s - t_s;
    return {t_p, t_s};
}

// k-th value of the Luby sequence 1, 1, 2, 1, 1, 2, 4, ... (1-based).
inline std::uint64_t luby(std::uint64_t k) {
    if (k == 0) throw ConfigError("luby index starts at 1");
    for (;;) {
        std::uint64_t pow2 = 2; // 2^i, smallest with 2^i - 1 >= k
        while (pow2 - 1 < k) pow2 <<= 1;
        if (pow2 - 1 == k) return pow2 >> 1;
        k = k - (pow2 >> 1) + 1;
    }
}

// Memory array of Algorithm 1: configuration -> recorded result. Keys are
// never overwritten within a run.
class EvaluationCache {
public:
    struct Entry {
        std::optional<double> objective;
        double runtime_s = 0.0;
        SolverStatus status = SolverStatus::unknown;
    };

    const Entry* find(const Configuration& c) const {
        auto it = map_.find(c);
        return it == map_.end() ? nullptr : &it->second;
    }

    void insert(const Configuration& c, Entry e) {
        map_.emplace(c, std::move(e)); // no overwrite
    }

    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<Configuration, Entry, ConfigurationHash> map_;
};

// Mutable probing-loop state threaded through evolve().
struct ProbeState {
    std::optional<double> best_objective; // absent = the infinity sentinel
    Configuration best_config;
    std::uint32_t stagnation = 0;
    std::uint32_t round_index = 0;
    std::uint64_t luby_counter = 1;
    double current_timeout_s = 0.0;
    double initial_timeout_s = 0.0;
    double start_time_s = 0.0;
};

// Next round timeout. Static is a fixed point; geometric multiplies by
// beta; luby returns base * Luby(k), incrementing k after each call.
inline double evolve(const PsaSettings& settings, ProbeState& state) {
    switch (settings.evolution) {
        case EvolutionMode::static_value: return state.current_timeout_s;
        case EvolutionMode::geometric: return state.current_timeout_s * settings.geometric_beta;
        case EvolutionMode::luby: {
            const double base =
                settings.luby_base_s > 0 ? settings.luby_base_s : state.initial_timeout_s;
            return base * double(luby(state.luby_counter++));
        }
    }
    return state.current_timeout_s;
}

// One probing round (or the bootstrap run), as logged to rounds.csv.
struct TrialRecord {
    std::uint32_t round = 0; // 0 is the first-runtime bootstrap
    Configuration config;
    double granted_timeout_s = 0.0;
    SolverOutcome outcome;
    bool cache_hit = false;
    bool bootstrap = false;
};

struct InitTimeoutResult {
    double tau0_s = 0.0;
    std::optional<TrialRecord> bootstrap;
};

namespace detail {

inline std::string round_log_path(const std::string& run_dir, std::uint32_t round) {
    if (run_dir.empty()) return {};
    return run_dir + "/round_" + std::to_string(round) + ".log";
}

} // namespace detail

// Resolves the first round timeout. Static mode reads the setting;
// first-runtime mode runs the default configuration with the whole probe
// budget, stopping at the first solution, and adopts the observed runtime
// (clamped to [0.1 s, t_p]). A bootstrap ERROR falls back to the 5 s static
// baseline.
inline InitTimeoutResult init_timeout(const PsaSettings& settings, Evaluator& evaluator,
                                      const ConfigSpace& space, double probe_budget_s,
                                      Strategy& strategy, EvaluationCache& cache,
                                      const std::string& run_dir = {}) {
    if (settings.timeout_init == TimeoutInitMode::static_value)
        return {settings.initial_timeout_s, std::nullopt};

    if (probe_budget_s <= 0) {
        std::fprintf(stderr,
                     "psa: first-runtime timeout init needs a probing budget; "
                     "falling back to 5 s\n");
        return {5.0, std::nullopt};
    }

    const Configuration& def = space.default_config;
    SolverOutcome outcome = evaluator.evaluate(def, probe_budget_s, std::nullopt,
                                               EvalMode::first_solution,
                                               detail::round_log_path(run_dir, 0));
    TrialRecord rec;
    rec.round = 0;
    rec.config = def;
    rec.granted_timeout_s = probe_budget_s;
    rec.outcome = outcome;
    rec.bootstrap = true;

    double tau0;
    if (outcome.status == SolverStatus::error) {
        std::fprintf(stderr, "psa: first-runtime bootstrap failed; falling back to 5 s\n");
        tau0 = 5.0;
    } else {
        tau0 = std::clamp(outcome.runtime_s, 0.1, probe_budget_s);
    }
    cache.insert(def, {outcome.objective, outcome.runtime_s, outcome.status});
    strategy.update_model(def, outcome.objective, outcome.runtime_s);
    return {tau0, rec};
}

struct ProbeOutcome {
    Configuration best_config;
    std::optional<double> best_objective;
    double t_rem_s = 0.0;   // T_g minus elapsed, handed to the solving phase
    double elapsed_s = 0.0;
    std::vector<TrialRecord> rounds;
};

// Algorithm 1. Loops proposals under the probe budget (percent mode) or the
// trial cap (dynamic mode), reusing cached results, updating the incumbent
// on strict improvement, evolving the round timeout, and honoring the
// configured early stop. A round never receives more than the remaining
// budget.
inline ProbeOutcome probing_phase(Evaluator& evaluator, const ConfigSpace& space,
                                  Strategy& strategy, const PsaSettings& settings,
                                  EvaluationCache& cache, const TimeSource& clock,
                                  const std::string& run_dir = {}) {
    const auto [probe_budget, solve_budget] =
        allocate_time(settings.global_timeout_s, settings.probing_ratio);
    (void)solve_budget;
    const bool percent = settings.global_time_mode == GlobalTimeMode::percent;

    ProbeOutcome out;
    ProbeState state;
    state.best_config = space.default_config;
    state.start_time_s = clock.now_s();
    auto elapsed = [&] { return clock.now_s() - state.start_time_s; };

    if (percent && probe_budget <= 0) {
        out.best_config = state.best_config;
        out.t_rem_s = settings.global_timeout_s;
        return out;
    }

    InitTimeoutResult init =
        init_timeout(settings, evaluator, space, probe_budget, strategy, cache, run_dir);
    state.initial_timeout_s = init.tau0_s;
    state.current_timeout_s = init.tau0_s;
    if (init.bootstrap) {
        if (init.bootstrap->outcome.objective) {
            state.best_objective = init.bootstrap->outcome.objective;
            state.best_config = space.default_config;
        }
        out.rounds.push_back(*init.bootstrap);
    }

    const double budget_cap = percent ? probe_budget : settings.global_timeout_s;
    bool first_solution_met =
        settings.stop == StopMode::first_solution && state.best_objective.has_value();

    while (!first_solution_met) {
        if (percent) {
            if (elapsed() >= probe_budget) break;
        } else {
            if (state.round_index >= settings.max_tries) break;
            if (elapsed() >= settings.global_timeout_s) break;
        }
        const double remaining = budget_cap - elapsed();
        if (remaining <= 1e-3) break;

        std::optional<Configuration> proposal = strategy.next_config();
        if (!proposal) break;

        ++state.round_index;
        TrialRecord rec;
        rec.round = state.round_index;
        rec.config = *proposal;

        std::optional<double> objective;
        if (const EvaluationCache::Entry* hit = cache.find(*proposal)) {
            rec.cache_hit = true;
            rec.granted_timeout_s = 0.0;
            rec.outcome.status = hit->status;
            rec.outcome.objective = hit->objective;
            rec.outcome.runtime_s = 0.0; // reuse costs no wall time
            objective = hit->objective;
        } else {
            const double grant = std::min(state.current_timeout_s, remaining);
            rec.granted_timeout_s = grant;
            rec.outcome = evaluator.evaluate(*proposal, grant, std::nullopt, EvalMode::full,
                                             detail::round_log_path(run_dir, state.round_index));
            cache.insert(*proposal,
                         {rec.outcome.objective, rec.outcome.runtime_s, rec.outcome.status});
            objective = rec.outcome.objective;
        }

        if (objective && (!state.best_objective || *objective < *state.best_objective)) {
            state.best_objective = objective;
            state.best_config = *proposal;
            state.stagnation = 0;
        } else {
            ++state.stagnation;
        }

        strategy.update_model(*proposal, objective, rec.outcome.runtime_s);
        state.current_timeout_s = evolve(settings, state);
        out.rounds.push_back(std::move(rec));

        if (settings.stop == StopMode::first_solution && objective) break;
        if (settings.stop == StopMode::stagnation && state.stagnation >= settings.stagnation_limit)
            break;
    }

    out.best_config = state.best_config;
    out.best_objective = state.best_objective;
    out.elapsed_s = elapsed();
    out.t_rem_s = settings.global_timeout_s - out.elapsed_s;
    return out;
}

struct SolveOutcome {
    bool ran = false;
    SolverOutcome run;                    // the solving-phase run, when it happened
    std::optional<double> final_objective;
    SolverStatus final_status = SolverStatus::unknown;
    double elapsed_s = 0.0;
};

// Algorithm 2. With an incumbent, reruns the best configuration under the
// objective cut f < f*; without one, runs the fallback configuration uncut.
// The final answer reconciles the probe incumbent with the solve run: a cut
// run that times out leaves the incumbent standing.
inline SolveOutcome solving_phase(Evaluator& evaluator, const Configuration& best_config,
                                  std::optional<double> best_objective, double t_rem_s,
                                  const TimeSource& clock, const std::string& run_dir = {}) {
    SolveOutcome out;
    if (t_rem_s <= 0) {
        out.final_objective = best_objective;
        out.final_status =
            best_objective ? SolverStatus::satisfiable : SolverStatus::timeout;
        return out;
    }

    const double start = clock.now_s();
    const std::optional<double> bound =
        (best_objective && evaluator.supports_bound()) ? best_objective : std::nullopt;
    const std::string log =
        run_dir.empty() ? std::string() : run_dir + "/solve.log";
    out.run = evaluator.evaluate(best_config, t_rem_s, bound, EvalMode::full, log);
    out.ran = true;
    out.elapsed_s = clock.now_s() - start;

    if (out.run.objective && (!best_objective || *out.run.objective <= *best_objective)) {
        out.final_objective = out.run.objective;
        out.final_status = out.run.status;
    } else if (best_objective) {
        out.final_objective = best_objective;
        out.final_status = SolverStatus::satisfiable;
    } else {
        out.final_status = out.run.status;
    }
    return out;
}

struct PsaResult {
    std::optional<double> final_objective; // canonical minimize
    SolverStatus final_status = SolverStatus::unknown;
    Configuration best_config;
    std::vector<TrialRecord> probe_rounds;
    double probe_s = 0.0;
    double solve_s = 0.0;
    double total_wall_s = 0.0;
    std::string flags;
};

// Identification carried into the CSV logs.
struct RunMeta {
    std::string instance_id;
    std::string variant_name; // defaults to <strategy>-<component label>
};

namespace detail {

inline void write_rounds_csv(const std::string& path, const ConfigSpace& space,
                             const std::vector<TrialRecord>& rounds) {
    std::ofstream out(path);
    out << "round,flags,granted_timeout_s,status,objective,runtime_s\n";
    for (const auto& r : rounds) {
        out << csv_row({std::to_string(r.round), flags_string(space, r.config),
                        csv_number(r.granted_timeout_s), to_string(r.outcome.status),
                        csv_optional(r.outcome.objective), csv_number(r.outcome.runtime_s)});
    }
}

} // namespace detail

inline const char* results_csv_header() {
    return "instance,variant,strategy,seed,status,objective,runtime_s,flags";
}

// Algorithm 3: allocate, probe, solve, assemble. When run_dir is set it
// receives settings.json (written before any solver run), per-round logs,
// rounds.csv and a one-row run.csv.
inline PsaResult run_psa(Evaluator& evaluator, const ConfigSpace& space,
                         const PsaSettings& settings, const TimeSource& clock,
                         const std::string& run_dir = {}, const RunMeta& meta = {}) {
    settings.validate();
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        std::ofstream snapshot(run_dir + "/settings.json");
        snapshot << settings_to_json(settings).dump(2) << "\n";
    }

    const double t0 = clock.now_s();
    auto strategy = make_strategy(settings.strategy_name, space, settings.seed, settings.bo);
    EvaluationCache cache;

    ProbeOutcome probe =
        probing_phase(evaluator, space, *strategy, settings, cache, clock, run_dir);
    SolveOutcome solve = solving_phase(evaluator, probe.best_config, probe.best_objective,
                                       probe.t_rem_s, clock, run_dir);

    PsaResult result;
    result.final_objective = solve.final_objective;
    result.final_status = solve.final_status;
    result.best_config = probe.best_config;
    result.probe_rounds = std::move(probe.rounds);
    result.probe_s = probe.elapsed_s;
    result.solve_s = solve.elapsed_s;
    result.total_wall_s = clock.now_s() - t0;
    result.flags = flags_string(space, result.best_config);

    if (!run_dir.empty()) {
        detail::write_rounds_csv(run_dir + "/rounds.csv", space, result.probe_rounds);
        const std::string variant = meta.variant_name.empty()
                                        ? settings.strategy_name + "-" + settings.component_label()
                                        : meta.variant_name;
        std::ofstream run_csv(run_dir + "/run.csv");
        run_csv << results_csv_header() << "\n"
                << csv_row({meta.instance_id, variant, settings.strategy_name,
                            std::to_string(settings.seed), to_string(result.final_status),
                            csv_optional(result.final_objective), csv_number(result.total_wall_s),
                            result.flags});
    }
    return result;
}

} // namespace psa
