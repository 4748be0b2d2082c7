#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "psa/adapter.hpp"
#include "psa/engine.hpp"
#include "psa/synthetic.hpp"

namespace psa {

struct BenchInstance {
    std::string id;   // the path as written in the matrix
    std::string path;
    ObjectiveSense sense = ObjectiveSense::minimize;
};

struct BenchVariant {
    std::string name;
    PsaSettings settings;
};

// One benchmark campaign: every (instance, variant, seed) cell is a PSA run.
struct ExperimentMatrix {
    ConfigSpace space;
    std::optional<AdapterSpec> adapter; // nullopt: built-in synthetic solver
    std::vector<BenchInstance> instances;
    std::vector<BenchVariant> variants;
    std::vector<std::uint64_t> seeds{0};
    unsigned parallelism = 1;

    void validate() const {
        if (instances.empty()) throw ConfigError("experiment matrix has no instances");
        if (variants.empty()) throw ConfigError("experiment matrix has no variants");
        if (seeds.empty()) throw ConfigError("experiment matrix has no seeds");
        std::set<std::string> names;
        for (const auto& v : variants) {
            if (!names.insert(v.name).second)
                throw ConfigError("duplicate variant name \"" + v.name + "\"");
            v.settings.validate();
        }
    }
};

// The full-factorial variant set: 18 static-init combinations
// (2 global x 3 evolution x 3 stop) plus 6 first-runtime combinations
// (2 global x static evolution x 3 stop). Cells whose slot pairs a
// first-solution stop with a dynamic evolution keep their slot name but run
// with static evolution, since a first-solution probe never evolves its
// timeout anyway.
inline std::vector<BenchVariant> factorial_variants(const std::string& strategy,
                                                    const PsaSettings& base) {
    const std::pair<GlobalTimeMode, const char*> globals[] = {
        {GlobalTimeMode::percent, "percent"}, {GlobalTimeMode::dynamic_tries, "dynamic"}};
    const std::pair<EvolutionMode, const char*> evolutions[] = {
        {EvolutionMode::static_value, "static"},
        {EvolutionMode::geometric, "geometric"},
        {EvolutionMode::luby, "luby"}};
    const std::pair<StopMode, const char*> stops[] = {{StopMode::timeout, "timeout"},
                                                      {StopMode::first_solution, "firstsol"},
                                                      {StopMode::stagnation, "stagnation"}};

    std::vector<BenchVariant> out;
    auto add = [&](GlobalTimeMode g, const char* gname, TimeoutInitMode init, const char* iname,
                   EvolutionMode e, const char* ename, StopMode s, const char* sname) {
        BenchVariant v;
        v.settings = base;
        v.settings.strategy_name = strategy;
        v.settings.global_time_mode = g;
        v.settings.timeout_init = init;
        v.settings.evolution = e;
        v.settings.stop = s;
        if (s == StopMode::first_solution) v.settings.evolution = EvolutionMode::static_value;
        v.settings.validate();
        v.name = strategy;
        for (const char* tok : {gname, iname, ename, sname}) {
            v.name += '-';
            v.name += tok;
        }
        out.push_back(std::move(v));
    };

    for (const auto& [g, gname] : globals)
        for (const auto& [e, ename] : evolutions)
            for (const auto& [s, sname] : stops)
                add(g, gname, TimeoutInitMode::static_value, "static", e, ename, s, sname);
    for (const auto& [g, gname] : globals)
        for (const auto& [s, sname] : stops)
            add(g, gname, TimeoutInitMode::first_runtime, "firstrt", EvolutionMode::static_value,
                "static", s, sname);
    return out;
}

// Matrix file:
//   { "space": "space.json", "adapter": "synthetic" | "adapter.json",
//     "objective_sense": "minimize", "instances": ["i1.json", ...],
//     "defaults": { ...settings... },
//     "variants": [ {"name": "...", ...settings...}, ... ] | "factorial": "bo",
//     "seeds": [0], "parallelism": 1 }
// Relative paths resolve against the matrix file's directory.
inline ExperimentMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open matrix file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed matrix file " + path + ": " + e.what());
    }
    detail::reject_unknown_keys(doc,
                                {"space", "adapter", "objective_sense", "instances", "defaults",
                                 "variants", "factorial", "seeds", "parallelism"},
                                "matrix file");

    const auto base_dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base_dir / fp).string();
    };

    ExperimentMatrix m;
    if (!doc.contains("space")) throw ConfigError("matrix file missing \"space\"");
    m.space = load_space(resolve(doc["space"].get<std::string>()));

    const std::string adapter = doc.value("adapter", std::string("synthetic"));
    if (adapter != "synthetic") m.adapter = load_adapter(resolve(adapter));

    const ObjectiveSense sense = sense_from_string(doc.value("objective_sense", "minimize"));
    if (!doc.contains("instances") || !doc["instances"].is_array())
        throw ConfigError("matrix file needs an \"instances\" array");
    for (const auto& inst : doc["instances"]) {
        const std::string p = inst.get<std::string>();
        m.instances.push_back({p, resolve(p), sense});
    }

    PsaSettings defaults;
    if (doc.contains("defaults")) defaults = settings_from_json(doc["defaults"]);

    if (doc.contains("variants") == doc.contains("factorial"))
        throw ConfigError("matrix file needs exactly one of \"variants\" or \"factorial\"");
    if (doc.contains("factorial")) {
        m.variants = factorial_variants(doc["factorial"].get<std::string>(), defaults);
    } else {
        for (const auto& v : doc["variants"]) {
            if (!v.contains("name")) throw ConfigError("matrix variant missing \"name\"");
            nlohmann::json body = v;
            body.erase("name");
            m.variants.push_back(
                {v["name"].get<std::string>(), settings_from_json(body, defaults)});
        }
    }

    if (doc.contains("seeds")) {
        m.seeds.clear();
        for (const auto& s : doc["seeds"]) m.seeds.push_back(s.get<std::uint64_t>());
    }
    m.parallelism = doc.value("parallelism", 1u);
    m.validate();
    return m;
}

// One line of results.csv.
struct ResultRow {
    std::string instance;
    std::string variant;
    std::string strategy;
    std::uint64_t seed = 0;
    SolverStatus status = SolverStatus::unknown;
    std::optional<double> objective; // canonical minimize
    double runtime_s = 0.0;
    std::string flags;
};

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file: " + path);
    std::vector<ResultRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("instance,", 0) == 0) continue; // header
        }
        const auto f = csv_parse_line(line);
        if (f.size() != 8) throw ConfigError("bad results row (want 8 fields): " + line);
        ResultRow r;
        r.instance = f[0];
        r.variant = f[1];
        r.strategy = f[2];
        r.seed = std::stoull(f[3]);
        r.status = status_from_string(f[4]);
        if (!f[5].empty()) r.objective = std::stod(f[5]);
        r.runtime_s = f[6].empty() ? 0.0 : std::stod(f[6]);
        r.flags = f[7];
        rows.push_back(std::move(r));
    }
    return rows;
}

struct MatrixRunStats {
    std::size_t cells = 0;
    std::size_t resumed = 0;
    std::size_t executed = 0;
    std::size_t errors = 0;
};

// Executes every (instance, variant, seed) cell, up to `parallelism` at a
// time. Rows are appended under a single-writer lock and flushed per row;
// cells already present in the results file are skipped, which makes an
// interrupted campaign resumable. Cell failures become ERROR rows, never
// aborts. run_root, when set, gives each cell its own run directory.
inline MatrixRunStats run_matrix(const ExperimentMatrix& matrix, const std::string& results_path,
                                 const std::string& run_root = {}) {
    matrix.validate();

    std::set<std::string> done;
    if (std::filesystem::exists(results_path)) {
        for (const auto& row : read_results_csv(results_path))
            done.insert(row.instance + "\x1f" + row.variant + "\x1f" + std::to_string(row.seed));
    } else {
        std::ofstream header(results_path);
        header << results_csv_header() << "\n";
    }

    struct Cell {
        const BenchInstance* instance;
        const BenchVariant* variant;
        std::uint64_t seed;
    };
    std::vector<Cell> todo;
    MatrixRunStats stats;
    for (const auto& inst : matrix.instances)
        for (const auto& var : matrix.variants)
            for (const auto seed : matrix.seeds) {
                ++stats.cells;
                const std::string key =
                    inst.id + "\x1f" + var.name + "\x1f" + std::to_string(seed);
                if (done.count(key)) {
                    ++stats.resumed;
                    continue;
                }
                todo.push_back({&inst, &var, seed});
            }

    std::ofstream out(results_path, std::ios::app);
    std::mutex write_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> errors{0};

    auto sanitize = [](std::string s) {
        for (char& ch : s)
            if (ch == '/' || ch == '\\' || ch == ' ') ch = '_';
        return s;
    };

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            const Cell& cell = todo[i];
            PsaSettings settings = cell.variant->settings;
            settings.seed = cell.seed;

            ResultRow row;
            row.instance = cell.instance->id;
            row.variant = cell.variant->name;
            row.strategy = settings.strategy_name;
            row.seed = cell.seed;

            std::string run_dir;
            if (!run_root.empty())
                run_dir = run_root + "/" + sanitize(cell.instance->id) + "__" +
                          cell.variant->name + "__s" + std::to_string(cell.seed);
            try {
                RunMeta meta{cell.instance->id, cell.variant->name};
                PsaResult result;
                if (matrix.adapter) {
                    SteadyClock clock;
                    SubprocessEvaluator eval(*matrix.adapter,
                                             {cell.instance->path, cell.instance->sense},
                                             matrix.space);
                    result = run_psa(eval, matrix.space, settings, clock, run_dir, meta);
                } else {
                    SimulatedClock clock;
                    SyntheticEvaluator eval(load_landscape(cell.instance->path, matrix.space),
                                            clock);
                    result = run_psa(eval, matrix.space, settings, clock, run_dir, meta);
                }
                row.status = result.final_status;
                row.objective = result.final_objective;
                row.runtime_s = result.total_wall_s;
                row.flags = result.flags;
            } catch (const std::exception& e) {
                row.status = SolverStatus::error;
                row.flags = std::string("error: ") + e.what();
                ++errors;
            }

            std::lock_guard<std::mutex> lock(write_mutex);
            out << csv_row({row.instance, row.variant, row.strategy, std::to_string(row.seed),
                            to_string(row.status), csv_optional(row.objective),
                            csv_number(row.runtime_s), row.flags});
            out.flush();
        }
    };

    const unsigned n_threads = std::max(1u, matrix.parallelism);
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    stats.executed = todo.size();
    stats.errors = errors.load();
    return stats;
}

// --- analyses ---------------------------------------------------------------

enum class Verdict { a_wins, tie, b_wins };

struct ComparisonReport {
    std::size_t joined = 0;
    std::size_t only_a = 0;
    std::size_t only_b = 0;
    std::size_t a_wins = 0;
    std::size_t ties = 0;
    std::size_t b_wins = 0;
    std::vector<std::pair<std::string, Verdict>> verdicts; // per joined instance

    double a_pct() const { return joined ? 100.0 * double(a_wins) / double(joined) : 0.0; }
    double tie_pct() const { return joined ? 100.0 * double(ties) / double(joined) : 0.0; }
    double b_pct() const { return joined ? 100.0 * double(b_wins) / double(joined) : 0.0; }
};

namespace detail {

// Best row per instance: any objective beats none; lower objective wins;
// seeds collapse into their best run.
inline std::map<std::string, ResultRow> best_per_instance(const std::vector<ResultRow>& rows) {
    std::map<std::string, ResultRow> best;
    for (const auto& row : rows) {
        auto it = best.find(row.instance);
        if (it == best.end()) {
            best.emplace(row.instance, row);
            continue;
        }
        const ResultRow& cur = it->second;
        const bool better = (row.objective && !cur.objective) ||
                            (row.objective && cur.objective && *row.objective < *cur.objective);
        if (better) it->second = row;
    }
    return best;
}

} // namespace detail

// Instance-level win/tie/loss. A side wins on strictly better canonical
// objective or on having a solution the other side lacks; equal objectives
// and mutual failure are ties. Only verdict order matters, so any strictly
// monotone rescaling of both sides leaves the report unchanged.
inline ComparisonReport pairwise_compare(const std::vector<ResultRow>& rows_a,
                                         const std::vector<ResultRow>& rows_b) {
    const auto best_a = detail::best_per_instance(rows_a);
    const auto best_b = detail::best_per_instance(rows_b);

    ComparisonReport rep;
    for (const auto& [inst, a] : best_a) {
        auto itb = best_b.find(inst);
        if (itb == best_b.end()) {
            ++rep.only_a;
            continue;
        }
        const ResultRow& b = itb->second;
        Verdict v;
        if (a.objective && b.objective) {
            v = *a.objective < *b.objective   ? Verdict::a_wins
                : *b.objective < *a.objective ? Verdict::b_wins
                                              : Verdict::tie;
        } else if (a.objective) {
            v = Verdict::a_wins;
        } else if (b.objective) {
            v = Verdict::b_wins;
        } else {
            v = Verdict::tie;
        }
        ++rep.joined;
        if (v == Verdict::a_wins)
            ++rep.a_wins;
        else if (v == Verdict::b_wins)
            ++rep.b_wins;
        else
            ++rep.ties;
        rep.verdicts.emplace_back(inst, v);
    }
    for (const auto& [inst, b] : best_b)
        if (!best_a.count(inst)) ++rep.only_b;
    if (rep.joined == 0) throw ConfigError("pairwise comparison: no common instances");
    return rep;
}

// The four component dimensions of a variant name
// <strategy>-<global>-<init>-<evolution>-<stop>.
struct VariantComponents {
    std::string global_time;
    std::string round_timeout;
    std::string evolution;
    std::string stop_condition;
};

inline VariantComponents parse_variant_components(const std::string& name) {
    std::vector<std::string> toks;
    std::stringstream ss(name);
    std::string tok;
    while (std::getline(ss, tok, '-')) toks.push_back(tok);
    if (toks.size() < 4)
        throw ConfigError("variant name \"" + name +
                          "\" does not carry component tokens "
                          "(<strategy>-<global>-<init>-<evolution>-<stop>)");
    const std::size_t n = toks.size();
    return {toks[n - 4], toks[n - 3], toks[n - 2], toks[n - 1]};
}

struct FrequencyTable {
    // component -> (strategy value -> share in percent of winning instances)
    std::vector<std::tuple<std::string, std::string, double>> entries;
    std::size_t instances_counted = 0;
};

// Per instance, the variant(s) with the best canonical objective win; tied
// winners share the instance fractionally (1/t each). Credits aggregate per
// component dimension, so each component's shares sum to 100%.
inline FrequencyTable strategy_frequency(const std::vector<ResultRow>& rows) {
    std::set<std::string> variant_names;
    for (const auto& row : rows) variant_names.insert(row.variant);
    if (variant_names.size() < 2)
        throw ConfigError("strategy_frequency needs results from at least 2 variants");

    // best objective per (instance, variant), seeds collapsed
    std::map<std::string, std::map<std::string, std::optional<double>>> table;
    for (const auto& row : rows) {
        auto& slot = table[row.instance][row.variant];
        if (row.objective && (!slot || *row.objective < *slot)) slot = row.objective;
    }

    const char* component_names[4] = {"global_time", "round_timeout", "timeout_evolution",
                                      "stop_condition"};
    std::map<std::string, std::map<std::string, double>> credit; // component -> value -> credit
    for (const auto& name : variant_names) {
        // zero rows for every value in play, so losing strategies show 0%
        const VariantComponents c = parse_variant_components(name);
        credit[component_names[0]][c.global_time];
        credit[component_names[1]][c.round_timeout];
        credit[component_names[2]][c.evolution];
        credit[component_names[3]][c.stop_condition];
    }
    std::size_t counted = 0;

    for (const auto& [instance, by_variant] : table) {
        std::optional<double> best;
        for (const auto& [variant, obj] : by_variant)
            if (obj && (!best || *obj < *best)) best = obj;
        if (!best) continue; // nobody solved it: no winner to credit
        std::vector<const std::string*> winners;
        for (const auto& [variant, obj] : by_variant)
            if (obj && *obj == *best) winners.push_back(&variant);
        ++counted;
        const double share = 1.0 / double(winners.size());
        for (const auto* winner : winners) {
            const VariantComponents c = parse_variant_components(*winner);
            credit[component_names[0]][c.global_time] += share;
            credit[component_names[1]][c.round_timeout] += share;
            credit[component_names[2]][c.evolution] += share;
            credit[component_names[3]][c.stop_condition] += share;
        }
    }
    if (counted == 0) throw ConfigError("strategy_frequency: no instance has a solved row");

    FrequencyTable out;
    out.instances_counted = counted;
    for (const char* comp : component_names)
        for (const auto& [value, c] : credit[comp])
            out.entries.emplace_back(comp, value, 100.0 * c / double(counted));
    return out;
}

// --- report rendering -------------------------------------------------------

inline std::string format_pct(double pct) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
    return buf;
}

inline std::string render_comparison_text(const std::string& label_a, const std::string& label_b,
                                          const ComparisonReport& rep) {
    std::ostringstream os;
    os << "Performance Comparison Summary (Percentage of Instances)\n";
    os << "tie rule: equal canonical objectives, or neither side solved\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-40s %10s %10s %10s\n", "Comparison", "Winner A", "Tie",
                  "Winner B");
    os << line;
    const std::string label = label_a + " vs " + label_b;
    std::snprintf(line, sizeof(line), "%-40s %10s %10s %10s\n", label.c_str(),
                  format_pct(rep.a_pct()).c_str(), format_pct(rep.tie_pct()).c_str(),
                  format_pct(rep.b_pct()).c_str());
    os << line;
    os << "\ninstances joined: " << rep.joined << " (only in A: " << rep.only_a
       << ", only in B: " << rep.only_b << ")\n";
    return os.str();
}

inline std::string render_comparison_csv(const ComparisonReport& rep) {
    std::string out = "instance,verdict\n";
    for (const auto& [inst, v] : rep.verdicts) {
        out += csv_row({inst, v == Verdict::a_wins  ? "A"
                              : v == Verdict::b_wins ? "B"
                                                     : "tie"});
    }
    return out;
}

inline std::string render_frequency_text(const FrequencyTable& table) {
    std::ostringstream os;
    os << "PSA Component Strategy Frequencies (" << table.instances_counted
       << " instances with a winner)\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %-16s %10s\n", "Component", "Strategy", "Wins");
    os << line;
    std::string last;
    for (const auto& [comp, value, pct] : table.entries) {
        std::snprintf(line, sizeof(line), "%-20s %-16s %9.2f%%\n",
                      comp == last ? "" : comp.c_str(), value.c_str(), pct);
        os << line;
        last = comp;
    }
    return os.str();
}

inline std::string render_frequency_csv(const FrequencyTable& table) {
    std::string out = "component,strategy,win_pct\n";
    for (const auto& [comp, value, pct] : table.entries)
        out += csv_row({comp, value, csv_number(pct)});
    return out;
}

} // namespace psa
