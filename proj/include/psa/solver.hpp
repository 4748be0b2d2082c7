#pragma once

#include <optional>
#include <string>

#include "psa/errors.hpp"

namespace psa {

enum class SolverStatus {
    optimum_found,
    satisfiable,
    unsatisfiable,
    timeout,
    error,
    unknown,
};

inline const char* to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::optimum_found: return "OPTIMUM_FOUND";
        case SolverStatus::satisfiable: return "SATISFIABLE";
        case SolverStatus::unsatisfiable: return "UNSATISFIABLE";
        case SolverStatus::timeout: return "TIMEOUT";
        case SolverStatus::error: return "ERROR";
        case SolverStatus::unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

inline SolverStatus status_from_string(const std::string& s) {
    if (s == "OPTIMUM_FOUND") return SolverStatus::optimum_found;
    if (s == "SATISFIABLE") return SolverStatus::satisfiable;
    if (s == "UNSATISFIABLE") return SolverStatus::unsatisfiable;
    if (s == "TIMEOUT") return SolverStatus::timeout;
    if (s == "ERROR") return SolverStatus::error;
    if (s == "UNKNOWN") return SolverStatus::unknown;
    throw ConfigError("unknown solver status \"" + s + "\"");
}

inline bool has_solution_status(SolverStatus s) {
    return s == SolverStatus::optimum_found || s == SolverStatus::satisfiable;
}

enum class ObjectiveSense { minimize, maximize };

inline ObjectiveSense sense_from_string(const std::string& s) {
    if (s == "minimize" || s == "min") return ObjectiveSense::minimize;
    if (s == "maximize" || s == "max") return ObjectiveSense::maximize;
    throw ConfigError("objective sense must be minimize or maximize, got \"" + s + "\"");
}

// Result of one solver run. The objective is canonical-minimize: a
// maximization objective is negated on ingest, so every comparison in the
// toolkit is "smaller is better". Invariant: objective is present iff the
// status is OPTIMUM_FOUND or SATISFIABLE.
struct SolverOutcome {
    SolverStatus status = SolverStatus::unknown;
    std::optional<double> objective;
    double runtime_s = 0.0;
    std::string raw_log_path;
};

// Restores the solver-native sign for human-readable output.
inline std::optional<double> restore_sense(std::optional<double> canonical, ObjectiveSense sense) {
    if (canonical && sense == ObjectiveSense::maximize) return -*canonical;
    return canonical;
}

} // namespace psa
