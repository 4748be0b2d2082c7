#pragma once

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "psa/config_space.hpp"
#include "psa/evaluator.hpp"
#include "psa/solver.hpp"

namespace psa {

// Formats seconds the way they appear on a command line: no trailing zeros,
// "5" not "5.000000".
inline std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", s);
    return buf;
}

// Reification of one solver's command-line contract: how to launch it, how
// to read its output, and how to inject an objective cut.
struct AdapterSpec {
    std::string command_template;             // needs {instance} and {timeout_s}
    std::string objective_pattern;            // regex with one capture group
    std::map<std::string, SolverStatus> status_map;
    std::string bound_template;               // optional, "{bound}" placeholder
    double grace_s = 2.0;

    bool supports_bound() const { return !bound_template.empty(); }

    void validate() const {
        if (command_template.find("{instance}") == std::string::npos ||
            command_template.find("{timeout_s}") == std::string::npos)
            throw ConfigError("adapter command must contain {instance} and {timeout_s}");
        if (!bound_template.empty() && bound_template.find("{bound}") == std::string::npos)
            throw ConfigError("adapter bound_flag must contain {bound}");
        try {
            std::regex re(objective_pattern);
            if (re.mark_count() != 1)
                throw ConfigError("adapter objective_pattern needs exactly one capture group");
        } catch (const std::regex_error& e) {
            throw ConfigError(std::string("bad objective_pattern: ") + e.what());
        }
    }
};

// One tuning problem: an opaque instance file fed to the solver, plus the
// objective sense used to canonicalize parsed values.
struct SolverTask {
    std::string instance_path;
    ObjectiveSense objective_sense = ObjectiveSense::minimize;
};

// Adapter file:
//   { "command": "...", "objective_pattern": "...",
//     "status_tokens": {"OPTIMUM FOUND": "OPTIMUM_FOUND", ...},
//     "bound_flag": "-ub={bound}", "grace_s": 2 }
inline AdapterSpec load_adapter_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("adapter file must be a JSON object");
    detail::reject_unknown_keys(
        doc, {"command", "objective_pattern", "status_tokens", "bound_flag", "grace_s"},
        "adapter file");
    AdapterSpec spec;
    if (!doc.contains("command")) throw ConfigError("adapter file missing \"command\"");
    spec.command_template = doc["command"].get<std::string>();
    spec.objective_pattern = doc.value("objective_pattern", "^o (-?[0-9.eE+-]+)");
    if (doc.contains("status_tokens")) {
        for (auto it = doc["status_tokens"].begin(); it != doc["status_tokens"].end(); ++it)
            spec.status_map[it.key()] = status_from_string(it.value().get<std::string>());
    }
    spec.bound_template = doc.value("bound_flag", "");
    spec.grace_s = doc.value("grace_s", 2.0);
    spec.validate();
    return spec;
}

inline AdapterSpec load_adapter(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open adapter file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed adapter file " + path + ": " + e.what());
    }
    return load_adapter_json(doc);
}

namespace detail {

inline void append_tokens(std::vector<std::string>& out, const std::string& rendered) {
    std::istringstream ss(rendered);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
}

} // namespace detail

// Deterministic substitution of the command template into an argument
// vector. {params} expands each dimension's flag template with the chosen
// option label, joined in dimension order; {bound} expands only when a bound
// is present. The result is logged verbatim, so it must be reproducible.
inline std::vector<std::string> render_command(const AdapterSpec& spec, const SolverTask& task,
                                               const ConfigSpace& space, const Configuration& c,
                                               double timeout_s,
                                               std::optional<double> bound = std::nullopt) {
    space.require_valid(c);
    const std::string params = flags_string(space, c);

    std::vector<std::string> argv;
    std::istringstream ss(spec.command_template);
    std::string tok;
    bool bound_rendered = false;
    while (ss >> tok) {
        if (tok == "{params}") {
            detail::append_tokens(argv, params);
            continue;
        }
        if (tok.find("{bound}") != std::string::npos) {
            if (!bound) throw ConfigError("command template references {bound} but no bound given");
            detail::append_tokens(
                argv, detail::replace_all(tok, "{bound}", format_seconds(*bound)));
            bound_rendered = true;
            continue;
        }
        tok = detail::replace_all(tok, "{instance}", task.instance_path);
        tok = detail::replace_all(tok, "{timeout_s}", format_seconds(timeout_s));
        tok = detail::replace_all(tok, "{params}", params);
        if (tok.find('{') != std::string::npos && tok.find('}') != std::string::npos)
            throw ConfigError("unresolved placeholder in command token: " + tok);
        argv.push_back(tok);
    }
    if (bound && !bound_rendered) {
        if (!spec.supports_bound())
            throw ConfigError("bound given but adapter has no bound_flag");
        detail::append_tokens(
            argv, detail::replace_all(spec.bound_template, "{bound}", format_seconds(*bound)));
    }
    if (argv.empty()) throw ConfigError("adapter command rendered to an empty argument vector");
    return argv;
}

// Objective = last match of the pattern (anytime solvers print improving
// incumbents, so the last is the best); status = mapping of the status token
// that appears last in the output, UNKNOWN when none does. Unparseable
// output is (UNKNOWN, absent), never an error.
inline std::pair<SolverStatus, std::optional<double>> parse_output(const std::string& raw,
                                                                   const AdapterSpec& spec) {
    std::optional<double> objective;
    try {
        std::regex re(spec.objective_pattern, std::regex::ECMAScript | std::regex::multiline);
        for (auto it = std::sregex_iterator(raw.begin(), raw.end(), re);
             it != std::sregex_iterator(); ++it) {
            try {
                objective = std::stod((*it)[1].str());
            } catch (const std::exception&) {
                // non-numeric capture: skip
            }
        }
    } catch (const std::regex_error&) {
        // pattern was validated at load; a failure here means no objective
    }

    SolverStatus status = SolverStatus::unknown;
    std::size_t best_pos = std::string::npos;
    for (const auto& [token, mapped] : spec.status_map) {
        const std::size_t pos = raw.rfind(token);
        if (pos != std::string::npos && (best_pos == std::string::npos || pos > best_pos)) {
            best_pos = pos;
            status = mapped;
        }
    }
    return {status, objective};
}

struct ProcessResult {
    std::string output;
    int exit_code = -1;       // -1: killed or failed to reap normally
    bool spawn_failed = false;
    bool killed = false;      // hard deadline hit
    double runtime_s = 0.0;
};

// Runs argv with output capture and a hard wall-clock deadline. The child is
// placed in its own process group and the whole group is SIGKILLed when the
// deadline passes, so hanging solvers cannot outlive their budget.
inline ProcessResult run_process(const std::vector<std::string>& argv, double deadline_s) {
    ProcessResult res;
    int pipefd[2];
    if (pipe(pipefd) != 0) {
        res.spawn_failed = true;
        return res;
    }

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        res.spawn_failed = true;
        return res;
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(pipefd[1], STDOUT_FILENO);
        dup2(pipefd[1], STDERR_FILENO);
        close(pipefd[0]);
        close(pipefd[1]);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    setpgid(pid, pid); // also from the parent side: closes the race with exec
    close(pipefd[1]);
    fcntl(pipefd[0], F_SETFL, O_NONBLOCK);

    char buf[4096];
    bool exited = false;
    int status = 0;
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    auto drain = [&] {
        for (;;) {
            const ssize_t n = read(pipefd[0], buf, sizeof(buf));
            if (n > 0)
                res.output.append(buf, std::size_t(n));
            else
                break;
        }
    };

    while (!exited) {
        drain();
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) {
            exited = true;
            break;
        }
        if (elapsed() >= deadline_s) {
            kill(-pid, SIGKILL);
            res.killed = true;
            waitpid(pid, &status, 0);
            exited = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    drain();
    close(pipefd[0]);

    res.runtime_s = elapsed();
    if (!res.killed && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
    if (res.exit_code == 127) res.spawn_failed = true;
    return res;
}

// Evaluator that shells out to an external solver. Soft limit: {timeout_s}
// is passed to the solver; hard limit: the process group is killed at
// timeout_s + grace_s. Solver failures become status ERROR, never
// exceptions.
class SubprocessEvaluator final : public Evaluator {
public:
    SubprocessEvaluator(AdapterSpec spec, SolverTask task, ConfigSpace space)
        : spec_(std::move(spec)), task_(std::move(task)), space_(std::move(space)) {
        spec_.validate();
        std::ifstream probe(task_.instance_path);
        if (!probe) throw ConfigError("instance file missing or unreadable: " + task_.instance_path);
    }

    SolverOutcome evaluate(const Configuration& c, double timeout_s,
                           std::optional<double> bound = std::nullopt,
                           EvalMode mode = EvalMode::full,
                           const std::string& log_path = {}) override {
        (void)mode; // external solvers run their course; runtime is observed
        ++invocations_;
        const std::optional<double> native_bound = restore_sense(bound, task_.objective_sense);
        const auto argv = render_command(spec_, task_, space_, c, timeout_s, native_bound);
        last_command_ = join(argv);

        ProcessResult proc = run_process(argv, timeout_s + spec_.grace_s);
        if (!log_path.empty()) {
            std::ofstream log(log_path);
            log << "# command: " << last_command_ << "\n" << proc.output;
        }

        SolverOutcome out;
        out.runtime_s = std::min(proc.runtime_s, timeout_s + spec_.grace_s);
        out.raw_log_path = log_path;
        auto [status, objective] = parse_output(proc.output, spec_);
        if (objective && task_.objective_sense == ObjectiveSense::maximize)
            objective = -*objective;

        if (proc.spawn_failed) {
            out.status = SolverStatus::error;
            return out;
        }
        if (proc.killed && status == SolverStatus::unknown) status = SolverStatus::timeout;
        if (status == SolverStatus::unknown && !objective && proc.exit_code != 0) {
            out.status = SolverStatus::error;
            return out;
        }
        normalize(status, objective);
        out.status = status;
        out.objective = objective;
        return out;
    }

    bool supports_bound() const override { return spec_.supports_bound(); }
    double grace_s() const override { return spec_.grace_s; }

    // The exact command line of the most recent run, for logging.
    const std::string& last_command() const { return last_command_; }

    static std::string join(const std::vector<std::string>& argv) {
        std::string s;
        for (const auto& a : argv) {
            if (!s.empty()) s += ' ';
            s += a;
        }
        return s;
    }

private:
    // Keeps the outcome invariant: objective present iff status says a
    // solution exists. An incumbent printed before a timeout means the run
    // is SATISFIABLE; a success status without a parseable objective is
    // unusable for an optimization task.
    static void normalize(SolverStatus& status, std::optional<double>& objective) {
        if (objective) {
            if (status == SolverStatus::timeout || status == SolverStatus::unknown)
                status = SolverStatus::satisfiable;
            else if (status == SolverStatus::error || status == SolverStatus::unsatisfiable)
                objective.reset();
        } else if (has_solution_status(status)) {
            status = SolverStatus::unknown;
        }
    }

    AdapterSpec spec_;
    SolverTask task_;
    ConfigSpace space_;
    std::string last_command_;
};

} // namespace psa
