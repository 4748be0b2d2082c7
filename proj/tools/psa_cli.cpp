// psa: tune a black-box solver on one instance, run benchmark matrices, and
// report on the results.

#include <glob.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psa/psa.hpp"

namespace {

std::string timestamp_dir() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    localtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::string default_run_dir() {
    const char* root = std::getenv("PSA_RUN_DIR");
    const std::string base = root && *root ? root : "./runs";
    return base + "/" + timestamp_dir();
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> paths;
    if (glob(pattern.c_str(), GLOB_TILDE, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    return paths;
}

struct TuneOptions {
    std::string space_path, adapter_path, instance_path;
    double time_limit_s = 1800.0;
    double rho = 0.2;
    std::string strategy = "bo";
    std::string global_time = "percent";
    std::string timeout_init = "static:5";
    std::string evolve = "static";
    std::string stop = "timeout";
    std::string sense = "minimize";
    std::uint64_t seed = 0;
    std::string run_dir;
};

psa::PsaSettings settings_from_options(const TuneOptions& opt) {
    psa::PsaSettings st;
    st.global_timeout_s = opt.time_limit_s;
    st.probing_ratio = opt.rho;
    st.strategy_name = opt.strategy;
    st.seed = opt.seed;
    psa::apply_global_time(st, opt.global_time);
    psa::apply_timeout_init(st, opt.timeout_init);
    psa::apply_evolution(st, opt.evolve);
    psa::apply_stop(st, opt.stop);
    st.validate();
    return st;
}

int cmd_tune(const TuneOptions& opt) {
    const psa::ConfigSpace space = psa::load_space(opt.space_path);
    const psa::PsaSettings settings = settings_from_options(opt);
    const psa::ObjectiveSense sense = psa::sense_from_string(opt.sense);
    const std::string run_dir = opt.run_dir.empty() ? default_run_dir() : opt.run_dir;

    std::unique_ptr<psa::Evaluator> evaluator;
    std::unique_ptr<psa::TimeSource> clock;
    if (opt.adapter_path == "synthetic") {
        auto sim = std::make_unique<psa::SimulatedClock>();
        evaluator = std::make_unique<psa::SyntheticEvaluator>(
            psa::load_landscape(opt.instance_path, space), *sim);
        clock = std::move(sim);
    } else {
        evaluator = std::make_unique<psa::SubprocessEvaluator>(
            psa::load_adapter(opt.adapter_path), psa::SolverTask{opt.instance_path, sense}, space);
        clock = std::make_unique<psa::SteadyClock>();
    }

    psa::RunMeta meta{opt.instance_path, {}};
    const psa::PsaResult result =
        psa::run_psa(*evaluator, space, settings, *clock, run_dir, meta);

    const auto printed = psa::restore_sense(result.final_objective, sense);
    std::printf("status:    %s\n", psa::to_string(result.final_status));
    if (printed)
        std::printf("objective: %s  (sense: %s)\n", psa::csv_number(*printed).c_str(),
                    opt.sense.c_str());
    else
        std::printf("objective: -\n");
    std::printf("config:    %s\n", result.flags.c_str());
    std::printf("probing:   %.2f s  (%zu rounds)\n", result.probe_s, result.probe_rounds.size());
    std::printf("solving:   %.2f s\n", result.solve_s);
    std::printf("total:     %.2f s\n", result.total_wall_s);
    std::printf("seed:      %llu\n", (unsigned long long)settings.seed);
    std::printf("run dir:   %s\n", run_dir.c_str());

    const bool answered =
        result.final_objective.has_value() || result.final_status == psa::SolverStatus::unsatisfiable;
    return answered ? 0 : 1;
}

struct BenchOptions {
    std::string matrix_path;
    bool factorial = false;
    std::string strategy = "bo";
    std::string instances_glob;
    std::string space_path, adapter_path = "synthetic";
    std::string sense = "minimize";
    double time_limit_s = 1800.0;
    std::vector<std::uint64_t> seeds;
    unsigned parallel = 0; // 0: keep the matrix file's setting
    std::string results_path = "results.csv";
    std::string run_root;
};

int cmd_bench(const BenchOptions& opt) {
    psa::ExperimentMatrix matrix;
    if (!opt.matrix_path.empty()) {
        matrix = psa::load_matrix(opt.matrix_path);
    } else {
        if (opt.space_path.empty() || opt.instances_glob.empty())
            throw psa::ConfigError("--factorial needs --space and --instances");
        matrix.space = psa::load_space(opt.space_path);
        if (opt.adapter_path != "synthetic") matrix.adapter = psa::load_adapter(opt.adapter_path);
        const psa::ObjectiveSense sense = psa::sense_from_string(opt.sense);
        for (const auto& path : expand_glob(opt.instances_glob))
            matrix.instances.push_back({path, path, sense});
        psa::PsaSettings base;
        base.global_timeout_s = opt.time_limit_s;
        matrix.variants = psa::factorial_variants(opt.strategy, base);
    }
    if (!opt.seeds.empty()) matrix.seeds = opt.seeds;
    if (opt.parallel > 0) matrix.parallelism = opt.parallel;
    matrix.validate();

    const psa::MatrixRunStats stats = psa::run_matrix(matrix, opt.results_path, opt.run_root);
    std::printf("cells:    %zu\n", stats.cells);
    std::printf("resumed:  %zu\n", stats.resumed);
    std::printf("executed: %zu\n", stats.executed);
    std::printf("errors:   %zu\n", stats.errors);
    std::printf("results:  %s\n", opt.results_path.c_str());
    return 0;
}

struct ReportOptions {
    std::vector<std::string> compare;
    std::string frequencies_path;
    std::string out_dir = ".";
};

int cmd_report(const ReportOptions& opt) {
    if (!opt.compare.empty()) {
        const auto rows_a = psa::read_results_csv(opt.compare[0]);
        const auto rows_b = psa::read_results_csv(opt.compare[1]);
        psa::ComparisonReport rep;
        try {
            rep = psa::pairwise_compare(rows_a, rows_b);
        } catch (const psa::ConfigError& e) {
            std::fprintf(stderr, "psa report: %s\n", e.what());
            return 1;
        }
        const std::string label_a = std::filesystem::path(opt.compare[0]).stem().string();
        const std::string label_b = std::filesystem::path(opt.compare[1]).stem().string();
        std::fputs(psa::render_comparison_text(label_a, label_b, rep).c_str(), stdout);
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream csv(opt.out_dir + "/comparison.csv");
        csv << psa::render_comparison_csv(rep);
        return 0;
    }
    const auto rows = psa::read_results_csv(opt.frequencies_path);
    psa::FrequencyTable table;
    try {
        table = psa::strategy_frequency(rows);
    } catch (const psa::ConfigError& e) {
        std::fprintf(stderr, "psa report: %s\n", e.what());
        return 1;
    }
    std::fputs(psa::render_frequency_text(table).c_str(), stdout);
    std::filesystem::create_directories(opt.out_dir);
    std::ofstream csv(opt.out_dir + "/frequencies.csv");
    csv << psa::render_frequency_csv(table);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"probe-and-solve hyperparameter tuning for black-box solvers"};
    app.require_subcommand(1);

    TuneOptions tune;
    CLI::App* tune_cmd = app.add_subcommand("tune", "tune one instance and solve it");
    tune_cmd->add_option("--space", tune.space_path, "hyperparameter space file")->required();
    tune_cmd->add_option("--adapter", tune.adapter_path, "adapter file, or \"synthetic\"")
        ->required();
    tune_cmd->add_option("--instance", tune.instance_path, "problem instance file")->required();
    tune_cmd->add_option("--time-limit", tune.time_limit_s, "global time limit T_g in seconds");
    tune_cmd->add_option("--rho", tune.rho, "probing ratio in [0,1]");
    tune_cmd->add_option("--strategy", tune.strategy, "random|grid|hamming|bo");
    tune_cmd->add_option("--global-time", tune.global_time, "percent | dynamic[:tries]");
    tune_cmd->add_option("--timeout-init", tune.timeout_init, "static[:seconds] | first-runtime");
    tune_cmd->add_option("--evolve", tune.evolve, "static | geometric[:beta] | luby[:base]");
    tune_cmd->add_option("--stop", tune.stop, "timeout | first-solution | stagnation[:limit]");
    tune_cmd->add_option("--sense", tune.sense, "minimize | maximize");
    tune_cmd->add_option("--seed", tune.seed, "random seed (echoed in all outputs)");
    tune_cmd->add_option("--run-dir", tune.run_dir, "run directory (default ./runs/<timestamp>)");

    BenchOptions bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run an experiment matrix");
    auto* matrix_opt = bench_cmd->add_option("--matrix", bench.matrix_path, "matrix file");
    auto* factorial_opt = bench_cmd->add_flag("--factorial", bench.factorial,
                                              "generate the 24-variant full-factorial design");
    matrix_opt->excludes(factorial_opt);
    bench_cmd->add_option("--strategy", bench.strategy, "strategy for --factorial");
    bench_cmd->add_option("--instances", bench.instances_glob, "instance glob for --factorial");
    bench_cmd->add_option("--space", bench.space_path, "space file for --factorial");
    bench_cmd->add_option("--adapter", bench.adapter_path,
                          "adapter file or \"synthetic\" for --factorial");
    bench_cmd->add_option("--sense", bench.sense, "minimize | maximize");
    bench_cmd->add_option("--time-limit", bench.time_limit_s, "per-run T_g for --factorial");
    bench_cmd->add_option("--seeds", bench.seeds, "seeds (repeatable)");
    bench_cmd->add_option("--parallel", bench.parallel, "concurrent matrix cells");
    bench_cmd->add_option("--results", bench.results_path, "results CSV (append + resume)");
    bench_cmd->add_option("--run-dir", bench.run_root, "per-cell run directory root");

    ReportOptions report;
    CLI::App* report_cmd = app.add_subcommand("report", "analyze results files");
    auto* compare_opt =
        report_cmd->add_option("--compare", report.compare, "two results files A.csv B.csv")
            ->expected(2);
    auto* freq_opt =
        report_cmd->add_option("--frequencies", report.frequencies_path, "results file");
    compare_opt->excludes(freq_opt);
    report_cmd->add_option("--out-dir", report.out_dir, "where report CSVs are written");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (tune_cmd->parsed()) return cmd_tune(tune);
        if (bench_cmd->parsed()) {
            if (bench.matrix_path.empty() && !bench.factorial)
                throw psa::ConfigError("bench needs --matrix or --factorial");
            return cmd_bench(bench);
        }
        if (report_cmd->parsed()) {
            if (report.compare.empty() == report.frequencies_path.empty())
                throw psa::ConfigError("report needs exactly one of --compare or --frequencies");
            return cmd_report(report);
        }
    } catch (const psa::ConfigError& e) {
        std::fprintf(stderr, "psa: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "psa: %s\n", e.what());
        return 2;
    }
    return 2;
}
