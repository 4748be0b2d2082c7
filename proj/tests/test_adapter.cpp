#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <regex>

#include "psa/adapter.hpp"
#include "test_util.hpp"

using namespace psa;
using testutil::config_of;
using testutil::make_space;

namespace {

const std::string kFixtures = FIXTURE_DIR;

AdapterSpec spec_for(const std::string& command, const std::string& bound_flag = "") {
    AdapterSpec spec;
    spec.command_template = command;
    spec.objective_pattern = "^o (-?[0-9.]+)";
    spec.status_map = {{"s SATISFIABLE", SolverStatus::satisfiable},
                       {"s OPTIMUM FOUND", SolverStatus::optimum_found},
                       {"s UNSATISFIABLE", SolverStatus::unsatisfiable},
                       {"s TIMEOUT", SolverStatus::timeout}};
    spec.bound_template = bound_flag;
    spec.grace_s = 2.0;
    return spec;
}

ConfigSpace ace_like_space() {
    ConfigSpace space;
    Dimension varh{"varh", {"Dom", "Wdeg"}, "-varh={value}"};
    space.dimensions.push_back(varh);
    space.default_config.indices = {0};
    return space;
}

} // namespace

TEST(RenderCommand, SubstitutesTemplates) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("ace {instance} -t={timeout_s}s {params}");
    const SolverTask task{"p.xml", ObjectiveSense::minimize};
    const auto argv = render_command(spec, task, space, config_of({1}), 5.0);
    EXPECT_EQ(argv, (std::vector<std::string>{"ace", "p.xml", "-t=5s", "-varh=Wdeg"}));
}

TEST(RenderCommand, EmptyParamsListCollapses) {
    ConfigSpace space; // zero dimensions
    const AdapterSpec spec = spec_for("solve {instance} -t={timeout_s} {params}");
    const auto argv = render_command(spec, {"i", ObjectiveSense::minimize}, space, {}, 2.5);
    EXPECT_EQ(argv, (std::vector<std::string>{"solve", "i", "-t=2.5"}));
}

TEST(RenderCommand, BoundHandling) {
    const ConfigSpace space = ace_like_space();
    const SolverTask task{"p.xml", ObjectiveSense::minimize};
    // {bound} in the template but no bound supplied: contract violation
    const AdapterSpec with_bound = spec_for("ace {instance} -t={timeout_s} -ub={bound}");
    EXPECT_THROW(render_command(with_bound, task, space, config_of({0}), 5.0), ConfigError);
    // bound supplied, rendered through bound_flag and appended
    const AdapterSpec appended = spec_for("ace {instance} -t={timeout_s}", "-ub={bound}");
    const auto argv = render_command(appended, task, space, config_of({0}), 5.0, 42.0);
    EXPECT_EQ(argv.back(), "-ub=42");
    // bound supplied but adapter has no bound_flag
    const AdapterSpec no_bound = spec_for("ace {instance} -t={timeout_s}");
    EXPECT_THROW(render_command(no_bound, task, space, config_of({0}), 5.0, 42.0), ConfigError);
    // unresolved placeholder
    const AdapterSpec typo = spec_for("ace {instance} -t={timeout_s} {oops}");
    EXPECT_THROW(render_command(typo, task, space, config_of({0}), 5.0), ConfigError);
}

TEST(AdapterSpecValidation, RequiredPlaceholders) {
    AdapterSpec spec = spec_for("ace {instance} -t={timeout_s}");
    EXPECT_NO_THROW(spec.validate());
    spec.command_template = "ace {instance}";
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.command_template = "ace {instance} -t={timeout_s}";
    spec.objective_pattern = "o [0-9]+"; // no capture group
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(ParseOutput, LastMatchWins) {
    const AdapterSpec spec = spec_for("x {instance} {timeout_s}");
    const auto [status, obj] = parse_output("o 100\no 64\ns SATISFIABLE\n", spec);
    EXPECT_EQ(status, SolverStatus::satisfiable);
    ASSERT_TRUE(obj);
    EXPECT_DOUBLE_EQ(*obj, 64.0);
}

TEST(ParseOutput, DegenerateInputs) {
    const AdapterSpec spec = spec_for("x {instance} {timeout_s}");
    const auto [s1, o1] = parse_output("", spec);
    EXPECT_EQ(s1, SolverStatus::unknown);
    EXPECT_FALSE(o1);
    const auto [s2, o2] = parse_output("s UNSATISFIABLE\n", spec);
    EXPECT_EQ(s2, SolverStatus::unsatisfiable);
    EXPECT_FALSE(o2);
}

TEST(ParseOutput, LastMatchEqualsBruteForceScan) {
    const AdapterSpec spec = spec_for("x {instance} {timeout_s}");
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::string raw;
        std::vector<double> printed;
        const int lines = 1 + int(rng.next_index(20));
        for (int i = 0; i < lines; ++i) {
            if (rng.next_index(3) == 0) {
                raw += "c noise line\n";
            } else {
                const double v = double(rng.next_index(1000));
                printed.push_back(v);
                raw += "o " + std::to_string(int(v)) + "\n";
            }
        }
        const auto [status, obj] = parse_output(raw, spec);
        (void)status;
        if (printed.empty()) {
            EXPECT_FALSE(obj);
        } else {
            // oracle: scan every match, take the final one
            ASSERT_TRUE(obj);
            EXPECT_DOUBLE_EQ(*obj, printed.back());
        }
    }
}

TEST(SubprocessEvaluator, EchoSolverRoundTrip) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("sh " + kFixtures + "/echo_solver.sh {instance} -t={timeout_s} {params}");
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::minimize},
                             space);
    const SolverOutcome out = eval.evaluate(space.default_config, 5.0);
    EXPECT_EQ(out.status, SolverStatus::satisfiable);
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, 42.0);
    EXPECT_EQ(eval.invocations(), 1u);
}

TEST(SubprocessEvaluator, MaximizationNegatesOnIngest) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("sh " + kFixtures + "/echo_solver.sh {instance} -t={timeout_s}");
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::maximize},
                             space);
    const SolverOutcome out = eval.evaluate(space.default_config, 5.0);
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, -42.0); // canonical minimize
    EXPECT_DOUBLE_EQ(*restore_sense(out.objective, ObjectiveSense::maximize), 42.0);
}

TEST(SubprocessEvaluator, StagedSolverParsesFinalIncumbent) {
    const ConfigSpace space = make_space({4, 4}); // option labels o0..o3
    // -a/-b expect numeric values; map oN -> N via flag templates
    ConfigSpace numeric = space;
    numeric.dimensions[0].name = "a";
    numeric.dimensions[0].flag_template = "-a={value}";
    numeric.dimensions[0].options = {"0", "1", "2", "3"};
    numeric.dimensions[1].name = "b";
    numeric.dimensions[1].flag_template = "-b={value}";
    numeric.dimensions[1].options = {"0", "1", "2", "3"};
    const AdapterSpec spec =
        spec_for("python3 " + kFixtures + "/staged_solver.py {instance} -t={timeout_s} {params}",
                 "-ub={bound}");
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::minimize},
                             numeric);
    const SolverOutcome out = eval.evaluate(config_of({2, 1}), 5.0);
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, 100 - 2 * 2 - 3 * 1); // final incumbent
    EXPECT_EQ(out.status, SolverStatus::satisfiable);
    EXPECT_NE(eval.last_command().find("-a=2 -b=1"), std::string::npos);

    // cut below the best reachable value: nothing printed, TIMEOUT
    const SolverOutcome cut = eval.evaluate(config_of({0, 0}), 5.0, 90.0);
    EXPECT_FALSE(cut.objective);
    EXPECT_EQ(cut.status, SolverStatus::timeout);
}

TEST(SubprocessEvaluator, HangingSolverKilledWithinGrace) {
    const ConfigSpace space = ace_like_space();
    AdapterSpec spec = spec_for("sh " + kFixtures + "/hanging_solver.sh {instance} -t={timeout_s}");
    spec.grace_s = 1.0;
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::minimize},
                             space);
    const auto start = std::chrono::steady_clock::now();
    const SolverOutcome out = eval.evaluate(space.default_config, 1.0);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(out.status, SolverStatus::timeout);
    EXPECT_FALSE(out.objective);
    EXPECT_LE(out.runtime_s, 1.0 + spec.grace_s + 1e-9);
    EXPECT_LT(wall, 1.0 + spec.grace_s + 1.0); // kill latency budget
}

TEST(SubprocessEvaluator, MissingInstanceIsConfigError) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("sh x.sh {instance} -t={timeout_s}");
    EXPECT_THROW(
        SubprocessEvaluator(spec, {"/nonexistent/file", ObjectiveSense::minimize}, space),
        ConfigError);
}

TEST(SubprocessEvaluator, SpawnFailureBecomesError) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("/nonexistent/binary {instance} -t={timeout_s}");
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::minimize},
                             space);
    const SolverOutcome out = eval.evaluate(space.default_config, 2.0);
    EXPECT_EQ(out.status, SolverStatus::error);
    EXPECT_FALSE(out.objective);
}

TEST(SubprocessEvaluator, WritesRawLog) {
    const ConfigSpace space = ace_like_space();
    const AdapterSpec spec = spec_for("sh " + kFixtures + "/echo_solver.sh {instance} -t={timeout_s}");
    SubprocessEvaluator eval(spec, {kFixtures + "/staged_instance.txt", ObjectiveSense::minimize},
                             space);
    const std::string log = testing::TempDir() + "psa_adapter_test.log";
    eval.evaluate(space.default_config, 5.0, std::nullopt, EvalMode::full, log);
    std::ifstream in(log);
    ASSERT_TRUE(in.good());
    std::string first_line;
    std::getline(in, first_line);
    EXPECT_EQ(first_line.rfind("# command: sh", 0), 0u) << first_line;
}

TEST(FormatSeconds, TrimsTrailingZeros) {
    EXPECT_EQ(format_seconds(5.0), "5");
    EXPECT_EQ(format_seconds(2.5), "2.5");
    EXPECT_EQ(format_seconds(11.25), "11.25");
}
