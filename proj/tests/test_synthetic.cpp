#include <gtest/gtest.h>

#include "psa/synthetic.hpp"
#include "test_util.hpp"

using namespace psa;
using testutil::config_of;
using testutil::make_landscape;
using testutil::make_space;

namespace {

SyntheticLandscape fixed_timing_landscape() {
    // No per-config timing jitter: time_to_first = 2 s, curve ends at 8 s.
    SyntheticLandscape land = make_landscape(make_space({3, 3}), config_of({2, 2}), 5);
    land.time_to_first_s = 2.0;
    land.time_to_first_jitter = 0.0;
    land.curve_stretch = 4.0;
    return land;
}

} // namespace

TEST(SynthEvaluate, TimeoutBeforeFirstIncumbent) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const SolverOutcome out = synth_evaluate(land, config_of({0, 0}), 1.0);
    EXPECT_EQ(out.status, SolverStatus::timeout);
    EXPECT_FALSE(out.objective);
    EXPECT_DOUBLE_EQ(out.runtime_s, 1.0);
}

TEST(SynthEvaluate, SatisfiableMidCurve) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const Configuration c = config_of({0, 0});
    const SolverOutcome out = synth_evaluate(land, c, 5.0);
    EXPECT_EQ(out.status, SolverStatus::satisfiable);
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, *land.objective_at(c, 5.0));
    EXPECT_DOUBLE_EQ(out.runtime_s, 5.0);
}

TEST(SynthEvaluate, CurveExhaustionIsOptimum) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const Configuration c = config_of({1, 2});
    const SolverOutcome out = synth_evaluate(land, c, 100.0);
    EXPECT_EQ(out.status, SolverStatus::optimum_found);
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, land.quality(c));
    EXPECT_DOUBLE_EQ(out.runtime_s, land.curve_duration(c));
}

TEST(SynthEvaluate, UnreachableBoundTimesOut) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const Configuration c = config_of({0, 1});
    // strict cut at exactly q: f < q is unreachable
    const SolverOutcome out = synth_evaluate(land, c, 100.0, land.quality(c));
    EXPECT_EQ(out.status, SolverStatus::timeout);
    EXPECT_FALSE(out.objective);
    EXPECT_DOUBLE_EQ(out.runtime_s, 100.0);
}

TEST(SynthEvaluate, ReachableBoundStillSolves) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const Configuration c = config_of({0, 1});
    const SolverOutcome out = synth_evaluate(land, c, 100.0, land.quality(c) + 0.5);
    ASSERT_TRUE(out.objective);
    EXPECT_LT(*out.objective, land.quality(c) + 0.5);
}

TEST(SynthEvaluate, PureFunctionOfInputs) {
    const SyntheticLandscape land = make_landscape(make_space({4, 4, 4}), config_of({1, 2, 3}));
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const Configuration c = random_config(land.space, rng);
        const double timeout = 0.1 + double(rng.next_index(100)) / 10.0;
        const SolverOutcome a = synth_evaluate(land, c, timeout);
        const SolverOutcome b = synth_evaluate(land, c, timeout);
        EXPECT_EQ(a.status, b.status);
        EXPECT_EQ(a.objective, b.objective);
        EXPECT_DOUBLE_EQ(a.runtime_s, b.runtime_s);
    }
}

TEST(SynthEvaluate, AnytimeObjectiveNonIncreasingInTimeout) {
    const SyntheticLandscape land = make_landscape(make_space({3, 3, 3}), config_of({0, 1, 2}));
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const Configuration c = random_config(land.space, rng);
        std::optional<double> prev;
        for (double t = 0.1; t < 6.0; t += 0.1) {
            const SolverOutcome out = synth_evaluate(land, c, t);
            if (out.objective) {
                if (prev) EXPECT_LE(*out.objective, *prev);
                prev = out.objective;
            } else {
                EXPECT_FALSE(prev) << "objective cannot disappear as the timeout grows";
            }
        }
    }
}

TEST(SynthEvaluate, FirstSolutionModeStopsAtFirstIncumbent) {
    const SyntheticLandscape land = fixed_timing_landscape();
    const Configuration c = config_of({1, 0});
    const SolverOutcome out =
        synth_evaluate(land, c, 100.0, std::nullopt, EvalMode::first_solution);
    EXPECT_EQ(out.status, SolverStatus::satisfiable);
    EXPECT_DOUBLE_EQ(out.runtime_s, land.time_to_first(c));
    ASSERT_TRUE(out.objective);
    EXPECT_DOUBLE_EQ(*out.objective, land.quality(c) + land.improvement_steps.front().second);
}

TEST(SyntheticEvaluator, AdvancesSimulatedClock) {
    SimulatedClock clock;
    SyntheticEvaluator eval(fixed_timing_landscape(), clock);
    const SolverOutcome out = eval.evaluate(config_of({0, 0}), 3.0);
    EXPECT_DOUBLE_EQ(clock.now_s(), out.runtime_s);
    eval.evaluate(config_of({0, 1}), 1.5);
    EXPECT_DOUBLE_EQ(clock.now_s(), out.runtime_s + 1.5);
    EXPECT_EQ(eval.invocations(), 2u);
}

TEST(SyntheticLandscape, UniqueOptimumUnderSlopeDominance) {
    const SyntheticLandscape land = make_landscape(make_space({3, 3, 3}), config_of({2, 0, 1}));
    const double q_opt = land.quality(land.optimum);
    const std::uint64_t n = cardinality(land.space);
    for (std::uint64_t i = 0; i < n; ++i) {
        const Configuration c = config_at(land.space, i);
        if (c == land.optimum) continue;
        EXPECT_GT(land.quality(c), q_opt);
    }
}

TEST(SyntheticLandscape, LoadFromJson) {
    const ConfigSpace space = make_space({2, 2});
    const auto doc = nlohmann::json::parse(R"({
        "synthetic": {"seed": 7, "optimum": ["o1", "o0"], "base_quality": 3.0,
                       "quality_slope": 4.0, "quality_jitter": 0.5,
                       "time_to_first": 0.25, "curve_stretch": 2.0}})");
    const SyntheticLandscape land = load_landscape_json(doc, space);
    EXPECT_EQ(land.optimum, config_of({1, 0}));
    EXPECT_DOUBLE_EQ(land.base_quality, 3.0);

    EXPECT_THROW(load_landscape_json(nlohmann::json::parse(R"({"synthetic":{"oops":1}})"), space),
                 ConfigError);
    EXPECT_THROW(
        load_landscape_json(
            nlohmann::json::parse(R"({"synthetic":{"optimum":["bogus","o0"]}})"), space),
        ConfigError);
}
