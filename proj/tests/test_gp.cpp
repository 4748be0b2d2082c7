#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "psa/gp.hpp"
#include "test_util.hpp"

using namespace psa;
using oracles::dense_gp_posterior;
using oracles::monte_carlo_ei;
using testutil::config_of;
using testutil::make_space;

TEST(KernelValue, ClosedFormAndSymmetry) {
    const ConfigSpace space = make_space({3, 3, 3});
    KernelParams p;
    p.signal_variance = 1.0;
    p.lengthscale = 1.0;
    const Configuration a = config_of({0, 0, 0});
    EXPECT_DOUBLE_EQ(kernel_value(a, a, p), 1.0); // d_H = 0 -> sigma_f^2
    const Configuration b = config_of({1, 0, 0});
    EXPECT_NEAR(kernel_value(a, b, p), 0.36787944117144233, 1e-12); // e^{-1}
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Configuration x = random_config(space, rng);
        const Configuration y = random_config(space, rng);
        EXPECT_DOUBLE_EQ(kernel_value(x, y, p), kernel_value(y, x, p));
    }
}

TEST(GpFit, SingleObservationInterpolates) {
    KernelParams p;
    p.noise_variance = 1e-10;
    const Configuration c = config_of({0, 1});
    const GpModel m = GpModel::fit({c}, {5.0}, p);
    const auto [mean, variance] = m.posterior(c);
    EXPECT_NEAR(mean, 5.0, 1e-6);
    EXPECT_NEAR(variance, 0.0, 1e-6);
}

TEST(GpFit, ConflictingDuplicatesAbsorbedByNoise) {
    KernelParams p;
    p.noise_variance = 0.1;
    const Configuration c = config_of({0});
    EXPECT_NO_THROW(GpModel::fit({c, c}, {1.0, 3.0}, p));
}

TEST(GpFit, RejectsBadInputs) {
    KernelParams p;
    EXPECT_THROW(GpModel::fit({}, {}, p), ModelError);
    EXPECT_THROW(GpModel::fit({config_of({0})}, {std::nan("")}, p), ModelError);
    KernelParams bad;
    bad.lengthscale = -1;
    EXPECT_THROW(GpModel::fit({config_of({0})}, {1.0}, bad), ModelError);
}

TEST(GpPosterior, InterpolatesTrainingDataAtTinyNoise) {
    const ConfigSpace space = make_space({4, 4});
    KernelParams p = KernelParams::defaults(2);
    p.noise_variance = 1e-8;
    std::vector<Configuration> inputs = {config_of({0, 0}), config_of({1, 2}), config_of({3, 3}),
                                         config_of({2, 1}), config_of({0, 3})};
    std::vector<double> targets = {4.0, -2.0, 7.5, 1.0, 3.25};
    const GpModel m = GpModel::fit(inputs, targets, p);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto [mean, variance] = m.posterior(inputs[i]);
        EXPECT_NEAR(mean, targets[i], 1e-5);
        EXPECT_GE(variance, 0.0);
    }
}

TEST(GpPosterior, MatchesDenseBruteForceSolve) {
    const ConfigSpace space = make_space({4, 3, 5, 2});
    Rng rng(17);
    for (int n : {1, 2, 5, 12, 20}) {
        std::vector<Configuration> inputs;
        std::vector<double> targets;
        std::unordered_set<Configuration, ConfigurationHash> used;
        while (int(inputs.size()) < n) {
            Configuration c = random_config(space, rng);
            if (!used.insert(c).second) continue; // distinct inputs
            inputs.push_back(c);
            targets.push_back(double(rng.next_index(1000)) / 10.0 - 50.0);
        }
        const KernelParams p = KernelParams::defaults(space.dimension_count());
        const GpModel m = GpModel::fit(inputs, targets, p);
        for (int q = 0; q < 20; ++q) {
            const Configuration query = random_config(space, rng);
            const auto [mean, variance] = m.posterior(query);
            const oracles::GpPosterior oracle = dense_gp_posterior(inputs, targets, p, query);
            EXPECT_NEAR(mean, oracle.mean, 1e-8) << "n=" << n;
            EXPECT_NEAR(variance, std::max(oracle.variance, 0.0), 1e-8) << "n=" << n;
        }
    }
}

TEST(GpPosterior, VanishingLengthscaleRecoversPrior) {
    KernelParams p;
    p.lengthscale = 1e-6;
    p.noise_variance = 1e-6;
    std::vector<Configuration> inputs = {config_of({0, 0}), config_of({1, 1})};
    std::vector<double> targets = {2.0, 6.0};
    const GpModel m = GpModel::fit(inputs, targets, p);
    const auto [mean, variance] = m.posterior(config_of({2, 2}));
    EXPECT_NEAR(mean, 4.0, 1e-6); // target mean
    // de-standardized prior variance: sigma_f^2 * std^2, std = 2
    EXPECT_NEAR(variance, p.signal_variance * 4.0, 1e-6);
}

TEST(GpPosterior, VarianceNeverNegative) {
    const ConfigSpace space = make_space({3, 3, 3, 3});
    Rng rng(23);
    std::vector<Configuration> inputs;
    std::vector<double> targets;
    for (int i = 0; i < 15; ++i) {
        inputs.push_back(random_config(space, rng));
        targets.push_back(double(rng.next_index(100)));
    }
    const GpModel m = GpModel::fit(inputs, targets, KernelParams::defaults(4));
    for (int i = 0; i < 1000; ++i) {
        const auto [mean, variance] = m.posterior(random_config(space, rng));
        (void)mean;
        EXPECT_GE(variance, 0.0);
    }
}

TEST(ExpectedImprovement, ClosedFormPoints) {
    EXPECT_DOUBLE_EQ(expected_improvement(5.0, 0.0, 5.0), 0.0);  // sigma=0, no gap
    EXPECT_DOUBLE_EQ(expected_improvement(7.0, 0.0, 5.0), 0.0);  // sigma=0, mean worse
    EXPECT_DOUBLE_EQ(expected_improvement(3.0, 0.0, 5.0), 2.0);  // sigma=0, deterministic gain
    // mean = best, sigma = 1: EI = phi(0) = 1/sqrt(2 pi)
    EXPECT_NEAR(expected_improvement(5.0, 1.0, 5.0), 0.3989422804014327, 1e-12);
}

TEST(ExpectedImprovement, NonDecreasingInSigmaAtZeroGap) {
    double prev = -1.0;
    for (double sigma = 0.0; sigma <= 4.0; sigma += 0.05) {
        const double ei = expected_improvement(2.0, sigma * sigma, 2.0);
        EXPECT_GE(ei, prev);
        prev = ei;
    }
}

TEST(ExpectedImprovement, MatchesMonteCarloOracle) {
    // best is drawn via z in [-3, 3] so every triple stays within the
    // oracle's resolving power (deeper tails leave 1e5 samples with no hits)
    std::mt19937_64 eng(2024);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    std::uniform_real_distribution<double> pos(0.05, 2.5);
    for (int trial = 0; trial < 20; ++trial) {
        const double mean = unif(eng);
        const double sigma = pos(eng);
        const double best = mean + unif(eng) * sigma;
        double se = 0.0;
        const double mc = monte_carlo_ei(mean, sigma, best, 100000, 1000 + trial, &se);
        const double closed = expected_improvement(mean, sigma * sigma, best);
        EXPECT_NEAR(closed, mc, 3.0 * se + 1e-9)
            << "mean=" << mean << " sigma=" << sigma << " best=" << best;
    }
}
