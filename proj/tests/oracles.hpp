#pragma once

// Independent oracles used by the unit and acceptance suites. These stay
// deliberately free of the library's solve paths: the GP oracle inverts the
// Gram matrix explicitly with Gauss-Jordan, the Luby oracle unrolls the
// recurrence as written, and the EI oracle is plain Monte-Carlo.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "psa/config_space.hpp"
#include "psa/gp.hpp"

namespace oracles {

using Matrix = std::vector<std::vector<double>>;

inline Matrix gauss_jordan_inverse(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        std::swap(a[pivot], a[col]);
        std::swap(inv[pivot], inv[col]);
        const double d = a[col][col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (std::size_t c = 0; c < n; ++c) {
                a[r][c] -= f * a[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    return inv;
}

struct GpPosterior {
    double mean;
    double variance;
};

// Direct GP equations with the library's standardization convention: center
// by the mean, scale by the population standard deviation (1 if degenerate).
inline GpPosterior dense_gp_posterior(const std::vector<psa::Configuration>& inputs,
                                      const std::vector<double>& targets,
                                      const psa::KernelParams& p, const psa::Configuration& query) {
    const std::size_t n = inputs.size();
    double mu = 0;
    for (double t : targets) mu += t;
    mu /= double(n);
    double var = 0;
    for (double t : targets) var += (t - mu) * (t - mu);
    var /= double(n);
    const double sd = (n > 1 && var > 1e-24) ? std::sqrt(var) : 1.0;

    Matrix k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            k[i][j] = psa::kernel_value(inputs[i], inputs[j], p);
            if (i == j) k[i][j] += p.noise_variance;
        }
    const Matrix kinv = gauss_jordan_inverse(k);

    std::vector<double> y(n), alpha(n, 0.0), kstar(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = (targets[i] - mu) / sd;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) alpha[i] += kinv[i][j] * y[j];
    for (std::size_t i = 0; i < n; ++i) kstar[i] = psa::kernel_value(query, inputs[i], p);

    double mean_std = 0;
    for (std::size_t i = 0; i < n; ++i) mean_std += kstar[i] * alpha[i];
    double quad = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += kstar[i] * kinv[i][j] * kstar[j];
    return {mu + mean_std * sd, (p.signal_variance - quad) * sd * sd};
}

inline double monte_carlo_ei(double mean, double sigma, double best, int samples,
                             std::uint64_t seed, double* standard_error) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(mean, sigma);
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < samples; ++i) {
        const double imp = std::max(best - normal(eng), 0.0);
        sum += imp;
        sum_sq += imp * imp;
    }
    const double avg = sum / samples;
    const double var = sum_sq / samples - avg * avg;
    *standard_error = std::sqrt(std::max(var, 0.0) / samples);
    return avg;
}

// Luby recurrence exactly as defined: luby(k) = 2^(i-1) when k = 2^i - 1,
// else luby(k - 2^(i-1) + 1) for the i with 2^(i-1) <= k < 2^i - 1.
inline std::uint64_t luby_oracle(std::uint64_t k) {
    for (std::uint64_t i = 1;; ++i) {
        const std::uint64_t pow_i = 1ull << i;
        if (k == pow_i - 1) return pow_i >> 1;
        if ((pow_i >> 1) <= k && k < pow_i - 1) return luby_oracle(k - (pow_i >> 1) + 1);
    }
}

} // namespace oracles
