#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "psa/config_space.hpp"
#include "psa/errors.hpp"

namespace psa {

inline double norm_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

struct KernelParams {
    double signal_variance = 1.0;   // sigma_f^2
    double lengthscale = 1.0;       // ell
    double noise_variance = 1e-6;   // sigma_n^2

    // Defaults for a space with dim_count categorical dimensions.
    static KernelParams defaults(std::size_t dim_count) {
        KernelParams p;
        p.signal_variance = 1.0;
        p.lengthscale = std::max(double(dim_count) / 4.0, 0.25);
        p.noise_variance = 1e-6;
        return p;
    }

    void validate() const {
        if (signal_variance <= 0 || lengthscale <= 0 || noise_variance < 0)
            throw ModelError("kernel parameters out of range");
    }
};

// Exponential Hamming kernel: sigma_f^2 * exp(-d_H(a, b) / ell). Symmetric,
// maximal at a == b.
inline double kernel_value(const Configuration& a, const Configuration& b,
                           const KernelParams& p) {
    return p.signal_variance * std::exp(-double(hamming_distance(a, b)) / p.lengthscale);
}

// GP posterior over configurations. Targets are standardized before fitting
// (objective scales vary wildly between instances); the factorization is a
// Cholesky of K + sigma_n^2 I with escalating jitter.
class GpModel {
public:
    static GpModel fit(std::vector<Configuration> inputs, std::vector<double> targets,
                       KernelParams params) {
        params.validate();
        if (inputs.empty() || inputs.size() != targets.size())
            throw ModelError("fit needs >= 1 observation and matching input/target counts");
        for (double t : targets)
            if (!std::isfinite(t)) throw ModelError("fit: non-finite target");

        GpModel m;
        m.inputs_ = std::move(inputs);
        m.params_ = params;

        const auto n = Eigen::Index(targets.size());
        double mean = 0.0;
        for (double t : targets) mean += t;
        mean /= double(n);
        double var = 0.0;
        for (double t : targets) var += (t - mean) * (t - mean);
        var /= double(n);
        m.target_mean_ = mean;
        m.target_std_ = (n > 1 && var > 1e-24) ? std::sqrt(var) : 1.0;

        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i)
            y(i) = (targets[std::size_t(i)] - m.target_mean_) / m.target_std_;

        Eigen::MatrixXd gram(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double k =
                    kernel_value(m.inputs_[std::size_t(i)], m.inputs_[std::size_t(j)], params);
                gram(i, j) = k;
                gram(j, i) = k;
            }
            gram(i, i) += params.noise_variance;
        }

        // Jitter escalation: 0, then 1e-10 growing x10 up to 1e-4.
        double jitter = 0.0;
        for (;;) {
            Eigen::MatrixXd k = gram;
            if (jitter > 0) k.diagonal().array() += jitter;
            Eigen::LLT<Eigen::MatrixXd> llt(k);
            if (llt.info() == Eigen::Success) {
                m.chol_ = llt;
                m.alpha_ = llt.solve(y);
                return m;
            }
            if (jitter == 0.0)
                jitter = 1e-10;
            else if (jitter < 1e-4)
                jitter *= 10.0;
            else
                throw ModelError("Gram matrix not positive definite after maximum jitter");
        }
    }

    // Predictive mean and (clamped, latent) variance, de-standardized.
    std::pair<double, double> posterior(const Configuration& c) const {
        const auto n = Eigen::Index(inputs_.size());
        Eigen::VectorXd k_star(n);
        for (Eigen::Index i = 0; i < n; ++i)
            k_star(i) = kernel_value(c, inputs_[std::size_t(i)], params_);
        const double mean_std = k_star.dot(alpha_);
        const Eigen::VectorXd v = chol_.matrixL().solve(k_star);
        double var_std = params_.signal_variance - v.squaredNorm();
        if (var_std < 0) var_std = 0;
        return {target_mean_ + mean_std * target_std_, var_std * target_std_ * target_std_};
    }

    std::size_t size() const { return inputs_.size(); }
    const KernelParams& params() const { return params_; }
    double target_mean() const { return target_mean_; }
    double target_std() const { return target_std_; }

private:
    std::vector<Configuration> inputs_;
    KernelParams params_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
    double target_mean_ = 0.0;
    double target_std_ = 1.0;
};

// Closed-form expected improvement for minimization. With sigma = 0 this is
// the deterministic improvement max(best - mean, 0); always >= 0.
inline double expected_improvement(double mean, double variance, double best_so_far) {
    const double sigma = std::sqrt(std::max(variance, 0.0));
    const double gap = best_so_far - mean;
    if (sigma <= 0.0) return std::max(gap, 0.0);
    const double z = gap / sigma;
    const double ei = gap * norm_cdf(z) + sigma * norm_pdf(z);
    return std::max(ei, 0.0);
}

} // namespace psa
