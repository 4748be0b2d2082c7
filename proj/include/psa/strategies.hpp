#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "psa/config_space.hpp"
#include "psa/gp.hpp"
#include "psa/rng.hpp"

namespace psa {

// The probing-phase strategy interface: propose the next configuration,
// absorb the result of the last trial, report the best configuration found.
// Time allocation is deliberately not part of this interface; the engine
// owns the budget.
class Strategy {
public:
    Strategy(ConfigSpace space, std::uint64_t seed)
        : space_(std::move(space)), rng_(seed), space_size_(cardinality(space_)) {}
    virtual ~Strategy() = default;

    // Next unvisited configuration, or nullopt once the strategy is
    // exhausted. No configuration is ever proposed twice.
    virtual std::optional<Configuration> next_config() = 0;

    // Records one trial. objective is canonical-minimize and absent for
    // failed or timed-out probes. The incumbent moves only on strict
    // improvement, so the first achiever of a value keeps it.
    void update_model(const Configuration& c, std::optional<double> objective, double runtime_s) {
        visited_.insert(c);
        if (objective && (!incumbent_ || *objective < incumbent_objective_)) {
            incumbent_ = c;
            incumbent_objective_ = *objective;
        }
        on_update(c, objective, runtime_s);
    }

    // Incumbent if any successful trial exists, else the space default
    // (the solving-phase fallback when probing found nothing).
    Configuration get_best_config() const {
        return incumbent_ ? *incumbent_ : space_.default_config;
    }

    std::optional<double> incumbent_objective() const {
        return incumbent_ ? std::optional<double>(incumbent_objective_) : std::nullopt;
    }

    bool visited(const Configuration& c) const { return visited_.count(c) > 0; }
    std::size_t visited_count() const { return visited_.size(); }
    const ConfigSpace& space() const { return space_; }

protected:
    virtual void on_update(const Configuration&, std::optional<double>, double) {}

    bool exhausted() const { return visited_.size() >= space_size_; }

    // Uniform sample among unvisited configurations: rejection sampling
    // first, exact enumeration as a fallback on small spaces.
    std::optional<Configuration> random_unvisited(int tries = 100) {
        if (exhausted()) return std::nullopt;
        for (int i = 0; i < tries; ++i) {
            Configuration c = random_config(space_, rng_);
            if (!visited(c)) return c;
        }
        if (space_size_ <= (1ull << 20)) {
            std::vector<std::uint64_t> open;
            for (std::uint64_t lin = 0; lin < space_size_; ++lin)
                if (!visited(config_at(space_, lin))) open.push_back(lin);
            if (open.empty()) return std::nullopt;
            return config_at(space_, open[rng_.next_index(open.size())]);
        }
        return std::nullopt;
    }

    ConfigSpace space_;
    Rng rng_;
    std::uint64_t space_size_;
    std::unordered_set<Configuration, ConfigurationHash> visited_;
    std::optional<Configuration> incumbent_;
    double incumbent_objective_ = 0.0;
};

// Pure exploration: uniform unvisited samples.
class RandomStrategy final : public Strategy {
public:
    using Strategy::Strategy;
    std::optional<Configuration> next_config() override { return random_unvisited(); }
};

// Exhaustive mixed-radix enumeration; dimension 0 varies fastest.
class GridStrategy final : public Strategy {
public:
    using Strategy::Strategy;

    std::optional<Configuration> next_config() override {
        while (cursor_ < space_size_) {
            Configuration c = config_at(space_, cursor_++);
            if (!visited(c)) return c;
        }
        return std::nullopt;
    }

private:
    std::uint64_t cursor_ = 0;
};

// Hamming-distance local search: walk the 1-neighborhood of the incumbent in
// enumeration order; when a neighborhood is exhausted, restart from a fresh
// random unvisited configuration (the perturbation step).
class HammingStrategy final : public Strategy {
public:
    HammingStrategy(ConfigSpace space, std::uint64_t seed)
        : Strategy(std::move(space), seed), anchor_(space_.default_config) {
        queue_ = neighbors(space_, anchor_);
    }

    std::optional<Configuration> next_config() override {
        if (exhausted()) return std::nullopt;
        if (incumbent_ && *incumbent_ != anchor_) re_anchor(*incumbent_);
        if (propose_anchor_ && !visited(anchor_)) {
            propose_anchor_ = false;
            return anchor_;
        }
        propose_anchor_ = false;
        while (queue_pos_ < queue_.size()) {
            const Configuration& c = queue_[queue_pos_++];
            if (!visited(c)) return c;
        }
        // Neighborhood exhausted: perturb.
        auto fresh = random_unvisited();
        if (!fresh) return std::nullopt;
        re_anchor(*fresh);
        propose_anchor_ = false;
        return anchor_;
    }

    // The configuration whose neighborhood is being enumerated; equals the
    // incumbent whenever one exists.
    const Configuration& anchor() const { return anchor_; }

private:
    void re_anchor(const Configuration& c) {
        anchor_ = c;
        queue_ = neighbors(space_, anchor_);
        queue_pos_ = 0;
    }

    Configuration anchor_;
    std::vector<Configuration> queue_;
    std::size_t queue_pos_ = 0;
    bool propose_anchor_ = true;
};

struct BoParams {
    std::size_t n_init = 5;          // seed proposals before the model takes over
    std::size_t pool_random = 256;   // random candidates per acquisition round
    std::uint64_t exact_pool_limit = 1024; // spaces up to this size are scanned fully
};

// Bayesian optimization: a GP over past trials proposes the unvisited
// candidate with maximal expected improvement. Failed probes enter the model
// at a finite pessimistic value instead of the infinity the bookkeeping
// uses, which preserves ranking without destroying the fit.
class BoStrategy final : public Strategy {
public:
    BoStrategy(ConfigSpace space, std::uint64_t seed, BoParams params = {})
        : Strategy(std::move(space), seed), params_(params),
          kernel_(KernelParams::defaults(space_.dimension_count())) {}

    std::optional<Configuration> next_config() override {
        if (exhausted()) return std::nullopt;
        if (proposals_ < params_.n_init) {
            ++proposals_;
            if (!visited(space_.default_config)) return space_.default_config;
            return random_unvisited();
        }
        ++proposals_;
        if (!model_) return random_unvisited(); // no trials reported yet

        const std::vector<Configuration> pool = candidate_pool();
        if (pool.empty()) return random_unvisited();

        const double best = incumbent_ ? incumbent_objective_ : lowest_model_target_;
        std::size_t arg = 0;
        double best_ei = -1.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto [mean, variance] = model_->posterior(pool[i]);
            const double ei = expected_improvement(mean, variance, best);
            if (ei > best_ei) { // ties keep the lowest pool index
                best_ei = ei;
                arg = i;
            }
        }
        return pool[arg];
    }

    const GpModel* model() const { return model_ ? &*model_ : nullptr; }

    // The exact target vector the GP was last fitted on (penalized values
    // for failed trials), for cross-checking.
    const std::vector<double>& model_targets() const { return last_targets_; }

private:
    void on_update(const Configuration& c, std::optional<double> objective, double) override {
        trials_.emplace_back(c, objective);
        refit();
    }

    void refit() {
        std::vector<double> successes;
        for (const auto& [c, obj] : trials_)
            if (obj) successes.push_back(*obj);

        double penalty = 1.0;
        if (!successes.empty()) {
            const double worst = *std::max_element(successes.begin(), successes.end());
            double mean = 0.0;
            for (double v : successes) mean += v;
            mean /= double(successes.size());
            double var = 0.0;
            for (double v : successes) var += (v - mean) * (v - mean);
            var /= double(successes.size());
            const double spread = std::sqrt(var);
            penalty = worst + (spread > 1e-12 ? spread : 1.0);
        }

        std::vector<Configuration> inputs;
        std::vector<double> targets;
        inputs.reserve(trials_.size());
        targets.reserve(trials_.size());
        for (const auto& [c, obj] : trials_) {
            inputs.push_back(c);
            targets.push_back(obj ? *obj : penalty);
        }
        lowest_model_target_ = *std::min_element(targets.begin(), targets.end());
        last_targets_ = targets;
        model_ = GpModel::fit(std::move(inputs), std::move(targets), kernel_);
    }

    // Unvisited neighbors of the incumbent, a batch of random unvisited
    // samples, and the whole space when it is small; first occurrence wins
    // for deduplication so tie-breaking stays deterministic.
    std::vector<Configuration> candidate_pool() {
        std::vector<Configuration> pool;
        std::unordered_set<Configuration, ConfigurationHash> seen;
        auto push = [&](Configuration c) {
            if (!visited(c) && seen.insert(c).second) pool.push_back(std::move(c));
        };
        if (incumbent_)
            for (auto& n : neighbors(space_, *incumbent_)) push(std::move(n));
        for (std::size_t i = 0; i < params_.pool_random; ++i) push(random_config(space_, rng_));
        if (space_size_ <= params_.exact_pool_limit)
            for (std::uint64_t lin = 0; lin < space_size_; ++lin) push(config_at(space_, lin));
        return pool;
    }

    BoParams params_;
    KernelParams kernel_;
    std::vector<std::pair<Configuration, std::optional<double>>> trials_;
    std::optional<GpModel> model_;
    std::vector<double> last_targets_;
    double lowest_model_target_ = 0.0;
    std::size_t proposals_ = 0;
};

inline std::unique_ptr<Strategy> make_strategy(const std::string& name, const ConfigSpace& space,
                                               std::uint64_t seed, const BoParams& bo_params = {}) {
    if (name == "random") return std::make_unique<RandomStrategy>(space, seed);
    if (name == "grid") return std::make_unique<GridStrategy>(space, seed);
    if (name == "hamming") return std::make_unique<HammingStrategy>(space, seed);
    if (name == "bo") return std::make_unique<BoStrategy>(space, seed, bo_params);
    throw ConfigError("unknown strategy \"" + name + "\" (random|grid|hamming|bo)");
}

} // namespace psa
