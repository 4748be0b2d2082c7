#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "psa/config_space.hpp"
#include "psa/solver.hpp"

namespace psa {

// Injectable time source. The engine never reads the wall clock directly,
// so a whole PSA run can execute under a simulated clock without sleeping.
class TimeSource {
public:
    virtual ~TimeSource() = default;
    virtual double now_s() const = 0;
};

class SteadyClock final : public TimeSource {
public:
    double now_s() const override {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    }
};

class SimulatedClock final : public TimeSource {
public:
    double now_s() const override { return now_; }
    void advance(double seconds) { now_ += seconds; }

private:
    double now_ = 0.0;
};

// How a run is allowed to end: a normal run exhausts its budget, a
// first-solution run stops as soon as any incumbent appears (used by the
// first-runtime timeout bootstrap).
enum class EvalMode { full, first_solution };

// One configuration evaluated on one instance under a hard deadline.
// Implementations: a subprocess adapter around an external solver and the
// built-in synthetic solver.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    // timeout_s > 0. bound, when present, injects the objective cut
    // f < bound; callers must check supports_bound() first. log_path, when
    // non-empty, receives the raw solver output.
    virtual SolverOutcome evaluate(const Configuration& c, double timeout_s,
                                   std::optional<double> bound = std::nullopt,
                                   EvalMode mode = EvalMode::full,
                                   const std::string& log_path = {}) = 0;

    virtual bool supports_bound() const = 0;

    // Extra seconds granted past the soft deadline before the run is
    // forcibly terminated (0 for evaluators that cannot overshoot).
    virtual double grace_s() const = 0;

    // Number of evaluate() calls so far; the cache-soundness tests count
    // real invocations through this.
    std::uint64_t invocations() const { return invocations_; }

protected:
    std::uint64_t invocations_ = 0;
};

} // namespace psa
