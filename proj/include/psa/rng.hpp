#pragma once

#include <cstdint>
#include <random>

namespace psa {

// Seeded random source. Wraps std::mt19937_64 and draws bounded integers by
// rejection sampling so results are reproducible across platforms (the
// engine's output sequence is fixed by the standard, the std distributions
// are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_index(std::uint64_t bound) {
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

    // Uniform real in [0, 1).
    double next_real() {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace psa
