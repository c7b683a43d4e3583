#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pid {

// Deterministic random stream. The engine is std::mt19937_64 (fully
// specified by the standard); the distributions are written out here
// because the std:: ones are implementation-defined and would make
// artifacts differ between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); rejection sampling removes modulo bias.
    std::uint64_t below(std::uint64_t n);

    // Box-Muller; the second variate is cached.
    double normal();

    // +1 or -1 with equal probability.
    double sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed for a named sub-stream of a parent seed, e.g. ("train/init").
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream);

// Seed for an indexed sub-stream (per-sample, per-epoch).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

} // namespace pid
