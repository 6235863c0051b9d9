#pragma once

#include <cstdint>
#include <random>

namespace tomopet {

/// Deterministic random stream. The engine (mt19937_64) and every transform
/// below are fully specified, so streams are reproducible across platforms.
/// Independent sub-streams are addressed by (seed, stream).
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on [0, 1].
    double uniform_closed();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, no cached second variate).
    double normal();
    bool coin() { return (next() >> 63) != 0; }

private:
    std::mt19937_64 engine_;
};

} // namespace tomopet
