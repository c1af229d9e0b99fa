#pragma once

#include <cstddef>
#include <cstdint>

namespace aya::numerics {

struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;

    friend bool operator==(const RngState&, const RngState&) = default;
};

// Counter-based generator: draw i of (seed, stream) is a pure function of the
// triple, so streams can be split off without consuming the parent and the
// integer sequence is identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : state_{seed, stream, 0} {}
    explicit Rng(RngState state) : state_(state) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    // Normal(0, stddev) resampled until it lies within `bound` standard deviations.
    double truncated_normal(double stddev, double bound = 2.0);

    // Independent child stream keyed by `stream`; does not advance this generator.
    Rng split(std::uint64_t stream) const;

    const RngState& state() const noexcept { return state_; }

private:
    RngState state_;
};

std::uint64_t mix64(std::uint64_t x);

} // namespace aya::numerics
