#include "aya/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace aya::numerics {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64()
{
    const std::uint64_t key = mix64(state_.seed) ^ mix64(state_.stream * 0xd1b54a32d192ed03ULL + 1);
    return mix64(key + mix64(state_.counter++));
}

double Rng::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n)
{
    if (n <= 1) {
        return 0;
    }
    // Rejection keeps the result unbiased for n that do not divide 2^64.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double Rng::normal()
{
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double stddev, double bound)
{
    for (;;) {
        const double z = normal();
        if (std::abs(z) <= bound) {
            return z * stddev;
        }
    }
}

Rng Rng::split(std::uint64_t stream) const
{
    return Rng(mix64(state_.seed ^ mix64(state_.stream)) ^ stream, mix64(stream + state_.stream));
}

} // namespace aya::numerics
