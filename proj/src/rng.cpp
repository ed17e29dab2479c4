#include "ctxf/rng.hpp"

#include <cmath>
#include <numbers>

#include "ctxf/errors.hpp"

namespace ctxf {

int Rng::uniform_int(int n) {
    if (n <= 0) {
        throw ContractError("Rng::uniform_int requires n >= 1, got " + std::to_string(n));
    }
    const auto un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v = next_u64();
    while (v >= limit) {
        v = next_u64();
    }
    return static_cast<int>(v % un);
}

double Rng::normal(double mean, double stddev) {
    // u1 in (0,1] so log() stays finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::uint64_t n) const {
    // Mix the stream id through one splitmix round of a copied state.
    Rng child(state_ ^ (0xA0761D6478BD642FULL * (n + 1)));
    child.next_u64();
    return child;
}

}  // namespace ctxf
