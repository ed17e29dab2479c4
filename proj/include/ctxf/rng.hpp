#pragma once

#include <cstdint>
#include <vector>

namespace ctxf {

// Deterministic splitmix64 generator. One u64 of state so it serializes
// exactly into checkpoints; all distributions are fixed algorithms rather
// than std::<distribution> (whose output is implementation-defined).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // [0, n); n >= 1. Rejection sampling keeps the draw unbiased.
    int uniform_int(int n);

    // Box-Muller; the partner variate is discarded so state stays one u64.
    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Derived generator for stream `n`, independent of this one's future draws.
    Rng fork(std::uint64_t n) const;

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

  private:
    std::uint64_t state_;
};

}  // namespace ctxf
