#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace harmonica {

/// mt19937_64 with distribution code written out explicitly, so a given seed
/// yields the same numbers on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent stream derived from a master seed and a stream name
    /// ("init", "shuffle", "dropout", "augment", ...).
    static Rng stream(std::uint64_t seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (one draw per call).
    double normal();
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace harmonica
