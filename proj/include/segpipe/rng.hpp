#pragma once

// Portable pseudo-random streams. std::mt19937_64 is bit-exact across
// standard libraries; the distributions here are spelled out because the
// std:: distribution algorithms are implementation-defined.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace segpipe {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for an independent stream keyed by (seed, key).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n); n > 0.
    std::size_t uniform_index(std::size_t n);

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace segpipe
