#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace synthprod {

// Seeded random source with platform-independent draws. std::mt19937_64's
// output sequence is fixed by the standard; the std distributions are not,
// so conversions to doubles and bounded integers are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01();
    // Uniform in [0, n); n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace synthprod
