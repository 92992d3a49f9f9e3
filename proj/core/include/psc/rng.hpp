#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace psc {

/// splitmix64 finalizer; the mixing primitive behind seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Derive an independent child seed from a root seed and up to three stream
/// tags (module tag, sample index, attempt, ...). Children keyed by distinct
/// tags are decorrelated, so replicates can run in any order and still
/// reproduce bit-identically.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/**
 * Deterministic random source used by every stochastic operation.
 *
 * The stream is std::mt19937_64 (output sequence fixed by the standard) and
 * all bounded draws go through rejection sampling, so results are identical
 * across platforms and standard-library implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound); bound must be >= 1.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Fisher-Yates shuffle driven by below().
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace psc
