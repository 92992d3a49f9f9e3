#include "psc/rng.hpp"

#include "psc/errors.hpp"

namespace psc {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = mix64(root);
    h = mix64(h ^ mix64(a));
    h = mix64(h ^ mix64(b));
    h = mix64(h ^ mix64(c));
    return h;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) {
        throw ValidationError("Rng::below requires bound >= 1");
    }
    if ((bound & (bound - 1)) == 0) {
        return next_u64() & (bound - 1);
    }
    // Rejection sampling: accept draws above 2^64 mod bound so every residue
    // is equally likely.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        std::uint64_t r = next_u64();
        if (r >= threshold) {
            return r % bound;
        }
    }
}

} // namespace psc
