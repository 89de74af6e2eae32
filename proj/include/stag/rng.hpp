#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace stag {

// Seeded generator with a fixed cross-machine contract: std::mt19937_64
// (fully specified by the standard) plus rejection-sampled bounded draws
// and Fisher-Yates selection. The draw sequence is part of the
// reproducibility contract documented in the README.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // Uniform in [0, n). Rejection sampling on the top of the 64-bit range
    // so results do not depend on the platform's distribution internals.
    uint64_t below(uint64_t n);

    // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<size_t> sample_without_replacement(size_t n, size_t k);

    std::vector<size_t> permutation(size_t n) { return sample_without_replacement(n, n); }

private:
    std::mt19937_64 gen_;
};

uint64_t splitmix64(uint64_t x);

// Stable hash of a byte string through splitmix64 chaining.
uint64_t hash_bytes(uint64_t seed, const void* data, size_t len);

} // namespace stag
