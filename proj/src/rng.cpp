#include "stag/rng.hpp"

#include <cstring>
#include <stdexcept>

namespace stag {

uint64_t Rng::below(uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("Rng::below: n must be positive");
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
        const uint64_t x = gen_();
        if (x < limit) {
            return x % n;
        }
    }
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
    if (k > n) {
        throw std::invalid_argument("sample_without_replacement: k > n");
    }
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + static_cast<size_t>(below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t hash_bytes(uint64_t seed, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
    size_t i = 0;
    while (i + 8 <= len) {
        uint64_t w;
        std::memcpy(&w, p + i, 8);
        h = splitmix64(h ^ w);
        i += 8;
    }
    uint64_t tail = 0;
    for (size_t j = 0; i + j < len; ++j) {
        tail |= static_cast<uint64_t>(p[i + j]) << (8 * j);
    }
    h = splitmix64(h ^ tail ^ (static_cast<uint64_t>(len) << 56));
    return h;
}

} // namespace stag
