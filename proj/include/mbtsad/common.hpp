#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mbtsad {

// Dense row-major matrix of doubles. Value semantics throughout.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
// standard; the bounded draws below avoid std::uniform_*_distribution,
// whose results vary between standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
        uint64_t n = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        uint64_t lim = n == 0 ? 0 : UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (n != 0 && x >= lim);
        return static_cast<int>(lo + static_cast<int64_t>(x % n));
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [-s, s].
    double uniform_sym(double s) { return (2.0 * uniform01() - 1.0) * s; }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (int i = static_cast<int>(xs.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(xs[i], xs[static_cast<size_t>(j)]);
        }
    }

    // k distinct values from {0, ..., n-1}, in random order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = uniform_int(i, n - 1);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 gen_;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t x);

// Deterministic sub-seed derivation from a base seed plus a tag and index.
inline uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t k = 0) {
    uint64_t h = fnv1a64(tag);
    h = fnv1a64(&seed, sizeof(seed), h);
    h = fnv1a64(&k, sizeof(k), h);
    // splitmix64 finalizer so nearby inputs land far apart
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

}  // namespace mbtsad
