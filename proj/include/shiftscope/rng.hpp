#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace shiftscope {

// All randomness in the project goes through this header. std::mt19937_64 has
// a standard-specified output sequence, but the std distributions do not, so
// the draws below are hand-rolled. Substreams are derived by hashing a parent
// seed with stream tags, which keeps parallel work deterministic regardless
// of thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
    return splitmix64(seed ^ splitmix64(a));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return derive_seed(seed, h);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    return derive_seed(derive_seed(seed, tag), index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n), n > 0; rejection sampling keeps it unbiased
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive range
        return lo + static_cast<std::int64_t>(uniform_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform_real(std::log(lo), std::log(hi)));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal() {  // Box-Muller, no cached spare so the call sequence stays simple
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Marsaglia-Tsang; alpha > 0, unit scale
    double gamma(double alpha) {
        if (alpha < 1.0) {
            const double u = uniform01();
            return gamma(alpha + 1.0) * std::pow(u > 0 ? u : 1e-300, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    int poisson(double mean) {  // Knuth; fine for the small means used here
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    std::vector<double> dirichlet(double alpha, int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        double sum = 0.0;
        for (auto& x : v) {
            x = gamma(alpha);
            sum += x;
        }
        if (sum <= 0.0) sum = 1.0;
        for (auto& x : v) x /= sum;
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {  // Fisher-Yates
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from [0, n), returned sorted
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k >= n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    // Floyd's algorithm
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        std::size_t t = static_cast<std::size_t>(uniform_below(j + 1));
        bool seen = false;
        for (std::size_t p : picked) {
            if (p == t) {
                seen = true;
                break;
            }
        }
        picked.push_back(seen ? j : t);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace shiftscope
