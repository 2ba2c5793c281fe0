#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace osc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of realization `index` in an ensemble; independent of scheduling.
inline std::uint64_t realization_seed(std::uint64_t base_seed, std::uint64_t index) {
    return base_seed ^ index;
}

// Normal deviates for one seed. The seed is whitened first so that
// neighbouring seeds (base ^ 0, base ^ 1, ...) give unrelated streams.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : eng_(splitmix64(seed)) {}
    double operator()() { return dist_(eng_); }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

// `count` uniform draws on [lo, hi) from one whitened seed
inline std::vector<double> uniform_draws(std::uint64_t seed, int count, double lo, double hi) {
    std::mt19937_64 eng(splitmix64(seed));
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(count);
    for (auto& v : out) v = dist(eng);
    return out;
}

}  // namespace osc
