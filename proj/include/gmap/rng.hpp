#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gmap {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(root ^ mix64(a)) ^ mix64(b + 0x6a09e667f3bcc909ULL));
}

using Rng = std::mt19937_64;

inline std::vector<double> draw_dirichlet_ones(int k, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> v(k);
    double sum = 0.0;
    for (auto& x : v) {
        x = expo(rng);
        sum += x;
    }
    for (auto& x : v) x /= sum;
    return v;
}

inline double draw_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

}  // namespace gmap
