#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gmap/lattice.hpp"
#include "gmap/mrf.hpp"

using namespace gmap;

namespace {

double agreeing_pair_fraction(const LabelMap& m) {
    const double disagreements = disagreement_energy(m, 1.0);
    const int r = m.dims.rows, c = m.dims.cols;
    // unordered 8-neighbor pair count
    const double pairs = r * (c - 1) + c * (r - 1) + 2.0 * (r - 1) * (c - 1);
    return 1.0 - disagreements / pairs;
}

// Exact Potts probabilities on a tiny lattice by full enumeration.
std::vector<double> exact_potts(LatticeDims dims, int K, double beta) {
    const int n = dims.size();
    int configs = 1;
    for (int i = 0; i < n; ++i) configs *= K;
    std::vector<double> w(configs);
    double norm = 0.0;
    for (int c = 0; c < configs; ++c) {
        LabelMap m(dims, K);
        int x = c;
        for (int s = 0; s < n; ++s) {
            m(s) = x % K;
            x /= K;
        }
        w[c] = std::exp(-disagreement_energy(m, beta));
        norm += w[c];
    }
    for (auto& p : w) p /= norm;
    return w;
}

}  // namespace

TEST_CASE("conditional distribution") {
    LabelMap m({3, 3}, 4);
    m.values.setZero();

    SUBCASE("zero coupling is uniform") {
        const auto p = conditional_distribution(m, 4, 4, 0.0);
        for (double x : p) CHECK(x == doctest::Approx(0.25));
    }
    SUBCASE("strong unanimous neighborhood") {
        LabelMap b({3, 3}, 2);
        b.values.setConstant(1);
        const auto p = conditional_distribution(b, 4, 2, 1.0);
        const double z = std::exp(-8.0) + 1.0;
        CHECK(p[0] == doctest::Approx(std::exp(-8.0) / z).epsilon(1e-10));
        CHECK(p[1] == doctest::Approx(1.0 / z).epsilon(1e-10));
    }
    SUBCASE("sums to one") {
        for (int s = 0; s < 9; ++s) {
            const auto p = conditional_distribution(m, s, 4, 2.3);
            double sum = 0.0;
            for (double x : p) {
                CHECK(x >= 0.0);
                sum += x;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
    SUBCASE("relabeling equivariance") {
        LabelMap a({3, 3}, 3);
        for (int s = 0; s < 9; ++s) a(s) = s % 3;
        const int perm[3] = {1, 2, 0};
        LabelMap b = a;
        for (int s = 0; s < 9; ++s) b(s) = perm[a(s)];
        const auto pa = conditional_distribution(a, 4, 3, 0.8);
        const auto pb = conditional_distribution(b, 4, 3, 0.8);
        for (int k = 0; k < 3; ++k)
            CHECK(pb[perm[k]] == doctest::Approx(pa[k]).epsilon(1e-12));
    }
}

TEST_CASE("potts sampler calibration at beta = 0") {
    const LabelMap m = sample_potts({{32, 32}, 5, 0.0, 10, 7});
    std::vector<int> counts(5, 0);
    for (int s = 0; s < m.dims.size(); ++s) ++counts[m(s)];
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(counts[k] / 1024.0 - 0.2) < 0.05);
}

TEST_CASE("potts sampler orders at strong coupling") {
    const LabelMap m = sample_potts({{16, 16}, 2, 10.0, 200, 11});
    CHECK(agreeing_pair_fraction(m) >= 0.95);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    const MrfSpec spec{{12, 12}, 3, 0.6, 20, 42};
    CHECK(sample_potts(spec).values == sample_potts(spec).values);
    CHECK(sample_ising({12, 12}, 0.6, 20, 42).values ==
          sample_ising({12, 12}, 0.6, 20, 42).values);
}

TEST_CASE("ising sampler calibration") {
    const BinaryMask m0 = sample_ising({32, 32}, 0.0, 10, 3);
    CHECK(std::abs(m0.values.sum() / 1024.0 - 0.5) < 0.05);

    const BinaryMask m1 = sample_ising({16, 16}, 10.0, 200, 5);
    LabelMap as_map({16, 16}, 2);
    as_map.values = m1.values;
    CHECK(agreeing_pair_fraction(as_map) >= 0.95);
}

TEST_CASE("gibbs chain matches exact potts law on 2x2") {
    const LatticeDims dims{2, 2};
    const double beta = 0.5;
    const auto exact = exact_potts(dims, 2, beta);

    // One long chain built from the same full conditionals the sampler
    // uses, recording the configuration after every sweep.
    std::vector<double> freq(16, 0.0);
    const int burn = 500, samples = 60000;
    LabelMap state = sample_potts({dims, 2, beta, burn, 123});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < burn + samples; ++t) {
        for (int s = 0; s < 4; ++s) {
            const auto p = conditional_distribution(state, s, 2, beta);
            state(s) = unif(rng) < p[0] ? 0 : 1;
        }
        if (t >= burn) {
            int code = 0;
            for (int s = 0; s < 4; ++s) code |= state(s) << s;
            freq[code] += 1.0;
        }
    }
    double tv = 0.0;
    for (int c = 0; c < 16; ++c) tv += std::abs(freq[c] / samples - exact[c]);
    CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("pseudo-likelihood estimation") {
    SUBCASE("constant map clamps to 10") {
        LabelMap m({8, 8}, 2);
        m.values.setZero();
        CHECK(estimate_beta_pseudolikelihood(m, 2) == doctest::Approx(10.0));
    }
    SUBCASE("near-uniform field estimates near zero") {
        const LabelMap m = sample_potts({{64, 64}, 2, 0.0, 100, 21});
        CHECK(estimate_beta_pseudolikelihood(m, 2) <= 0.1);
    }
    SUBCASE("recovers beta = 0.8 on average") {
        double total = 0.0;
        for (int seed = 0; seed < 10; ++seed) {
            const LabelMap m = sample_potts({{64, 64}, 2, 0.8, 100, std::uint64_t(1000 + seed)});
            total += estimate_beta_pseudolikelihood(m, 2);
        }
        CHECK(std::abs(total / 10.0 - 0.8) <= 0.25);
    }
}
