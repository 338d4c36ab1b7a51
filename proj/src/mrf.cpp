#include "gmap/mrf.hpp"

#include <cmath>
#include <stdexcept>

#include "gmap/rng.hpp"

namespace gmap {

std::vector<double> conditional_distribution(const LabelMap& map, int s, int K,
                                             double beta) {
    std::array<int, 8> nb;
    const int n = neighbors(s, map.dims, nb);
    // Disagreement count for label k = n - (# neighbors carrying k).
    std::vector<int> count(K, 0);
    for (int j = 0; j < n; ++j) {
        const int v = map(nb[j]);
        if (v < K) ++count[v];
    }
    std::vector<double> p(K);
    double emin = beta * n;
    for (int k = 0; k < K; ++k) {
        p[k] = beta * (n - count[k]);
        if (p[k] < emin) emin = p[k];
    }
    double norm = 0.0;
    for (int k = 0; k < K; ++k) {
        p[k] = std::exp(emin - p[k]);
        norm += p[k];
    }
    for (int k = 0; k < K; ++k) p[k] /= norm;
    return p;
}

namespace {

void gibbs_sweeps(GridXi& values, LatticeDims dims, int K, double beta,
                  int sweeps, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::array<int, 8> nb;
    std::vector<int> count(K);
    std::vector<double> w(K);
    int* v = values.data();
    const int N = dims.size();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int s = 0; s < N; ++s) {
            const int n = neighbors(s, dims, nb);
            std::fill(count.begin(), count.end(), 0);
            for (int j = 0; j < n; ++j) ++count[v[nb[j]]];
            double norm = 0.0;
            for (int k = 0; k < K; ++k) {
                w[k] = std::exp(-beta * (n - count[k]));
                norm += w[k];
            }
            double u = unif(rng) * norm;
            int k = 0;
            for (; k < K - 1; ++k) {
                u -= w[k];
                if (u <= 0.0) break;
            }
            v[s] = k;
        }
    }
}

}  // namespace

LabelMap sample_potts(const MrfSpec& spec) {
    if (spec.num_labels < 2 || spec.beta < 0 || spec.sweeps < 1)
        throw std::invalid_argument("invalid MrfSpec");
    Rng rng(spec.seed);
    LabelMap map(spec.dims, spec.num_labels);
    std::uniform_int_distribution<int> pick(0, spec.num_labels - 1);
    for (int s = 0; s < spec.dims.size(); ++s) map(s) = pick(rng);
    gibbs_sweeps(map.values, spec.dims, spec.num_labels, spec.beta, spec.sweeps,
                 rng);
    return map;
}

BinaryMask sample_ising(LatticeDims dims, double beta, int sweeps,
                        std::uint64_t seed) {
    MrfSpec spec{dims, 2, beta, sweeps, seed};
    const LabelMap m = sample_potts(spec);
    BinaryMask mask(dims);
    mask.values = m.values;
    return mask;
}

double pseudo_log_likelihood(const LabelMap& map, int K, double beta) {
    std::array<int, 8> nb;
    std::vector<int> count(K);
    double total = 0.0;
    for (int s = 0; s < map.dims.size(); ++s) {
        const int n = neighbors(s, map.dims, nb);
        std::fill(count.begin(), count.end(), 0);
        for (int j = 0; j < n; ++j) ++count[map(nb[j])];
        double norm = 0.0;
        for (int k = 0; k < K; ++k) norm += std::exp(-beta * (n - count[k]));
        total += -beta * (n - count[map(s)]) - std::log(norm);
    }
    return total;
}

double estimate_beta_pseudolikelihood(const LabelMap& map, int K) {
    constexpr double kLo = 0.0, kHi = 10.0, kTol = 1e-4;
    constexpr double invphi = 0.6180339887498949;
    double a = kLo, b = kHi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = pseudo_log_likelihood(map, K, c);
    double fd = pseudo_log_likelihood(map, K, d);
    while (b - a > kTol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = pseudo_log_likelihood(map, K, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = pseudo_log_likelihood(map, K, d);
        }
    }
    double beta = 0.5 * (a + b);
    // Boundary optima beat the interior bracket on monotone objectives.
    if (pseudo_log_likelihood(map, K, kHi) >= pseudo_log_likelihood(map, K, beta))
        beta = kHi;
    if (pseudo_log_likelihood(map, K, kLo) >= pseudo_log_likelihood(map, K, beta))
        beta = kLo;
    return beta;
}

}  // namespace gmap
