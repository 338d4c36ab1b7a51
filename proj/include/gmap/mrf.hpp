#pragma once

#include <cstdint>
#include <vector>

#include "gmap/lattice.hpp"

namespace gmap {

struct MrfSpec {
    LatticeDims dims;
    int num_labels = 2;
    double beta = 0.0;
    int sweeps = 100;
    std::uint64_t seed = 0;
};

// P(label k at s | neighbors) ∝ exp{-beta * #disagreeing neighbors under k}.
std::vector<double> conditional_distribution(const LabelMap& map, int s, int K,
                                             double beta);

// Systematic-scan (raster) Gibbs from a uniform-random start.
LabelMap sample_potts(const MrfSpec& spec);
BinaryMask sample_ising(LatticeDims dims, double beta, int sweeps,
                        std::uint64_t seed);

// Sum over sites of log conditional_distribution at the observed label.
double pseudo_log_likelihood(const LabelMap& map, int K, double beta);

// Golden-section maximizer of the pseudo-likelihood, clamped to [0, 10].
double estimate_beta_pseudolikelihood(const LabelMap& map, int K);

}  // namespace gmap
