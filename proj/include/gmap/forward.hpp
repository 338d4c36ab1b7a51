#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmap/lattice.hpp"

namespace gmap {

enum class Model { I = 1, II = 2 };

struct ModelParams {
    std::vector<double> pi;  // masked-label distribution, length K
    double epsilon = 0.0;    // mislabel probability, [0, 1)
    double beta_x = 0.0;
    double beta_h = 0.0;
};

struct Dataset {
    LabelMap truth;
    std::vector<BinaryMask> masks;
    std::vector<LabelMap> subjects;
    ModelParams params;
    Model model = Model::II;
    std::uint64_t seed = 0;

    int num_subjects() const { return static_cast<int>(subjects.size()); }
};

// pi ~ Dirichlet(1), epsilon ~ Beta(1,10), beta_x, beta_h ~ Uniform(0,1).
ModelParams sample_params(int K, std::uint64_t seed);

// mask_zero_propagates selects the sign convention for H: under the default,
// H(s)=0 copies the group label (with mislabel noise in Model II) and H(s)=1
// substitutes a draw from pi.
LabelMap generate_subject_model1(const LabelMap& truth, const BinaryMask& mask,
                                 const ModelParams& params, std::uint64_t seed,
                                 bool mask_zero_propagates = true);
LabelMap generate_subject_model2(const LabelMap& truth, const BinaryMask& mask,
                                 const ModelParams& params, std::uint64_t seed,
                                 bool mask_zero_propagates = true);

struct GenerateOptions {
    int num_subjects = 10;
    int num_labels = 2;
    LatticeDims dims{64, 64};
    Model model = Model::II;
    int sweeps = 100;
    std::uint64_t seed = 0;
    double epsilon = 0.01;  // Model II mislabel probability
    bool mask_zero_propagates = true;
};

Dataset generate_dataset(const GenerateOptions& opts);

// Directory layout: manifest.json + X.map, H_<i>.map, Y_<i>.map.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace gmap
