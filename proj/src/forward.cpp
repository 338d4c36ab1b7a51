#include "gmap/forward.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gmap/mrf.hpp"
#include "gmap/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gmap {

ModelParams sample_params(int K, std::uint64_t seed) {
    if (K < 2) throw std::invalid_argument("K must be >= 2");
    ModelParams p;
    Rng pi_rng(sub_seed(seed, 1));
    p.pi = draw_dirichlet_ones(K, pi_rng);
    Rng eps_rng(sub_seed(seed, 2));
    p.epsilon = draw_beta(1.0, 10.0, eps_rng);
    Rng beta_rng(sub_seed(seed, 3));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    p.beta_x = unif(beta_rng);
    p.beta_h = unif(beta_rng);
    return p;
}

namespace {

int draw_categorical(const std::vector<double>& p, double u) {
    int k = 0;
    const int K = static_cast<int>(p.size());
    for (; k < K - 1; ++k) {
        u -= p[k];
        if (u <= 0.0) break;
    }
    return k;
}

// Z and N use independent sub-streams so the two models agree draw-for-draw
// when epsilon = 0.
LabelMap generate_subject(const LabelMap& truth, const BinaryMask& mask,
                          const ModelParams& params, std::uint64_t seed,
                          bool with_mislabel, bool zero_propagates) {
    if (truth.dims != mask.dims) throw std::invalid_argument("dims mismatch");
    const int K = truth.num_labels;
    Rng z_rng(sub_seed(seed, 11));
    Rng n_rng(sub_seed(seed, 12));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> shift(1, K - 1);

    LabelMap y(truth.dims, K);
    const int propagate_value = zero_propagates ? 0 : 1;
    for (int s = 0; s < truth.dims.size(); ++s) {
        const int n_label = draw_categorical(params.pi, unif(n_rng));
        int z = 0;
        if (with_mislabel && unif(z_rng) >= 1.0 - params.epsilon) z = shift(z_rng);
        if (mask(s) == propagate_value)
            y(s) = (truth(s) + z) % K;
        else
            y(s) = n_label;
    }
    return y;
}

}  // namespace

LabelMap generate_subject_model1(const LabelMap& truth, const BinaryMask& mask,
                                 const ModelParams& params, std::uint64_t seed,
                                 bool mask_zero_propagates) {
    return generate_subject(truth, mask, params, seed, false, mask_zero_propagates);
}

LabelMap generate_subject_model2(const LabelMap& truth, const BinaryMask& mask,
                                 const ModelParams& params, std::uint64_t seed,
                                 bool mask_zero_propagates) {
    return generate_subject(truth, mask, params, seed, true, mask_zero_propagates);
}

Dataset generate_dataset(const GenerateOptions& opts) {
    if (opts.num_subjects < 1 || opts.num_labels < 2)
        throw std::invalid_argument("need M >= 1 and K >= 2");
    Dataset ds;
    ds.model = opts.model;
    ds.seed = opts.seed;
    ds.params = sample_params(opts.num_labels, sub_seed(opts.seed, 100));
    ds.params.epsilon = (opts.model == Model::II) ? opts.epsilon : 0.0;

    MrfSpec xspec{opts.dims, opts.num_labels, ds.params.beta_x, opts.sweeps,
                  sub_seed(opts.seed, 101)};
    ds.truth = sample_potts(xspec);

    ds.masks.reserve(opts.num_subjects);
    ds.subjects.reserve(opts.num_subjects);
    for (int i = 0; i < opts.num_subjects; ++i) {
        ds.masks.push_back(sample_ising(opts.dims, ds.params.beta_h, opts.sweeps,
                                        sub_seed(opts.seed, 200, i)));
        const std::uint64_t yseed = sub_seed(opts.seed, 300, i);
        if (opts.model == Model::I)
            ds.subjects.push_back(generate_subject_model1(
                ds.truth, ds.masks.back(), ds.params, yseed,
                opts.mask_zero_propagates));
        else
            ds.subjects.push_back(generate_subject_model2(
                ds.truth, ds.masks.back(), ds.params, yseed,
                opts.mask_zero_propagates));
    }
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    fs::create_directories(dir);
    json manifest;
    manifest["M"] = ds.num_subjects();
    manifest["K"] = ds.truth.num_labels;
    manifest["rows"] = ds.truth.dims.rows;
    manifest["cols"] = ds.truth.dims.cols;
    manifest["model"] = static_cast<int>(ds.model);
    manifest["seed"] = ds.seed;
    manifest["pi"] = ds.params.pi;
    manifest["epsilon"] = ds.params.epsilon;
    manifest["beta_X"] = ds.params.beta_x;
    manifest["beta_H"] = ds.params.beta_h;
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir);
    os << manifest.dump(2) << '\n';

    write_label_map((fs::path(dir) / "X.map").string(), ds.truth);
    for (int i = 0; i < ds.num_subjects(); ++i) {
        write_mask((fs::path(dir) / ("H_" + std::to_string(i) + ".map")).string(),
                   ds.masks[i]);
        write_label_map(
            (fs::path(dir) / ("Y_" + std::to_string(i) + ".map")).string(),
            ds.subjects[i]);
    }
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw std::runtime_error("cannot read manifest in " + dir);
    json manifest = json::parse(is);

    Dataset ds;
    ds.model = manifest.at("model").get<int>() == 1 ? Model::I : Model::II;
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.params.pi = manifest.at("pi").get<std::vector<double>>();
    ds.params.epsilon = manifest.at("epsilon").get<double>();
    ds.params.beta_x = manifest.at("beta_X").get<double>();
    ds.params.beta_h = manifest.at("beta_H").get<double>();

    ds.truth = read_label_map((fs::path(dir) / "X.map").string());
    const int M = manifest.at("M").get<int>();
    for (int i = 0; i < M; ++i) {
        ds.masks.push_back(
            read_mask((fs::path(dir) / ("H_" + std::to_string(i) + ".map")).string()));
        ds.subjects.push_back(read_label_map(
            (fs::path(dir) / ("Y_" + std::to_string(i) + ".map")).string()));
    }
    return ds;
}

}  // namespace gmap
