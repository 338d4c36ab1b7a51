#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmap/forward.hpp"
#include "gmap/lattice.hpp"

namespace gmap {

enum class Method { IC, IIC, IIV };  // model x algorithm, per the benchmark grid
enum class Init { X01, X02 };        // random / greedy

std::string to_string(Method m);
std::string to_string(Init i);
Method method_from_string(const std::string& s);
Init init_from_string(const std::string& s);

struct ExperimentConfig {
    std::vector<std::pair<int, int>> grid;  // (M, K) cells
    LatticeDims dims{64, 64};
    Model data_model = Model::I;
    int repeats = 10;
    std::vector<Method> methods{Method::IC, Method::IIC, Method::IIV};
    std::vector<Init> inits{Init::X01, Init::X02};
    std::uint64_t root_seed = 0;
    std::string output_dir = ".";
    int sweeps = 100;
    double epsilon = 0.01;  // Model II data noise
    int threads = 0;        // 0 = hardware concurrency
    bool timing = false;    // keep wall_time_ms at 0 for byte-stable outputs
};

struct ResultRow {
    int dataset_id = 0;
    int num_subjects = 0;
    int num_labels = 0;
    Method method = Method::IC;
    Init init = Init::X01;
    int repeat_index = 0;
    double misclassification = 0.0;
    int iterations = 0;
    std::int64_t wall_time_ms = 0;
    bool ok = true;
};

// Fraction of voxels where the maps disagree; no label realignment.
double misclassification_rate(const LabelMap& estimate, const LabelMap& truth);

// Relabels the estimate by the confusion-maximizing label permutation
// (Hungarian assignment); sanity-analysis only, never used by default.
LabelMap align_labels_hungarian(const LabelMap& estimate, const LabelMap& truth);

ExperimentConfig load_config(const std::string& path);

std::vector<ResultRow> run_grid(const ExperimentConfig& config);

std::string results_to_csv(const std::vector<ResultRow>& rows);
std::string summary_to_csv(const std::vector<ResultRow>& rows);

// results.csv, summary.csv, boxplot_<M>_<K>.csv under config.output_dir.
void write_grid_outputs(const ExperimentConfig& config,
                        const std::vector<ResultRow>& rows);

// Linear-interpolation quantile on sorted values, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace gmap
