#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include "gmap/bench.hpp"
#include "gmap/forward.hpp"
#include "gmap/infer.hpp"
#include "gmap/lattice.hpp"
#include "gmap/mrf.hpp"
#include "gmap/preproc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_probmap(const std::string& path, const gmap::GridXd& q) {
    std::ofstream os(path);
    os << q.rows() << ' ' << q.cols() << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.6f", q(r, c));
            os << (c ? " " : "") << buf;
        }
        os << '\n';
    }
}

void write_theta(const std::string& path, const gmap::ModelParams& p) {
    json j;
    j["pi"] = p.pi;
    j["epsilon"] = p.epsilon;
    j["beta_X"] = p.beta_x;
    j["beta_H"] = p.beta_h;
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

int cmd_generate(const std::string& out, int m, int k, int rows, int cols,
                 int model, std::uint64_t seed, int sweeps, double epsilon,
                 const std::string& mask_convention) {
    gmap::GenerateOptions opts;
    opts.num_subjects = m;
    opts.num_labels = k;
    opts.dims = {rows, cols};
    opts.model = model == 1 ? gmap::Model::I : gmap::Model::II;
    opts.seed = seed;
    opts.sweeps = sweeps;
    opts.epsilon = epsilon;
    opts.mask_zero_propagates = mask_convention != "table1";
    gmap::save_dataset(out, gmap::generate_dataset(opts));
    std::cout << "wrote dataset to " << out << "\n";
    return 0;
}

int cmd_infer(const std::string& data_dir, const std::string& out, int model,
              const std::string& algo, const std::string& init,
              const std::string& init_file, std::uint64_t seed, int max_iter,
              double tol, int snapshot_every, bool no_estimate_theta,
              bool q_prior_coupling, const std::string& x_update) {
    const gmap::Dataset ds = gmap::load_dataset(data_dir);
    const int k = ds.truth.num_labels;

    gmap::LabelMap x0;
    if (init == "random")
        x0 = gmap::init_random(ds.truth.dims, k, seed);
    else if (init == "greedy")
        x0 = gmap::init_greedy(ds.subjects);
    else
        x0 = gmap::read_label_map(init_file);

    gmap::InferenceOptions opts;
    opts.model = model == 1 ? gmap::Model::I : gmap::Model::II;
    opts.max_iterations = max_iter > 0 ? max_iter : (algo == "vb" ? 200 : 100);
    opts.convergence_tol = tol;
    opts.estimate_theta = !no_estimate_theta;
    opts.seed = seed;
    opts.q_prior_coupling = q_prior_coupling;
    opts.sequential_x_update = x_update != "simultaneous";

    fs::create_directories(out);
    gmap::IterationCallback snapshot;
    if (snapshot_every > 0) {
        fs::create_directories(fs::path(out) / "trace");
        snapshot = [&](int iter, const gmap::LabelMap& x) {
            if (iter % snapshot_every == 0)
                gmap::write_label_map(
                    (fs::path(out) / "trace" /
                     ("X_iter" + std::to_string(iter) + ".map"))
                        .string(),
                    x);
        };
    }

    const gmap::ModelParams p0 = gmap::default_initial_params(k);
    gmap::InferenceState state =
        algo == "vb" ? gmap::run_vb(ds.subjects, x0, p0, opts, snapshot)
                     : gmap::run_icm(ds.subjects, x0, p0, opts, snapshot);

    gmap::write_label_map((fs::path(out) / "X_est.map").string(), state.x);
    write_theta((fs::path(out) / "theta.json").string(), state.params);
    {
        std::ofstream os(fs::path(out) / "elbo.csv");
        os << "iteration,F\n";
        char buf[40];
        for (size_t i = 0; i < state.elbo_trace.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", state.elbo_trace[i]);
            os << (i + 1) << ',' << buf << '\n';
        }
    }
    if (algo == "vb") {
        for (int i = 0; i < state.q.num_subjects(); ++i)
            write_probmap(
                (fs::path(out) / ("q_" + std::to_string(i) + ".probmap")).string(),
                state.q.q[i]);
    } else {
        for (size_t i = 0; i < state.masks.size(); ++i)
            gmap::write_mask(
                (fs::path(out) / ("H_" + std::to_string(i) + ".map")).string(),
                state.masks[i]);
    }
    std::cout << "converged after " << state.iterations << " iterations\n";
    return 0;
}

int cmd_grid(const std::string& config_path, std::int64_t seed_override,
             const std::string& dims_override, bool timing, int threads) {
    gmap::ExperimentConfig config = gmap::load_config(config_path);
    if (seed_override >= 0)
        config.root_seed = static_cast<std::uint64_t>(seed_override);
    if (!dims_override.empty()) {
        const auto xpos = dims_override.find('x');
        if (xpos == std::string::npos)
            throw CLI::ValidationError("--dims expects ROWSxCOLS");
        config.dims = {std::stoi(dims_override.substr(0, xpos)),
                       std::stoi(dims_override.substr(xpos + 1))};
    }
    if (timing) config.timing = true;
    if (threads > 0) config.threads = threads;

    const auto rows = gmap::run_grid(config);
    gmap::write_grid_outputs(config, rows);
    std::cout << "wrote " << rows.size() << " rows to " << config.output_dir
              << "/results.csv\n";
    return 0;
}

int cmd_preproc(const std::string& comp_dir, const std::string& out,
                int num_clusters, double fdr_q, double sigma, int min_subjects,
                int rows, int cols) {
    const gmap::LatticeDims dims{rows, cols};
    std::vector<gmap::Component> comps;
    const std::regex name_re(R"(comp_(\d+)_(\d+)\.smap)");
    std::vector<fs::path> smaps;
    for (const auto& entry : fs::directory_iterator(comp_dir))
        if (entry.path().extension() == ".smap") smaps.push_back(entry.path());
    std::sort(smaps.begin(), smaps.end());

    int max_subject = -1;
    for (const auto& path : smaps) {
        std::smatch match;
        const std::string name = path.filename().string();
        if (!std::regex_match(name, match, name_re)) continue;
        gmap::Component c;
        c.subject_id = std::stoi(match[1]);
        max_subject = std::max(max_subject, c.subject_id);

        std::ifstream is(path);
        int r, cl;
        is >> r >> cl;
        if (r != rows || cl != cols)
            throw std::runtime_error("component dims mismatch in " + name);
        c.spatial_map.resize(dims.size());
        for (int s = 0; s < dims.size(); ++s) is >> c.spatial_map(s);

        fs::path tc_path = path;
        tc_path.replace_extension(".tc");
        std::ifstream tcs(tc_path);
        if (!tcs) throw std::runtime_error("missing time course for " + name);
        std::vector<double> tc;
        double v;
        while (tcs >> v) tc.push_back(v);
        c.time_course = Eigen::Map<Eigen::VectorXd>(tc.data(), tc.size());
        comps.push_back(std::move(c));
    }
    if (comps.empty()) throw std::runtime_error("no components found in " + comp_dir);
    const int num_subjects = max_subject + 1;
    if (min_subjects <= 0) min_subjects = (num_subjects + 1) / 2;

    const auto dist = gmap::component_distance_matrix(comps, dims, sigma);
    const auto assignment = gmap::average_link_cluster(dist, num_clusters);
    const auto retained = gmap::retain_clusters(comps, assignment, min_subjects);
    const int k = static_cast<int>(retained.size()) + 1;
    const auto maps = gmap::build_subject_maps(comps, assignment, retained,
                                               num_subjects, k, dims, fdr_q);

    fs::create_directories(out);
    for (int i = 0; i < num_subjects; ++i)
        gmap::write_label_map(
            (fs::path(out) / ("Y_" + std::to_string(i) + ".map")).string(),
            maps[i]);
    std::cout << "retained " << retained.size() << " clusters; wrote "
              << num_subjects << " subject maps to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& est_path, const std::string& truth_path,
             const std::string& align) {
    gmap::LabelMap est = gmap::read_label_map(est_path);
    const gmap::LabelMap truth = gmap::read_label_map(truth_path);
    if (align == "hungarian") est = gmap::align_labels_hungarian(est, truth);
    std::printf("%.6f\n", gmap::misclassification_rate(est, truth));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-representative label map estimation toolkit"};
    app.require_subcommand(1);

    // generate
    std::string gen_out = "dataset";
    int gen_m = 10, gen_k = 2, gen_rows = 64, gen_cols = 64, gen_model = 2,
        gen_sweeps = 100;
    std::uint64_t gen_seed = 0;
    double gen_eps = 0.01;
    std::string gen_mask_conv = "maintext";
    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    gen->add_option("--out", gen_out, "Output directory");
    gen->add_option("-M,--subjects", gen_m, "Number of subjects");
    gen->add_option("-K,--labels", gen_k, "Number of labels");
    gen->add_option("--rows", gen_rows, "Lattice rows");
    gen->add_option("--cols", gen_cols, "Lattice cols");
    gen->add_option("--model", gen_model, "Forward model (1 or 2)")
        ->check(CLI::IsMember({1, 2}));
    gen->add_option("--seed", gen_seed, "Root seed");
    gen->add_option("--sweeps", gen_sweeps, "Gibbs sweeps for X and H");
    gen->add_option("--epsilon", gen_eps, "Model II mislabel probability");
    gen->add_option("--mask-convention", gen_mask_conv,
                    "maintext: H=0 propagates; table1: H=1 propagates")
        ->check(CLI::IsMember({"maintext", "table1"}));

    // infer
    std::string inf_data, inf_out = "results", inf_algo = "vb",
                inf_init = "random", inf_init_file, inf_x_update = "sequential";
    int inf_model = 2, inf_max_iter = 0, inf_snapshot = 0;
    double inf_tol = 1e-6;
    std::uint64_t inf_seed = 0;
    bool inf_no_theta = false, inf_coupling = false;
    auto* inf = app.add_subcommand("infer", "Run inference on a dataset");
    inf->add_option("--data", inf_data, "Dataset directory")->required();
    inf->add_option("--out", inf_out, "Results directory");
    inf->add_option("--model", inf_model, "Inference model (1 or 2)")
        ->check(CLI::IsMember({1, 2}));
    inf->add_option("--algo", inf_algo, "icm or vb")
        ->check(CLI::IsMember({"icm", "vb"}));
    inf->add_option("--init", inf_init, "random, greedy, or file")
        ->check(CLI::IsMember({"random", "greedy", "file"}));
    inf->add_option("--init-file", inf_init_file, "Map file for --init file");
    inf->add_option("--seed", inf_seed, "Seed for random init");
    inf->add_option("--max-iter", inf_max_iter, "Iteration cap (0 = default)");
    inf->add_option("--tol", inf_tol, "Relative convergence tolerance on F");
    inf->add_option("--snapshot-every", inf_snapshot,
                    "Write trace/X_iter<k>.map every k iterations");
    inf->add_flag("--no-estimate-theta", inf_no_theta, "Freeze theta");
    inf->add_flag("--q-prior-coupling", inf_coupling,
                  "Mean-field neighbor terms in the q update");
    inf->add_option("--x-update", inf_x_update, "sequential or simultaneous")
        ->check(CLI::IsMember({"sequential", "simultaneous"}));

    // grid
    std::string grid_config, grid_dims;
    std::int64_t grid_seed = -1;
    bool grid_timing = false;
    int grid_threads = 0;
    auto* grid = app.add_subcommand("grid", "Run the benchmark grid");
    grid->add_option("--config", grid_config, "JSON experiment config")
        ->required();
    grid->add_option("--seed", grid_seed, "Override root_seed");
    grid->add_option("--dims", grid_dims, "Override lattice dims, ROWSxCOLS");
    grid->add_flag("--timing", grid_timing, "Record wall-clock times");
    grid->add_option("--threads", grid_threads, "Worker threads");

    // preproc
    std::string pre_dir, pre_out = "subject_maps";
    int pre_clusters = 2, pre_min_subjects = 0, pre_rows = 64, pre_cols = 64;
    double pre_q = 0.05, pre_sigma = 1.0;
    auto* pre = app.add_subcommand("preproc",
                                   "Cluster components into subject maps");
    pre->add_option("--components", pre_dir, "Component directory")->required();
    pre->add_option("--out", pre_out, "Output directory");
    pre->add_option("--clusters", pre_clusters, "Number of clusters");
    pre->add_option("--q", pre_q, "FDR level");
    pre->add_option("--sigma", pre_sigma, "Spatial kernel width (pixels)");
    pre->add_option("--min-subjects", pre_min_subjects,
                    "Cluster retention threshold (0 = half the subjects)");
    pre->add_option("--rows", pre_rows, "Lattice rows");
    pre->add_option("--cols", pre_cols, "Lattice cols");

    // eval
    std::string eval_est, eval_truth, eval_align = "none";
    auto* ev = app.add_subcommand("eval", "Misclassification between two maps");
    ev->add_option("estimate", eval_est, "Estimated map file")->required();
    ev->add_option("truth", eval_truth, "Reference map file")->required();
    ev->add_option("--align-labels", eval_align, "none or hungarian")
        ->check(CLI::IsMember({"none", "hungarian"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(gen_out, gen_m, gen_k, gen_rows, gen_cols,
                                gen_model, gen_seed, gen_sweeps, gen_eps,
                                gen_mask_conv);
        if (inf->parsed())
            return cmd_infer(inf_data, inf_out, inf_model, inf_algo, inf_init,
                             inf_init_file, inf_seed, inf_max_iter, inf_tol,
                             inf_snapshot, inf_no_theta, inf_coupling,
                             inf_x_update);
        if (grid->parsed())
            return cmd_grid(grid_config, grid_seed, grid_dims, grid_timing,
                            grid_threads);
        if (pre->parsed())
            return cmd_preproc(pre_dir, pre_out, pre_clusters, pre_q, pre_sigma,
                               pre_min_subjects, pre_rows, pre_cols);
        if (ev->parsed()) return cmd_eval(eval_est, eval_truth, eval_align);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
