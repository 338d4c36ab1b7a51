#include "gmap/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gmap/infer.hpp"
#include "gmap/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gmap {

std::string to_string(Method m) {
    switch (m) {
        case Method::IC: return "IC";
        case Method::IIC: return "IIC";
        case Method::IIV: return "IIV";
    }
    return "?";
}

std::string to_string(Init i) { return i == Init::X01 ? "X01" : "X02"; }

Method method_from_string(const std::string& s) {
    if (s == "IC") return Method::IC;
    if (s == "IIC") return Method::IIC;
    if (s == "IIV") return Method::IIV;
    throw std::invalid_argument("unknown method: " + s);
}

Init init_from_string(const std::string& s) {
    if (s == "X01") return Init::X01;
    if (s == "X02") return Init::X02;
    throw std::invalid_argument("unknown init: " + s);
}

double misclassification_rate(const LabelMap& estimate, const LabelMap& truth) {
    if (estimate.dims != truth.dims)
        throw std::invalid_argument("misclassification_rate: dims mismatch");
    const auto wrong =
        (estimate.values.array() != truth.values.array()).count();
    return static_cast<double>(wrong) / truth.dims.size();
}

namespace {

// Hungarian assignment minimizing cost, O(n^3) with potentials.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(n);  // match[row] = column
    for (int j = 1; j <= n; ++j)
        if (p[j]) match[p[j] - 1] = j - 1;
    return match;
}

}  // namespace

LabelMap align_labels_hungarian(const LabelMap& estimate, const LabelMap& truth) {
    if (estimate.dims != truth.dims || estimate.num_labels != truth.num_labels)
        throw std::invalid_argument("align_labels: incompatible maps");
    const int K = truth.num_labels;
    Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(K, K);
    for (int s = 0; s < truth.dims.size(); ++s)
        confusion(estimate(s), truth(s)) += 1.0;
    const std::vector<int> perm = hungarian(-confusion);
    LabelMap out = estimate;
    for (int s = 0; s < out.dims.size(); ++s) out(s) = perm[estimate(s)];
    return out;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    json j = json::parse(is);

    ExperimentConfig c;
    c.grid.clear();
    for (const auto& cell : j.at("grid"))
        c.grid.emplace_back(cell.at(0).get<int>(), cell.at(1).get<int>());
    if (j.contains("dims")) {
        if (j["dims"].is_array())
            c.dims = {j["dims"][0].get<int>(), j["dims"][1].get<int>()};
        else
            c.dims = {j["dims"].at("rows").get<int>(),
                      j["dims"].at("cols").get<int>()};
    }
    if (j.contains("data_model"))
        c.data_model = j["data_model"].get<int>() == 1 ? Model::I : Model::II;
    if (j.contains("repeats")) c.repeats = j["repeats"].get<int>();
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"])
            c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    if (j.contains("inits")) {
        c.inits.clear();
        for (const auto& i : j["inits"])
            c.inits.push_back(init_from_string(i.get<std::string>()));
    }
    if (j.contains("root_seed")) c.root_seed = j["root_seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("sweeps")) c.sweeps = j["sweeps"].get<int>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("timing")) c.timing = j["timing"].get<bool>();
    if (c.grid.empty() || c.methods.empty() || c.inits.empty() || c.repeats < 1)
        throw std::runtime_error("config needs a non-empty grid/methods/inits");
    return c;
}

namespace {

struct RunSpec {
    Algo algo;
    Model model;
    int max_iterations;
};

RunSpec spec_for(Method m) {
    switch (m) {
        case Method::IC: return {Algo::Icm, Model::I, 100};
        case Method::IIC: return {Algo::Icm, Model::II, 100};
        case Method::IIV: return {Algo::Vb, Model::II, 200};
    }
    throw std::logic_error("unreachable");
}

std::vector<ResultRow> run_cell_repeat(const ExperimentConfig& config,
                                       int cell_index, int repeat) {
    const auto [m_subjects, k_labels] = config.grid[cell_index];
    const std::uint64_t ds_seed =
        sub_seed(config.root_seed, cell_index, repeat);

    GenerateOptions gen;
    gen.num_subjects = m_subjects;
    gen.num_labels = k_labels;
    gen.dims = config.dims;
    gen.model = config.data_model;
    gen.sweeps = config.sweeps;
    gen.seed = ds_seed;
    gen.epsilon = config.epsilon;
    const Dataset ds = generate_dataset(gen);

    const LabelMap x01 = init_random(config.dims, k_labels, sub_seed(ds_seed, 400));
    const LabelMap x02 = init_greedy(ds.subjects);

    std::vector<ResultRow> rows;
    for (Method method : config.methods) {
        for (Init init : config.inits) {
            ResultRow row;
            row.dataset_id = cell_index + 1;
            row.num_subjects = m_subjects;
            row.num_labels = k_labels;
            row.method = method;
            row.init = init;
            row.repeat_index = repeat;

            const RunSpec rs = spec_for(method);
            InferenceOptions opts;
            opts.model = rs.model;
            opts.max_iterations = rs.max_iterations;
            opts.seed = sub_seed(ds_seed, 500);

            const auto start = std::chrono::steady_clock::now();
            try {
                const LabelMap& x0 = (init == Init::X01) ? x01 : x02;
                InferenceState state =
                    rs.algo == Algo::Vb
                        ? run_vb(ds.subjects, x0,
                                 default_initial_params(k_labels), opts)
                        : run_icm(ds.subjects, x0,
                                  default_initial_params(k_labels), opts);
                row.misclassification = misclassification_rate(state.x, ds.truth);
                row.iterations = state.iterations;
            } catch (const std::exception&) {
                row.ok = false;
                row.misclassification = std::numeric_limits<double>::quiet_NaN();
            }
            if (config.timing)
                row.wall_time_ms =
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace

std::vector<ResultRow> run_grid(const ExperimentConfig& config) {
    const int num_tasks = static_cast<int>(config.grid.size()) * config.repeats;
    std::vector<std::vector<ResultRow>> task_rows(num_tasks);

    int workers = config.threads > 0
                      ? config.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, num_tasks));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= num_tasks) return;
            const int cell = t / config.repeats;
            const int repeat = t % config.repeats;
            task_rows[t] = run_cell_repeat(config, cell, repeat);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<ResultRow> rows;
    for (auto& tr : task_rows)
        rows.insert(rows.end(), tr.begin(), tr.end());
    return rows;
}

namespace {

std::string format_rate(double rate) {
    if (std::isnan(rate)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", rate);
    return buf;
}

}  // namespace

std::string results_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "dataset_id,M,K,method,init,repeat,misclassification,iterations,"
          "wall_time_ms,status\n";
    for (const auto& r : rows) {
        os << r.dataset_id << ',' << r.num_subjects << ',' << r.num_labels << ','
           << to_string(r.method) << ',' << to_string(r.init) << ','
           << r.repeat_index << ',' << format_rate(r.misclassification) << ','
           << r.iterations << ',' << r.wall_time_ms << ','
           << (r.ok ? "ok" : "failed") << '\n';
    }
    return os.str();
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("empty sample");
    const double h = (sorted.size() - 1) * p;
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

namespace {

struct GroupKey {
    int m, k;
    Method method;
    Init init;
    auto operator<=>(const GroupKey&) const = default;
};

std::map<GroupKey, std::vector<double>> group_rates(
    const std::vector<ResultRow>& rows) {
    std::map<GroupKey, std::vector<double>> groups;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        groups[{r.num_subjects, r.num_labels, r.method, r.init}].push_back(
            r.misclassification);
    }
    for (auto& [key, v] : groups) std::sort(v.begin(), v.end());
    return groups;
}

}  // namespace

std::string summary_to_csv(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("no rows to summarize");
    std::ostringstream os;
    os << "M,K,method,init,count,mean,min,q1,median,q3,max\n";
    for (const auto& [key, v] : group_rates(rows)) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= v.size();
        os << key.m << ',' << key.k << ',' << to_string(key.method) << ','
           << to_string(key.init) << ',' << v.size() << ',' << format_rate(mean)
           << ',' << format_rate(v.front()) << ','
           << format_rate(quantile_sorted(v, 0.25)) << ','
           << format_rate(quantile_sorted(v, 0.5)) << ','
           << format_rate(quantile_sorted(v, 0.75)) << ','
           << format_rate(v.back()) << '\n';
    }
    return os.str();
}

void write_grid_outputs(const ExperimentConfig& config,
                        const std::vector<ResultRow>& rows) {
    fs::create_directories(config.output_dir);
    {
        std::ofstream os(fs::path(config.output_dir) / "results.csv");
        os << results_to_csv(rows);
    }
    {
        std::ofstream os(fs::path(config.output_dir) / "summary.csv");
        os << summary_to_csv(rows);
    }
    const auto groups = group_rates(rows);
    for (const auto& [m, k] : config.grid) {
        std::ofstream os(fs::path(config.output_dir) /
                         ("boxplot_" + std::to_string(m) + "_" +
                          std::to_string(k) + ".csv"));
        os << "method,init,min,q1,median,q3,max\n";
        for (const auto& [key, v] : groups) {
            if (key.m != m || key.k != k) continue;
            os << to_string(key.method) << ',' << to_string(key.init) << ','
               << format_rate(v.front()) << ','
               << format_rate(quantile_sorted(v, 0.25)) << ','
               << format_rate(quantile_sorted(v, 0.5)) << ','
               << format_rate(quantile_sorted(v, 0.75)) << ','
               << format_rate(v.back()) << '\n';
        }
    }
}

}  // namespace gmap
