#include "gmap/preproc.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gmap {

double rv_coefficient(const DataMatrix& di, const DataMatrix& dj) {
    if (di.cols() != dj.cols() || di.rows() != dj.rows())
        throw std::invalid_argument("rv_coefficient: shape mismatch");
    DataMatrix ci = di.rowwise() - di.colwise().mean();
    DataMatrix cj = dj.rowwise() - dj.colwise().mean();
    // Tr(Zi Zj) = ||Ci^T Cj||_F^2 with Z = C C^T.
    const double cross = (ci.transpose() * cj).squaredNorm();
    const double ni = (ci.transpose() * ci).norm();
    const double nj = (cj.transpose() * cj).norm();
    if (ni == 0.0 || nj == 0.0)
        throw std::invalid_argument("rv_coefficient: zero-norm matrix");
    return cross / (ni * nj);
}

std::vector<int> exclude_outliers(const DistanceMatrix& dist) {
    const int n = static_cast<int>(dist.rows());
    if (n < 2 || dist.cols() != n)
        throw std::invalid_argument("need a square distance matrix, n >= 2");
    Eigen::VectorXd means(n);
    for (int i = 0; i < n; ++i) means(i) = dist.row(i).sum() / (n - 1);
    const double grand = means.mean();
    const double sd = std::sqrt((means.array() - grand).square().sum() /
                                std::max(1, n - 1));
    std::vector<int> kept;
    for (int i = 0; i < n; ++i)
        if (means(i) <= grand + sd) kept.push_back(i);
    return kept;
}

DataMatrix pca_cpv_reduce(const DataMatrix& d, double cpv) {
    if (cpv <= 0.0 || cpv > 1.0)
        throw std::invalid_argument("cpv must be in (0, 1]");
    Eigen::BDCSVD<DataMatrix> svd(d, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double total = sv.array().square().sum();
    if (total <= 0.0) throw std::invalid_argument("rank-0 matrix");

    const double tol = sv(0) * 1e-12;
    int keep = 0;
    double acc = 0.0;
    for (int j = 0; j < sv.size() && sv(j) > tol; ++j) {
        acc += sv(j) * sv(j);
        keep = j + 1;
        if (acc / total >= cpv - 1e-12) break;
    }

    DataMatrix scores = svd.matrixU().leftCols(keep).transpose() * d;
    for (int j = 0; j < keep; ++j) {
        const double mean = scores.row(j).mean();
        const double var = (scores.row(j).array() - mean).square().mean();
        if (var > 0.0) scores.row(j) /= std::sqrt(var);
    }
    return scores;
}

namespace {

Eigen::MatrixXd gaussian_gram(int n, double sigma) {
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = std::exp(-0.5 * (i - j) * (i - j) / (sigma * sigma));
    return g;
}

Eigen::VectorXd max_normalize(const Eigen::VectorXd& x) {
    const double m = x.cwiseAbs().maxCoeff();
    return m == 0.0 ? x : x / m;  // an all-zero image is already normalized
}

}  // namespace

double imed(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
            LatticeDims dims, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("imed: sigma must be > 0");
    if (x.size() != dims.size() || y.size() != dims.size())
        throw std::invalid_argument("imed: size mismatch");
    const Eigen::VectorXd d = max_normalize(x) - max_normalize(y);
    const double scale = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    const int n = dims.size();

    if (n <= 4096) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const int ri = i / dims.cols, ci = i % dims.cols;
            for (int j = 0; j < n; ++j) {
                const int rj = j / dims.cols, cj = j % dims.cols;
                const double d2 = double(ri - rj) * (ri - rj) +
                                  double(ci - cj) * (ci - cj);
                acc += d(i) * d(j) * std::exp(-0.5 * d2 / (sigma * sigma));
            }
        }
        return scale * acc / n;
    }

    // The squared pixel distance separates by axis, so G factorizes into
    // row and column Gaussian Gram matrices.
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        dm(d.data(), dims.rows, dims.cols);
    const Eigen::MatrixXd gr = gaussian_gram(dims.rows, sigma);
    const Eigen::MatrixXd gc = gaussian_gram(dims.cols, sigma);
    const double acc = (dm.cwiseProduct(gr * dm * gc)).sum();
    return scale * acc / n;
}

double dtw(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(y.size());
    if (n == 0 || m == 0) throw std::invalid_argument("dtw: empty series");
    constexpr double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd prev = Eigen::VectorXd::Constant(m, inf);
    Eigen::VectorXd curr(m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double cost = std::abs(x(i) - y(j));
            double best;
            if (i == 0 && j == 0)
                best = 0.0;
            else {
                best = inf;
                if (i > 0) best = std::min(best, prev(j));
                if (j > 0) best = std::min(best, curr(j - 1));
                if (i > 0 && j > 0) best = std::min(best, prev(j - 1));
            }
            curr(j) = cost + best;
        }
        std::swap(prev, curr);
    }
    return prev(m - 1);
}

double combined_distance(const Component& c1, const Component& c2,
                         LatticeDims dims, double sigma) {
    return 0.5 * (imed(c1.spatial_map, c2.spatial_map, dims, sigma) +
                  dtw(c1.time_course, c2.time_course));
}

DistanceMatrix component_distance_matrix(const std::vector<Component>& comps,
                                         LatticeDims dims, double sigma) {
    const int n = static_cast<int>(comps.size());
    DistanceMatrix spatial = DistanceMatrix::Zero(n, n);
    DistanceMatrix temporal = DistanceMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            spatial(i, j) = spatial(j, i) =
                imed(comps[i].spatial_map, comps[j].spatial_map, dims, sigma);
            temporal(i, j) = temporal(j, i) =
                dtw(comps[i].time_course, comps[j].time_course);
        }
    // Min-max scale each term over the pairwise set to commensurate units.
    auto scale = [n](DistanceMatrix& m) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                lo = std::min(lo, m(i, j));
                hi = std::max(hi, m(i, j));
            }
        if (hi > lo) m = (m.array() - lo) / (hi - lo);
        m.diagonal().setZero();
    };
    if (n > 1) {
        scale(spatial);
        scale(temporal);
    }
    return 0.5 * (spatial + temporal);
}

std::vector<int> average_link_cluster(const DistanceMatrix& dist,
                                      int num_clusters) {
    const int n = static_cast<int>(dist.rows());
    if (num_clusters < 1 || num_clusters > n)
        throw std::invalid_argument("num_clusters out of range");
    std::vector<std::vector<int>> clusters(n);
    for (int i = 0; i < n; ++i) clusters[i] = {i};
    DistanceMatrix d = dist;
    std::vector<bool> alive(n, true);
    int remaining = n;

    while (remaining > num_clusters) {
        int bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (int j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                if (d(i, j) < best) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        // Average linkage via the Lance-Williams update.
        const double ni = clusters[bi].size();
        const double nj = clusters[bj].size();
        for (int k = 0; k < n; ++k) {
            if (!alive[k] || k == bi || k == bj) continue;
            const double merged = (ni * d(bi, k) + nj * d(bj, k)) / (ni + nj);
            d(bi, k) = d(k, bi) = merged;
        }
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(),
                            clusters[bj].end());
        alive[bj] = false;
        --remaining;
    }

    std::vector<int> assignment(n, -1);
    int next_id = 0;
    for (int i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        for (int member : clusters[i]) assignment[member] = next_id;
        ++next_id;
    }
    return assignment;
}

BinaryMask fdr_threshold(const Eigen::VectorXd& zscores, double q,
                         LatticeDims dims) {
    if (q <= 0.0 || q >= 1.0) throw std::invalid_argument("q must be in (0,1)");
    if (zscores.size() != dims.size())
        throw std::invalid_argument("fdr_threshold: size mismatch");
    const int n = dims.size();
    std::vector<std::pair<double, int>> pvals(n);
    for (int i = 0; i < n; ++i)
        pvals[i] = {std::erfc(std::abs(zscores(i)) / std::numbers::sqrt2), i};
    std::sort(pvals.begin(), pvals.end());
    int cutoff = -1;
    for (int k = n - 1; k >= 0; --k)
        if (pvals[k].first <= q * (k + 1) / n) {
            cutoff = k;
            break;
        }
    BinaryMask mask(dims);
    for (int k = 0; k <= cutoff; ++k) mask(pvals[k].second) = 1;
    return mask;
}

std::vector<int> retain_clusters(const std::vector<Component>& comps,
                                 const std::vector<int>& assignment,
                                 int min_subjects) {
    int max_cluster = -1;
    for (int a : assignment) max_cluster = std::max(max_cluster, a);
    std::vector<int> retained;
    for (int c = 0; c <= max_cluster; ++c) {
        std::vector<int> subjects;
        for (size_t i = 0; i < comps.size(); ++i)
            if (assignment[i] == c) subjects.push_back(comps[i].subject_id);
        std::sort(subjects.begin(), subjects.end());
        subjects.erase(std::unique(subjects.begin(), subjects.end()),
                       subjects.end());
        if (static_cast<int>(subjects.size()) >= min_subjects)
            retained.push_back(c);
    }
    return retained;
}

std::vector<LabelMap> build_subject_maps(const std::vector<Component>& comps,
                                         const std::vector<int>& assignment,
                                         const std::vector<int>& retained,
                                         int num_subjects, int num_labels,
                                         LatticeDims dims, double fdr_q) {
    if (static_cast<int>(retained.size()) > num_labels - 1)
        throw std::invalid_argument("more retained clusters than K-1 labels");
    std::vector<LabelMap> maps;
    maps.reserve(num_subjects);
    for (int subj = 0; subj < num_subjects; ++subj) {
        LabelMap map(dims, num_labels);
        Eigen::VectorXd winner_absz = Eigen::VectorXd::Zero(dims.size());
        for (size_t ci = 0; ci < retained.size(); ++ci) {
            const int cluster = retained[ci];
            const int label = static_cast<int>(ci) + 1;
            Eigen::VectorXd mean_map = Eigen::VectorXd::Zero(dims.size());
            int members = 0;
            for (size_t j = 0; j < comps.size(); ++j)
                if (comps[j].subject_id == subj && assignment[j] == cluster) {
                    mean_map += comps[j].spatial_map;
                    ++members;
                }
            if (members == 0) continue;
            mean_map /= members;
            const double mu = mean_map.mean();
            const double sd =
                std::sqrt((mean_map.array() - mu).square().mean());
            if (sd == 0.0) continue;
            Eigen::VectorXd z = (mean_map.array() - mu) / sd;
            const BinaryMask active = fdr_threshold(z, fdr_q, dims);
            for (int s = 0; s < dims.size(); ++s) {
                if (!active(s)) continue;
                const double az = std::abs(z(s));
                if (map(s) == 0 || az > winner_absz(s)) {
                    map(s) = label;
                    winner_absz(s) = az;
                }
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

}  // namespace gmap
