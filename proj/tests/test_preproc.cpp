#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "gmap/preproc.hpp"

using namespace gmap;

namespace {

// Direct double-sum RV oracle: Tr(Zi Zj) / sqrt(Tr(Zi Zi) Tr(Zj Zj)) with
// Z = C C^T and C the column-centered data.
double rv_oracle(const DataMatrix& di, const DataMatrix& dj) {
    auto center = [](const DataMatrix& d) {
        DataMatrix c = d;
        for (int j = 0; j < c.cols(); ++j)
            c.col(j).array() -= c.col(j).mean();
        return c;
    };
    const DataMatrix ci = center(di), cj = center(dj);
    const Eigen::MatrixXd zi = ci * ci.transpose(), zj = cj * cj.transpose();
    double num = 0.0, dii = 0.0, djj = 0.0;
    for (int a = 0; a < zi.rows(); ++a)
        for (int b = 0; b < zi.cols(); ++b) {
            num += zi(a, b) * zj(a, b);
            dii += zi(a, b) * zi(a, b);
            djj += zj(a, b) * zj(a, b);
        }
    return num / std::sqrt(dii * djj);
}

// All monotone warping paths for short series, by recursion.
double dtw_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int i,
                  int j) {
    const double c = std::abs(x(i) - y(j));
    if (i == 0 && j == 0) return c;
    double best = 1e300;
    if (i > 0) best = std::min(best, dtw_oracle(x, y, i - 1, j));
    if (j > 0) best = std::min(best, dtw_oracle(x, y, i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, dtw_oracle(x, y, i - 1, j - 1));
    return c + best;
}

}  // namespace

TEST_CASE("rv coefficient") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    DataMatrix d(5, 8);
    for (int i = 0; i < d.size(); ++i) d.data()[i] = gauss(rng);

    SUBCASE("self similarity is one") {
        CHECK(rv_coefficient(d, d) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("invariant to positive scaling") {
        CHECK(rv_coefficient(d, 3.7 * d) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("matches the double-sum trace oracle") {
        DataMatrix e(5, 8);
        for (int i = 0; i < e.size(); ++i) e.data()[i] = gauss(rng);
        CHECK(rv_coefficient(d, e) ==
              doctest::Approx(rv_oracle(d, e)).epsilon(1e-9));
        CHECK(rv_coefficient(d, e) >= 0.0);
        CHECK(rv_coefficient(d, e) <= 1.0 + 1e-12);
        CHECK(rv_coefficient(e, d) ==
              doctest::Approx(rv_coefficient(d, e)).epsilon(1e-12));
    }
}

TEST_CASE("outlier exclusion") {
    SUBCASE("planted outlier is dropped") {
        // 4 mutually close items plus one far item.
        DistanceMatrix dist = DistanceMatrix::Zero(5, 5);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) dist(i, j) = 1.0;
        for (int i = 0; i < 4; ++i) {
            dist(i, 4) = 10.0;
            dist(4, i) = 10.0;
        }
        CHECK(exclude_outliers(dist) == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("all-equal distances keep everything") {
        DistanceMatrix dist = DistanceMatrix::Constant(4, 4, 2.0);
        dist.diagonal().setZero();
        CHECK(exclude_outliers(dist) == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("two items always survive") {
        DistanceMatrix dist = DistanceMatrix::Zero(2, 2);
        dist(0, 1) = dist(1, 0) = 5.0;
        CHECK(exclude_outliers(dist) == std::vector<int>{0, 1});
    }
}

TEST_CASE("pca reduction by cumulative proportion of variance") {
    SUBCASE("cpv = 1 keeps every direction of a full-rank tall matrix") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> gauss;
        DataMatrix d(4, 20);
        for (int i = 0; i < d.size(); ++i) d.data()[i] = gauss(rng);
        const DataMatrix r = pca_cpv_reduce(d, 1.0);
        CHECK(r.rows() == 4);
        CHECK(r.cols() == 20);
        for (int i = 0; i < r.rows(); ++i) {
            const double var =
                (r.row(i).array() - r.row(i).mean()).square().mean();
            CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("rank one collapses to a single row") {
        Eigen::VectorXd u(3), v(10);
        u << 1, 2, -1;
        for (int i = 0; i < 10; ++i) v(i) = std::sin(0.7 * i);
        const DataMatrix d = u * v.transpose();
        CHECK(pca_cpv_reduce(d, 0.99).rows() == 1);
    }
    SUBCASE("constructed spectrum selects the expected count") {
        // Orthogonal directions with variance shares 0.6, 0.3, 0.1.
        const int n = 12;
        DataMatrix d = DataMatrix::Zero(3, n);
        const double shares[3] = {0.6, 0.3, 0.1};
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < n; ++i)
                d(k, i) = std::sqrt(shares[k]) *
                          std::cos(M_PI * (k + 1) * (2.0 * i + 1) / (2.0 * n));
        CHECK(pca_cpv_reduce(d, 0.95).rows() == 3);
        CHECK(pca_cpv_reduce(d, 0.90).rows() == 2);
        CHECK(pca_cpv_reduce(d, 0.55).rows() == 1);
    }
}

TEST_CASE("image euclidean distance") {
    const LatticeDims dims{1, 1};

    SUBCASE("identical images give zero") {
        Eigen::VectorXd x(4);
        x << 1, 2, 3, 4;
        CHECK(imed(x, x, {2, 2}, 1.0) == doctest::Approx(0.0));
    }
    SUBCASE("single pixel closed form") {
        Eigen::VectorXd x(1), y(1);
        x << 1.0;
        y << 0.0;
        CHECK(imed(x, y, dims, 1.0) ==
              doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-9));
    }
    SUBCASE("symmetry") {
        Eigen::VectorXd x(9), y(9);
        for (int i = 0; i < 9; ++i) {
            x(i) = i * 0.3;
            y(i) = std::cos(i);
        }
        CHECK(imed(x, y, {3, 3}, 1.5) ==
              doctest::Approx(imed(y, x, {3, 3}, 1.5)).epsilon(1e-12));
    }
    SUBCASE("separable route agrees with the direct sum") {
        // 72x72 = 5184 pixels exercises the large-image path; compare to a
        // direct O(N^2) evaluation written here.
        const LatticeDims big{72, 72};
        const int n = big.size();
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::VectorXd x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x(i) = unif(rng);
            y(i) = unif(rng);
        }
        const double got = imed(x, y, big, 1.0);

        Eigen::VectorXd dx = x / x.maxCoeff() - y / y.maxCoeff();
        const double scale = 1.0 / (2.0 * M_PI);
        double direct = 0.0;
        for (int i = 0; i < n; ++i) {
            const int ri = i / big.cols, ci = i % big.cols;
            for (int j = 0; j < n; ++j) {
                const int rj = j / big.cols, cj = j % big.cols;
                const double d2 = double(ri - rj) * (ri - rj) +
                                  double(ci - cj) * (ci - cj);
                direct += scale * std::exp(-d2 / 2.0) * dx(i) * dx(j);
            }
        }
        direct /= n;
        CHECK(got == doctest::Approx(direct).epsilon(1e-6));
    }
}

TEST_CASE("dynamic time warping") {
    SUBCASE("identical series give zero") {
        Eigen::VectorXd x(5);
        x << 1, 3, 2, 5, 4;
        CHECK(dtw(x, x) == doctest::Approx(0.0));
    }
    SUBCASE("single cell") {
        Eigen::VectorXd x(1), y(1);
        x << 7.0;
        y << 4.0;
        CHECK(dtw(x, y) == doctest::Approx(3.0));
    }
    SUBCASE("warping absorbs a repeated sample") {
        Eigen::VectorXd x(3), y(4);
        x << 1, 2, 3;
        y << 1, 2, 2, 3;
        CHECK(dtw(x, y) == doctest::Approx(0.0));
    }
    SUBCASE("matches exhaustive path search on short series") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 30; ++trial) {
            const int nx = 1 + int(rng() % 4), ny = 1 + int(rng() % 4);
            Eigen::VectorXd x(nx), y(ny);
            for (int i = 0; i < nx; ++i) x(i) = double(rng() % 3);
            for (int i = 0; i < ny; ++i) y(i) = double(rng() % 3);
            CHECK(dtw(x, y) ==
                  doctest::Approx(dtw_oracle(x, y, nx - 1, ny - 1)));
        }
    }
    SUBCASE("never exceeds the aligned L1 cost for equal lengths") {
        Eigen::VectorXd x(6), y(6);
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int i = 0; i < 6; ++i) {
            x(i) = unif(rng);
            y(i) = unif(rng);
        }
        CHECK(dtw(x, y) <= (x - y).cwiseAbs().sum() + 1e-12);
    }
}

TEST_CASE("average-link clustering") {
    SUBCASE("num_clusters = n yields singletons") {
        DistanceMatrix dist = DistanceMatrix::Constant(3, 3, 1.0);
        dist.diagonal().setZero();
        CHECK(average_link_cluster(dist, 3) == std::vector<int>{0, 1, 2});
    }
    SUBCASE("num_clusters = 1 merges everything") {
        DistanceMatrix dist = DistanceMatrix::Constant(4, 4, 1.0);
        dist.diagonal().setZero();
        CHECK(average_link_cluster(dist, 1) == std::vector<int>{0, 0, 0, 0});
    }
    SUBCASE("recovers two planted blobs") {
        // Items 0,2,4 close together; 1,3,5 close together; blobs far apart.
        const int n = 6;
        DistanceMatrix dist(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dist(i, j) = i == j ? 0.0 : (i % 2 == j % 2 ? 0.1 : 5.0);
        const std::vector<int> a = average_link_cluster(dist, 2);
        CHECK(a == std::vector<int>{0, 1, 0, 1, 0, 1});
    }
    SUBCASE("assignment is a valid partition") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> unif(0.1, 1.0);
        const int n = 9;
        DistanceMatrix dist = DistanceMatrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                dist(i, j) = dist(j, i) = unif(rng);
        for (int k = 1; k <= n; ++k) {
            const std::vector<int> a = average_link_cluster(dist, k);
            std::set<int> ids(a.begin(), a.end());
            CHECK(int(ids.size()) == k);
            CHECK(*ids.begin() == 0);
            CHECK(*ids.rbegin() == k - 1);
        }
    }
}

TEST_CASE("fdr thresholding") {
    const LatticeDims dims{10, 10};

    SUBCASE("no signal passes nothing") {
        const BinaryMask m = fdr_threshold(Eigen::VectorXd::Zero(100), 0.05, dims);
        CHECK(m.values.sum() == 0);
    }
    SUBCASE("one overwhelming z-score passes exactly itself") {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(100);
        z(42) = 100.0;
        const BinaryMask m = fdr_threshold(z, 0.05, dims);
        CHECK(m.values.sum() == 1);
        CHECK(m(42) == 1);
    }
    SUBCASE("rejections grow with the level") {
        std::mt19937_64 rng(55);
        std::normal_distribution<double> gauss;
        Eigen::VectorXd z(100);
        for (int i = 0; i < 100; ++i)
            z(i) = gauss(rng) + (i < 30 ? 3.0 : 0.0);
        const int lo = fdr_threshold(z, 0.01, dims).values.sum();
        const int hi = fdr_threshold(z, 0.2, dims).values.sum();
        CHECK(lo <= hi);
        CHECK(hi >= 1);
    }
}

TEST_CASE("cluster retention and subject map assembly") {
    // 3 subjects, components forming 3 clusters; cluster 2 appears in one
    // subject only and must be dropped at min_subjects = 2. Blobs cover 3 of
    // 36 voxels so their z-scores (sqrt(11) ~ 3.32) survive the FDR cut.
    const LatticeDims dims{6, 6};
    const int n = dims.size();
    std::vector<Component> comps;
    auto blob = [&](int lo, int hi, int subject) {
        Component c;
        c.spatial_map = Eigen::VectorXd::Zero(n);
        for (int s = lo; s < hi; ++s) c.spatial_map(s) = 10.0;
        c.time_course = Eigen::VectorXd::Ones(8);
        c.subject_id = subject;
        return c;
    };
    // cluster 0: voxels [0,3) in subjects 0,1,2  -> components 0,1,2
    // cluster 1: voxels [9,12) in subjects 0,1   -> components 3,4
    // cluster 2: voxels [12,15) in subject 2     -> component 5
    comps.push_back(blob(0, 3, 0));
    comps.push_back(blob(0, 3, 1));
    comps.push_back(blob(0, 3, 2));
    comps.push_back(blob(9, 12, 0));
    comps.push_back(blob(9, 12, 1));
    comps.push_back(blob(12, 15, 2));
    const std::vector<int> assignment{0, 0, 0, 1, 1, 2};

    SUBCASE("retention by subject support") {
        CHECK(retain_clusters(comps, assignment, 2) == std::vector<int>{0, 1});
        CHECK(retain_clusters(comps, assignment, 1) ==
              std::vector<int>{0, 1, 2});
        CHECK(retain_clusters(comps, assignment, 3) == std::vector<int>{0});
    }
    SUBCASE("subject maps label each blob with its cluster index") {
        const std::vector<LabelMap> maps =
            build_subject_maps(comps, assignment, {0, 1}, 3, 3, dims, 0.05);
        REQUIRE(maps.size() == 3);
        // subject 0 carries both retained clusters
        for (int s = 0; s < 3; ++s) CHECK(maps[0](s) == 1);
        for (int s = 9; s < 12; ++s) CHECK(maps[0](s) == 2);
        for (int s = 3; s < 9; ++s) CHECK(maps[0](s) == 0);
        // subject 2 has no component in cluster 1
        for (int s = 9; s < 12; ++s) CHECK(maps[2](s) == 0);
        for (int s = 0; s < 3; ++s) CHECK(maps[2](s) == 1);
    }
    SUBCASE("too many retained clusters for the label budget throws") {
        CHECK_THROWS(build_subject_maps(comps, assignment, {0, 1, 2}, 3, 3,
                                        dims, 0.05));
    }
}

TEST_CASE("combined component distance matrix") {
    const LatticeDims dims{2, 2};
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    std::vector<Component> comps(4);
    for (auto& c : comps) {
        c.spatial_map = Eigen::VectorXd(4);
        c.time_course = Eigen::VectorXd(6);
        for (int i = 0; i < 4; ++i) c.spatial_map(i) = unif(rng);
        for (int i = 0; i < 6; ++i) c.time_course(i) = unif(rng);
    }
    const DistanceMatrix d = component_distance_matrix(comps, dims, 1.0);
    CHECK(d.rows() == 4);
    CHECK(d.diagonal().isZero(1e-12));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(d(i, j) == doctest::Approx(d(j, i)).epsilon(1e-12));
            CHECK(d(i, j) >= -1e-12);
            CHECK(d(i, j) <= 1.0 + 1e-12);  // average of two min-max scaled terms
        }
}
