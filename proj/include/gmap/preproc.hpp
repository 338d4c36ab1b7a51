#pragma once

#include <Eigen/Core>
#include <vector>

#include "gmap/lattice.hpp"

namespace gmap {

// Time points x voxels signal matrix.
using DataMatrix = Eigen::MatrixXd;

// One ICA component: a spatial map (row of B_i) and its time course
// (column of A_i), tagged with the owning subject.
struct Component {
    Eigen::VectorXd spatial_map;
    Eigen::VectorXd time_course;
    int subject_id = 0;
};

// Symmetric, zero-diagonal, non-negative.
using DistanceMatrix = Eigen::MatrixXd;

// Configuration-covariance similarity in [0, 1]; columns are centered first.
double rv_coefficient(const DataMatrix& di, const DataMatrix& dj);

// Items whose mean distance to the rest exceeds grand mean + 1 sd are dropped.
std::vector<int> exclude_outliers(const DistanceMatrix& dist);

// Keep the fewest principal directions reaching the cumulative-variance
// target, then rescale the retained score rows to unit variance.
DataMatrix pca_cpv_reduce(const DataMatrix& d, double cpv);

// Gaussian cross-pixel image distance, normalized by image size. Inputs are
// rescaled by their maximum intensities before differencing.
double imed(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
            LatticeDims dims, double sigma);

// Min-cost monotone alignment with absolute-difference local cost.
double dtw(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Raw average of the spatial and temporal distances for one pair; the
// matrix builder below min-max scales each term over the full pairwise set.
double combined_distance(const Component& c1, const Component& c2,
                         LatticeDims dims, double sigma);

DistanceMatrix component_distance_matrix(const std::vector<Component>& comps,
                                         LatticeDims dims, double sigma);

// Agglomerative average-link clustering down to num_clusters; returns an
// assignment with cluster ids ordered by smallest member index.
std::vector<int> average_link_cluster(const DistanceMatrix& dist,
                                      int num_clusters);

// Two-sided normal p-values, Benjamini-Hochberg step-up at level q.
BinaryMask fdr_threshold(const Eigen::VectorXd& zscores, double q,
                         LatticeDims dims);

// Cluster ids (ascending) represented in at least min_subjects subjects.
std::vector<int> retain_clusters(const std::vector<Component>& comps,
                                 const std::vector<int>& assignment,
                                 int min_subjects);

// Per subject: z-score the mean member map of each retained cluster,
// FDR-threshold it, and label surviving voxels with the cluster's index
// (1-based); overlaps keep the largest |z|.
std::vector<LabelMap> build_subject_maps(const std::vector<Component>& comps,
                                         const std::vector<int>& assignment,
                                         const std::vector<int>& retained,
                                         int num_subjects, int num_labels,
                                         LatticeDims dims, double fdr_q);

}  // namespace gmap
