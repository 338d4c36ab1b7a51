#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace gmap {

// Row-major grids: linear voxel index s = row * cols + col.
using GridXi = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LatticeDims {
    int rows = 0;
    int cols = 0;

    int size() const { return rows * cols; }
    bool operator==(const LatticeDims&) const = default;
};

// Integer label field over the lattice, labels in {0, ..., num_labels-1}.
struct LabelMap {
    LatticeDims dims;
    int num_labels = 2;
    GridXi values;

    LabelMap() = default;
    LabelMap(LatticeDims d, int K)
        : dims(d), num_labels(K), values(GridXi::Zero(d.rows, d.cols)) {}

    int operator()(int s) const { return values.data()[s]; }
    int& operator()(int s) { return values.data()[s]; }
    int operator()(int r, int c) const { return values(r, c); }
    int& operator()(int r, int c) { return values(r, c); }
};

// {0,1} field; same layout as LabelMap with two levels.
struct BinaryMask {
    LatticeDims dims;
    GridXi values;

    BinaryMask() = default;
    explicit BinaryMask(LatticeDims d)
        : dims(d), values(GridXi::Zero(d.rows, d.cols)) {}

    int operator()(int s) const { return values.data()[s]; }
    int& operator()(int s) { return values.data()[s]; }
    int operator()(int r, int c) const { return values(r, c); }
    int& operator()(int r, int c) { return values(r, c); }
};

// In-bounds subset of the 8 surrounding sites of s, written into out.
// Returns the neighbor count (3 at corners, 5 on edges, 8 interior).
int neighbors(int s, LatticeDims dims, std::array<int, 8>& out);

std::vector<int> neighbors(int s, LatticeDims dims);

// 0 iff the labels agree, else 1.
inline int potential(int a, int b) { return a == b ? 0 : 1; }

// beta * sum over unordered neighbor pairs of potential(map(s), map(r)).
double disagreement_energy(const LabelMap& map, double beta);
double disagreement_energy(const BinaryMask& mask, double beta);

// Shared text format: "rows cols K" header, then rows lines of cols ints.
void write_label_map(std::ostream& os, const LabelMap& map);
void write_label_map(const std::string& path, const LabelMap& map);
LabelMap read_label_map(std::istream& is);
LabelMap read_label_map(const std::string& path);

void write_mask(std::ostream& os, const BinaryMask& mask);
void write_mask(const std::string& path, const BinaryMask& mask);
BinaryMask read_mask(std::istream& is);
BinaryMask read_mask(const std::string& path);

}  // namespace gmap
