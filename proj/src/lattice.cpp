#include "gmap/lattice.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gmap {

int neighbors(int s, LatticeDims dims, std::array<int, 8>& out) {
    if (s < 0 || s >= dims.size())
        throw std::out_of_range("voxel index out of range");
    const int r = s / dims.cols;
    const int c = s % dims.cols;
    int n = 0;
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int rr = r + dr;
            const int cc = c + dc;
            if (rr < 0 || rr >= dims.rows || cc < 0 || cc >= dims.cols) continue;
            out[n++] = rr * dims.cols + cc;
        }
    }
    return n;
}

std::vector<int> neighbors(int s, LatticeDims dims) {
    std::array<int, 8> buf;
    const int n = neighbors(s, dims, buf);
    return std::vector<int>(buf.begin(), buf.begin() + n);
}

namespace {

// Each unordered pair once: for every site, its E, SE, S, SW neighbors.
template <typename Field>
double pair_disagreements(const Field& f, LatticeDims dims) {
    double total = 0.0;
    for (int r = 0; r < dims.rows; ++r) {
        for (int c = 0; c < dims.cols; ++c) {
            const int v = f(r, c);
            if (c + 1 < dims.cols) total += potential(v, f(r, c + 1));
            if (r + 1 < dims.rows) {
                total += potential(v, f(r + 1, c));
                if (c + 1 < dims.cols) total += potential(v, f(r + 1, c + 1));
                if (c - 1 >= 0) total += potential(v, f(r + 1, c - 1));
            }
        }
    }
    return total;
}

}  // namespace

double disagreement_energy(const LabelMap& map, double beta) {
    return beta * pair_disagreements(map, map.dims);
}

double disagreement_energy(const BinaryMask& mask, double beta) {
    return beta * pair_disagreements(mask, mask.dims);
}

namespace {

void write_grid(std::ostream& os, const GridXi& g, int levels) {
    os << g.rows() << ' ' << g.cols() << ' ' << levels << '\n';
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            if (c) os << ' ';
            os << g(r, c);
        }
        os << '\n';
    }
}

GridXi read_grid(std::istream& is, int& levels) {
    int rows, cols;
    if (!(is >> rows >> cols >> levels) || rows < 1 || cols < 1 || levels < 2)
        throw std::runtime_error("bad map header");
    GridXi g(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int v;
            if (!(is >> v)) throw std::runtime_error("truncated map body");
            if (v < 0 || v >= levels) throw std::runtime_error("label out of range");
            g(r, c) = v;
        }
    return g;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return is;
}

}  // namespace

void write_label_map(std::ostream& os, const LabelMap& map) {
    write_grid(os, map.values, map.num_labels);
}

void write_label_map(const std::string& path, const LabelMap& map) {
    auto os = open_out(path);
    write_label_map(os, map);
}

LabelMap read_label_map(std::istream& is) {
    LabelMap m;
    m.values = read_grid(is, m.num_labels);
    m.dims = {static_cast<int>(m.values.rows()), static_cast<int>(m.values.cols())};
    return m;
}

LabelMap read_label_map(const std::string& path) {
    auto is = open_in(path);
    return read_label_map(is);
}

void write_mask(std::ostream& os, const BinaryMask& mask) {
    write_grid(os, mask.values, 2);
}

void write_mask(const std::string& path, const BinaryMask& mask) {
    auto os = open_out(path);
    write_mask(os, mask);
}

BinaryMask read_mask(std::istream& is) {
    int levels;
    BinaryMask m;
    m.values = read_grid(is, levels);
    if (levels != 2) throw std::runtime_error("mask must have K=2");
    m.dims = {static_cast<int>(m.values.rows()), static_cast<int>(m.values.cols())};
    return m;
}

BinaryMask read_mask(const std::string& path) {
    auto is = open_in(path);
    return read_mask(is);
}

}  // namespace gmap
