#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace gsd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A graph signal is a real value per node.
using GraphSignal = Eigen::VectorXd;

struct Edge {
    int u;  // u < v
    int v;
    double weight;
};

/// Undirected weighted graph without self-loops.
class Graph {
public:
    Graph(int n, std::vector<Edge> edges);

    int n() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }

    Matrix adjacency() const;
    /// Weighted degrees (row sums of the adjacency).
    Vector degrees() const;

    /// Neighbor lists with weights, index-sorted.
    std::vector<std::vector<std::pair<int, double>>> neighbor_lists() const;

private:
    int n_;
    std::vector<Edge> edges_;  // normalized u < v, sorted lexicographically
};

/// Each unordered pair is an edge independently with probability p, weight 1.
Graph erdos_renyi(int n, double p, std::uint64_t seed);

/// Unweighted pixel grid where every pixel connects to its up-to-8
/// axis and diagonal neighbors.
Graph grid8_graph(int rows, int cols);

enum class ShiftKind { Adjacency, Laplacian, NormalizedLaplacian, ScaledAdjacency };

std::string to_string(ShiftKind k);
ShiftKind shift_kind_from_string(const std::string& s);

struct ShiftOperator {
    Matrix matrix;  // real symmetric n x n
    ShiftKind kind;

    int n() const { return static_cast<int>(matrix.rows()); }
};

ShiftOperator shift_operator(const Graph& g, ShiftKind kind);

/// Orthonormal eigenbasis of a symmetric shift, eigenvalues ascending.
/// Sign convention: the first entry of each eigenvector whose magnitude
/// exceeds 1e-10 is positive.
struct SpectralBasis {
    Matrix vectors;  // columns are eigenvectors
    Vector values;   // ascending

    int n() const { return static_cast<int>(values.size()); }
};

SpectralBasis eigendecompose(const ShiftOperator& s);

enum class GftDirection { Forward, Inverse };

/// Forward: x_hat = V^T x. Inverse: x = V x_hat.
GraphSignal gft(const SpectralBasis& b, const GraphSignal& x, GftDirection dir);

// --- file formats ---

/// CSV with header "src,dst,weight", 0-based indices, one undirected
/// edge per row.
void save_graph_csv(const Graph& g, const std::string& path);
Graph load_graph_csv(const std::string& path, int n = -1);

/// CSV: first row eigenvalues, following n rows are V row-major,
/// 17 significant digits.
void save_basis_csv(const SpectralBasis& b, const std::string& path);
SpectralBasis load_basis_csv(const std::string& path);

}  // namespace gsd
