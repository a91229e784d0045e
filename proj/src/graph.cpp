#include "gsd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gsd {

Graph::Graph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ < 1) throw std::invalid_argument("Graph: node count must be positive");
    for (auto& e : edges_) {
        if (e.u == e.v) throw std::invalid_argument("Graph: self-loops not allowed");
        if (e.u > e.v) std::swap(e.u, e.v);
        if (e.u < 0 || e.v >= n_) throw std::invalid_argument("Graph: node index out of range");
        if (!(e.weight > 0.0)) throw std::invalid_argument("Graph: edge weights must be positive");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i - 1].u == edges_[i].u && edges_[i - 1].v == edges_[i].v)
            throw std::invalid_argument("Graph: duplicate edge");
    }
}

Matrix Graph::adjacency() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) {
        a(e.u, e.v) = e.weight;
        a(e.v, e.u) = e.weight;
    }
    return a;
}

Vector Graph::degrees() const {
    Vector d = Vector::Zero(n_);
    for (const auto& e : edges_) {
        d[e.u] += e.weight;
        d[e.v] += e.weight;
    }
    return d;
}

std::vector<std::vector<std::pair<int, double>>> Graph::neighbor_lists() const {
    std::vector<std::vector<std::pair<int, double>>> nbr(n_);
    for (const auto& e : edges_) {
        nbr[e.u].emplace_back(e.v, e.weight);
        nbr[e.v].emplace_back(e.u, e.weight);
    }
    for (auto& l : nbr) std::sort(l.begin(), l.end());
    return nbr;
}

Graph erdos_renyi(int n, double p, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("erdos_renyi: n must be >= 1");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("erdos_renyi: p must lie in [0,1]");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(p);
    std::vector<Edge> edges;
    if (p > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (coin(rng)) edges.push_back({i, j, 1.0});
    }
    return Graph(n, std::move(edges));
}

Graph grid8_graph(int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("grid8_graph: rows and cols must be >= 1");
    std::vector<Edge> edges;
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            // right, down-left, down, down-right; each edge emitted once
            static const int dr[] = {0, 1, 1, 1};
            static const int dc[] = {1, -1, 0, 1};
            for (int k = 0; k < 4; ++k) {
                int r2 = r + dr[k], c2 = c + dc[k];
                if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
                edges.push_back({id(r, c), id(r2, c2), 1.0});
            }
        }
    }
    return Graph(rows * cols, std::move(edges));
}

std::string to_string(ShiftKind k) {
    switch (k) {
        case ShiftKind::Adjacency: return "adjacency";
        case ShiftKind::Laplacian: return "laplacian";
        case ShiftKind::NormalizedLaplacian: return "normalized-laplacian";
        case ShiftKind::ScaledAdjacency: return "scaled-adjacency";
    }
    throw std::logic_error("unknown ShiftKind");
}

ShiftKind shift_kind_from_string(const std::string& s) {
    if (s == "adjacency") return ShiftKind::Adjacency;
    if (s == "laplacian") return ShiftKind::Laplacian;
    if (s == "normalized-laplacian") return ShiftKind::NormalizedLaplacian;
    if (s == "scaled-adjacency") return ShiftKind::ScaledAdjacency;
    throw std::invalid_argument("unknown shift kind: " + s);
}

ShiftOperator shift_operator(const Graph& g, ShiftKind kind) {
    Matrix a = g.adjacency();
    const int n = g.n();
    switch (kind) {
        case ShiftKind::Adjacency:
            return {std::move(a), kind};
        case ShiftKind::Laplacian: {
            Matrix l = Matrix(g.degrees().asDiagonal()) - a;
            return {std::move(l), kind};
        }
        case ShiftKind::NormalizedLaplacian: {
            Vector d = g.degrees();
            Vector dinv_sqrt(n);
            for (int i = 0; i < n; ++i) dinv_sqrt[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
            Matrix s = Matrix::Zero(n, n);
            for (int i = 0; i < n; ++i)
                if (d[i] > 0.0) s(i, i) = 1.0;  // isolated-node entries stay 0
            s -= dinv_sqrt.asDiagonal() * a * dinv_sqrt.asDiagonal();
            return {std::move(s), kind};
        }
        case ShiftKind::ScaledAdjacency: {
            Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
            double lmax = es.eigenvalues().maxCoeff();
            if (lmax <= 1e-12)
                throw std::invalid_argument("shift_operator: ScaledAdjacency needs a nonempty edge set");
            a /= lmax;
            return {std::move(a), kind};
        }
    }
    throw std::logic_error("unknown ShiftKind");
}

SpectralBasis eigendecompose(const ShiftOperator& s) {
    const Matrix& m = s.matrix;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("eigendecompose: shift matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecompose: solver failed");
    Matrix v = es.eigenvectors();
    Vector lam = es.eigenvalues();
    // sign convention: first entry above 1e-10 in magnitude is positive
    for (int j = 0; j < v.cols(); ++j) {
        for (int i = 0; i < v.rows(); ++i) {
            if (std::abs(v(i, j)) > 1e-10) {
                if (v(i, j) < 0.0) v.col(j) *= -1.0;
                break;
            }
        }
    }
    return {std::move(v), std::move(lam)};
}

GraphSignal gft(const SpectralBasis& b, const GraphSignal& x, GftDirection dir) {
    if (x.size() != b.n()) throw std::invalid_argument("gft: dimension mismatch");
    if (dir == GftDirection::Forward) return b.vectors.transpose() * x;
    return b.vectors * x;
}

void save_graph_csv(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_graph_csv: cannot open " + path);
    out << "src,dst,weight\n";
    char buf[64];
    for (const auto& e : g.edges()) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", e.u, e.v, e.weight);
        out << buf;
    }
}

Graph load_graph_csv(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_graph_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("src,dst,weight", 0) != 0)
        throw std::runtime_error("load_graph_csv: missing src,dst,weight header in " + path);
    std::vector<Edge> edges;
    int max_idx = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Edge e;
        if (std::sscanf(line.c_str(), "%d,%d,%lf", &e.u, &e.v, &e.weight) != 3)
            throw std::runtime_error("load_graph_csv: malformed row: " + line);
        max_idx = std::max({max_idx, e.u, e.v});
        edges.push_back(e);
    }
    if (n < 0) n = max_idx + 1;
    return Graph(n, std::move(edges));
}

void save_basis_csv(const SpectralBasis& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_basis_csv: cannot open " + path);
    char buf[64];
    auto put_row = [&](const double* p, int len) {
        for (int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", p[i]);
            out << buf << (i + 1 < len ? "," : "\n");
        }
    };
    const int n = b.n();
    put_row(b.values.data(), n);
    for (int i = 0; i < n; ++i) {
        Vector row = b.vectors.row(i);
        put_row(row.data(), n);
    }
}

SpectralBasis load_basis_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_basis_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_basis_csv: empty file " + path);
    const int n = static_cast<int>(rows[0].size());
    if (static_cast<int>(rows.size()) != n + 1)
        throw std::runtime_error("load_basis_csv: row count mismatch in " + path);
    SpectralBasis b;
    b.values = Eigen::Map<Vector>(rows[0].data(), n);
    b.vectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i + 1].size()) != n)
            throw std::runtime_error("load_basis_csv: column count mismatch in " + path);
        b.vectors.row(i) = Eigen::Map<Vector>(rows[i + 1].data(), n);
    }
    return b;
}

}  // namespace gsd
