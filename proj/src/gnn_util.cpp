#include "gsd/gnn.hpp"

#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gsd {

std::string to_string(ConvMode m) {
    return m == ConvMode::NonParametric ? "non-parametric" : "spline";
}

ConvMode conv_mode_from_string(const std::string& s) {
    if (s == "non-parametric") return ConvMode::NonParametric;
    if (s == "spline") return ConvMode::Spline;
    throw std::invalid_argument("unknown conv mode: " + s);
}

namespace {

// Cox-de Boor on a clamped uniform knot vector of order 4.
double bspline_basis(const std::vector<double>& knots, int i, int order, double x) {
    if (order == 1) {
        if (knots[i] <= x && x < knots[i + 1]) return 1.0;
        // close the last span at x = 1
        if (x == knots.back() && knots[i] < knots[i + 1] && knots[i + 1] == knots.back()) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    double den_l = knots[i + order - 1] - knots[i];
    if (den_l > 0.0) left = (x - knots[i]) / den_l * bspline_basis(knots, i, order - 1, x);
    double den_r = knots[i + order] - knots[i + 1];
    if (den_r > 0.0)
        right = (knots[i + order] - x) / den_r * bspline_basis(knots, i + 1, order - 1, x);
    return left + right;
}

}  // namespace

SplineKernel spline_kernel(int n, int q) {
    if (q < 4) throw std::invalid_argument("spline_kernel: Q must be >= 4");
    if (n < q) throw std::invalid_argument("spline_kernel: n must be >= Q");
    std::vector<double> knots(q + 4);
    const int interior = q - 3;  // spans between the clamped ends
    for (int i = 0; i < 4; ++i) knots[i] = 0.0;
    for (int i = 1; i < interior; ++i) knots[3 + i] = static_cast<double>(i) / interior;
    for (int i = 0; i < 4; ++i) knots[q + i] = 1.0;

    SplineKernel k;
    k.q = q;
    k.basis.resize(n, q);
    for (int i = 0; i < n; ++i) {
        double x = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        for (int j = 0; j < q; ++j) k.basis(i, j) = bspline_basis(knots, j, 4, x);
        double s = k.basis.row(i).sum();
        k.basis.row(i) /= s;
    }
    return k;
}

NetworkSpec parse_architecture(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("parse_architecture: empty string");
    NetworkSpec spec;
    std::stringstream ss(s);
    std::string tok;
    bool seen_fc = false;
    while (std::getline(ss, tok, '-')) {
        LayerToken t{};
        std::string num;
        if (tok.rfind("GC", 0) == 0) {
            t.kind = LayerToken::Kind::GC;
            num = tok.substr(2);
        } else if (tok.rfind("FC", 0) == 0) {
            t.kind = LayerToken::Kind::FC;
            num = tok.substr(2);
        } else if (tok.rfind("P", 0) == 0) {
            t.kind = LayerToken::Kind::P;
            num = tok.substr(1);
        } else {
            throw std::invalid_argument("parse_architecture: malformed token " + tok);
        }
        if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("parse_architecture: malformed token " + tok);
        t.arg = std::stoi(num);
        if (t.arg < 1) throw std::invalid_argument("parse_architecture: zero-sized token " + tok);
        if (t.kind == LayerToken::Kind::P) {
            if (t.arg < 2 || (t.arg & (t.arg - 1)) != 0)
                throw std::invalid_argument("parse_architecture: pooling stride must be a power of 2");
        }
        if (t.kind == LayerToken::Kind::FC) seen_fc = true;
        else if (seen_fc)
            throw std::invalid_argument("parse_architecture: graph layers after FC are not allowed");
        spec.layers.push_back(t);
    }
    if (!seen_fc)
        throw std::invalid_argument("parse_architecture: at least one FC layer is required");
    return spec;
}

double logreg(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
              const std::vector<int>& test_y, const LogRegConfig& cfg) {
    const int d = static_cast<int>(train_x.rows());
    const int m = static_cast<int>(train_x.cols());
    if (m != static_cast<int>(train_y.size()))
        throw std::invalid_argument("logreg: train size mismatch");
    std::set<int> classes(train_y.begin(), train_y.end());
    if (classes.size() < 2) throw std::invalid_argument("logreg: single-class training set");
    const int c = *std::max_element(train_y.begin(), train_y.end()) + 1;

    // fixed step 1/L, L = 0.25 lambda_max(X X^T)/m + reg
    Vector v = Vector::Ones(d).normalized();
    double lam = 1.0;
    for (int i = 0; i < 50; ++i) {
        Vector xv = train_x * (train_x.transpose() * v);
        lam = xv.norm();
        if (lam <= 0.0) break;
        v = xv / lam;
    }
    const double step = 1.0 / (0.25 * lam / m + cfg.reg);

    Matrix w = Matrix::Zero(c, d);
    Vector b = Vector::Zero(c);
    for (int it = 0; it < cfg.steps; ++it) {
        Matrix logits = w * train_x;
        logits.colwise() += b;
        for (int j = 0; j < m; ++j) {
            Vector col = logits.col(j);
            col.array() -= col.maxCoeff();
            Vector p = col.array().exp();
            p /= p.sum();
            p[train_y[j]] -= 1.0;
            logits.col(j) = p;
        }
        Matrix gw = logits * train_x.transpose() / m + cfg.reg * w;
        Vector gb = logits.rowwise().sum() / m;
        w -= step * gw;
        b -= step * gb;
    }

    int correct = 0;
    for (int j = 0; j < test_x.cols(); ++j) {
        Vector scores = w * test_x.col(j) + b;
        int pred = 0;
        scores.maxCoeff(&pred);
        if (pred == test_y[j]) ++correct;
    }
    return test_y.empty() ? 0.0 : static_cast<double>(correct) / test_y.size();
}

}  // namespace gsd
