// Test-only reference implementations, kept independent of the solver
// code paths they check.
#pragma once

#include "gsd/graph.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

namespace gsd::oracle {

// l2,1 + alpha * l1 of a vector viewed as group_rows x K column blocks;
// group_rows == dim gives the plain l1 norm (alpha ignored).
inline double sparse_objective(const Vector& z, int group_rows, double alpha) {
    if (group_rows == z.size()) return z.lpNorm<1>();
    double obj = alpha * z.lpNorm<1>();
    for (int c = 0; c < z.size() / group_rows; ++c)
        obj += z.segment(static_cast<Eigen::Index>(c) * group_rows, group_rows).norm();
    return obj;
}

// Projected subgradient for min g(z) s.t. P z = y, run for a fixed
// iteration budget; returns the best feasible objective seen and the
// attaining point. Projection is re-derived here from scratch.
struct SubgradResult {
    Vector z;
    double objective;
};

template <typename Project>
inline void subgrad_stage(int group_rows, double alpha, int iters, double step0, Project&& project,
                          Vector& z, Vector& best, double& best_obj) {
    const int dim = static_cast<int>(z.size());
    for (int k = 1; k <= iters; ++k) {
        // subgradient of the group term + alpha * sign
        Vector g(dim);
        if (group_rows == dim) {
            g = z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        } else {
            for (int c = 0; c < dim / group_rows; ++c) {
                auto seg = z.segment(static_cast<Eigen::Index>(c) * group_rows, group_rows);
                double nrm = seg.norm();
                g.segment(static_cast<Eigen::Index>(c) * group_rows, group_rows) =
                    nrm > 1e-15 ? Vector(seg / nrm) : Vector(Vector::Zero(group_rows));
            }
            g += alpha * z.unaryExpr([](double v) {
                return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            });
        }
        z = project(z - (step0 / std::sqrt(static_cast<double>(k))) * g);
        double obj = sparse_objective(z, group_rows, alpha);
        if (obj < best_obj) {
            best_obj = obj;
            best = z;
        }
    }
}

inline SubgradResult projected_subgradient(const Matrix& p, const Vector& y, int group_rows,
                                           double alpha, int iters, double step0 = 1.0) {
    Eigen::LLT<Matrix> llt(p * p.transpose());
    auto project = [&](const Vector& v) -> Vector {
        return v - p.transpose() * llt.solve(p * v - y);
    };
    Vector z = project(Vector::Zero(p.cols()));
    Vector best = z;
    double best_obj = sparse_objective(z, group_rows, alpha);
    // three stages with shrinking steps, each restarted from the best
    // point found so far
    for (int stage = 0; stage < 3; ++stage, step0 /= 10.0, z = best)
        subgrad_stage(group_rows, alpha, (iters + 2) / 3, step0, project, z, best, best_obj);
    return {std::move(best), best_obj};
}

}  // namespace gsd::oracle
