#pragma once

#include "gsd/filters.hpp"
#include "gsd/graph.hpp"

#include <Eigen/Cholesky>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gsd {

struct SolverConfig {
    double rho = 1.0;        // ADMM penalty
    int max_iter = 50000;
    double tol_primal = 1e-8;
    double tol_dual = 1e-8;
};

struct SolveReport {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
    double feasibility = 0.0;  // ||y - P vec(X)||_2
    bool converged = false;
};

std::string to_json(const SolveReport& r);

/// Thrown when P P^T fails the rank check (pivot tolerance 1e-10).
class RankDeficientError : public std::runtime_error {
public:
    explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

/// Elementwise sign(v) * max(|v| - t, 0).
Vector soft_threshold(const Vector& v, double t);

/// Column shrinkage max(1 - t/||col||, 0) * col.
Vector group_soft_threshold(const Vector& col, double t);

/// Prox of t * (||X||_{2,1} + alpha ||vec(X)||_1): entrywise shrinkage by
/// alpha*t, then column shrinkage by t. The composition order is fixed.
Matrix sparse_group_prox(const Matrix& x, double t, double alpha);

/// Eq. 3 penalty ||X||_{2,1} + alpha ||vec(X)||_1.
double sparse_group_penalty(const Matrix& x, double alpha);

/// Projection onto {z : P z = y} via a one-time factorization of P P^T.
class AffineProjector {
public:
    AffineProjector(Matrix p, Vector y);

    Vector project(const Vector& z) const;
    /// Column c of z is projected onto {v : P v = y_cols.col(c)}.
    Matrix project_cols(const Matrix& z, const Matrix& y_cols) const;

    const Matrix& p() const { return p_; }
    const Vector& y() const { return y_; }

private:
    Matrix p_;
    Vector y_;
    Eigen::LDLT<Matrix> gram_;
};

/// min ||x||_1  s.t.  y = H x, by ADMM with exact affine projection.
std::pair<GraphSignal, SolveReport> deconv_single(const GraphSignal& y, const FilterMatrix& h,
                                                  const SolverConfig& cfg = {});

/// min 1/2 ||H x - y||^2 + lambda ||x||_1, by accelerated proximal
/// gradient with restart on objective increase.
std::pair<GraphSignal, SolveReport> deconv_robust(const GraphSignal& y, const FilterMatrix& h,
                                                  double lambda, const SolverConfig& cfg = {});

/// min ||X||_{2,1} + alpha ||vec(X)||_1  s.t.  y = P vec(X).
std::pair<Matrix, SolveReport> deconv_bank(const GraphSignal& y, const FilterBank& bank,
                                           double alpha, const SolverConfig& cfg = {});

/// Batched deconv_bank over the columns of y_cols (n x S); returns the
/// nK x S stacked solutions. All columns share the bank factorization
/// and advance in lockstep, which turns the per-iteration work into
/// dense matrix products.
std::pair<Matrix, std::vector<SolveReport>> deconv_bank_batch(const Matrix& y_cols,
                                                              const FilterBank& bank, double alpha,
                                                              const SolverConfig& cfg = {});

/// Row-sum of the seeding matrix (sum of the K per-filter columns).
GraphSignal aggregate_seeds(const Matrix& x);

}  // namespace gsd
