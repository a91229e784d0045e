#include "gsd/deconv.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>

namespace gsd {

std::string to_json(const SolveReport& r) {
    nlohmann::json j;
    j["iterations"] = r.iterations;
    j["primal_residual"] = r.primal_residual;
    j["dual_residual"] = r.dual_residual;
    j["objective"] = r.objective;
    j["feasibility"] = r.feasibility;
    j["converged"] = r.converged;
    return j.dump();
}

Vector soft_threshold(const Vector& v, double t) {
    if (t < 0.0) throw std::invalid_argument("soft_threshold: t must be >= 0");
    return v.unaryExpr([t](double x) {
        double m = std::abs(x) - t;
        return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
    });
}

Vector group_soft_threshold(const Vector& col, double t) {
    if (t < 0.0) throw std::invalid_argument("group_soft_threshold: t must be >= 0");
    double nrm = col.norm();
    if (nrm <= t) return Vector::Zero(col.size());
    return (1.0 - t / nrm) * col;
}

Matrix sparse_group_prox(const Matrix& x, double t, double alpha) {
    if (t < 0.0 || alpha < 0.0) throw std::invalid_argument("sparse_group_prox: t, alpha must be >= 0");
    Matrix z(x.rows(), x.cols());
    for (int c = 0; c < x.cols(); ++c)
        z.col(c) = group_soft_threshold(soft_threshold(x.col(c), alpha * t), t);
    return z;
}

double sparse_group_penalty(const Matrix& x, double alpha) {
    double l21 = 0.0;
    for (int c = 0; c < x.cols(); ++c) l21 += x.col(c).norm();
    return l21 + alpha * x.cwiseAbs().sum();
}

AffineProjector::AffineProjector(Matrix p, Vector y) : p_(std::move(p)), y_(std::move(y)) {
    if (p_.rows() != y_.size()) throw std::invalid_argument("AffineProjector: dimension mismatch");
    Matrix gram = p_ * p_.transpose();
    gram_.compute(gram);
    Vector d = gram_.vectorD();
    double dmax = d.cwiseAbs().maxCoeff();
    if (gram_.info() != Eigen::Success || d.minCoeff() <= 1e-10 * dmax)
        throw RankDeficientError(
            "AffineProjector: P P^T is rank-deficient at pivot tolerance 1e-10; "
            "use a robust-mode solve instead");
}

Vector AffineProjector::project(const Vector& z) const {
    return z - p_.transpose() * gram_.solve(p_ * z - y_);
}

Matrix AffineProjector::project_cols(const Matrix& z, const Matrix& y_cols) const {
    return z - p_.transpose() * gram_.solve(p_ * z - y_cols);
}

namespace {

// ADMM for min g(x) s.t. P x = y, with g given through its prox.
// x-update: prox_{g/rho}(w - u); w-update: exact affine projection of
// x + u; u-update: u += x - w. The feasible iterate w is returned.
template <typename Prox>
std::pair<Vector, SolveReport> admm_affine(const AffineProjector& proj, int dim, double obj_alpha,
                                           int group_rows, const Prox& prox,
                                           const SolverConfig& cfg) {
    if (cfg.rho <= 0.0) throw std::invalid_argument("SolverConfig: rho must be positive");
    Vector x = Vector::Zero(dim), w = Vector::Zero(dim), u = Vector::Zero(dim);
    SolveReport rep;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        x = prox(w - u, 1.0 / cfg.rho);
        Vector w_prev = std::move(w);
        w = proj.project(x + u);
        u += x - w;
        rep.iterations = it;
        rep.primal_residual = (x - w).norm();
        rep.dual_residual = cfg.rho * (w - w_prev).norm();
        if (rep.primal_residual <= cfg.tol_primal && rep.dual_residual <= cfg.tol_dual) {
            rep.converged = true;
            break;
        }
    }
    Eigen::Map<const Matrix> wm(w.data(), group_rows, dim / group_rows);
    rep.objective = group_rows == dim ? w.lpNorm<1>() : sparse_group_penalty(wm, obj_alpha);
    rep.feasibility = (proj.p() * w - proj.y()).norm();
    return {std::move(w), rep};
}

}  // namespace

std::pair<GraphSignal, SolveReport> deconv_single(const GraphSignal& y, const FilterMatrix& h,
                                                  const SolverConfig& cfg) {
    if (y.size() != h.n()) throw std::invalid_argument("deconv_single: dimension mismatch");
    AffineProjector proj(h.matrix, y);
    auto prox = [](const Vector& v, double t) { return soft_threshold(v, t); };
    return admm_affine(proj, h.n(), 0.0, h.n(), prox, cfg);
}

std::pair<Matrix, SolveReport> deconv_bank(const GraphSignal& y, const FilterBank& bank,
                                           double alpha, const SolverConfig& cfg) {
    const int n = bank.n();
    const int k = bank.k();
    if (y.size() != n) throw std::invalid_argument("deconv_bank: dimension mismatch");
    AffineProjector proj(bank.stacked, y);
    auto prox = [n, k, alpha](const Vector& v, double t) {
        Eigen::Map<const Matrix> vm(v.data(), n, k);
        Matrix z = sparse_group_prox(vm, t, alpha);
        return Vector(Eigen::Map<Vector>(z.data(), n * k));
    };
    auto [w, rep] = admm_affine(proj, n * k, alpha, n, prox, cfg);
    Matrix x = Eigen::Map<Matrix>(w.data(), n, k);
    return {std::move(x), rep};
}

std::pair<Matrix, std::vector<SolveReport>> deconv_bank_batch(const Matrix& y_cols,
                                                              const FilterBank& bank, double alpha,
                                                              const SolverConfig& cfg) {
    const int n = bank.n();
    const int k = bank.k();
    const int dim = n * k;
    const int total = static_cast<int>(y_cols.cols());
    if (y_cols.rows() != n) throw std::invalid_argument("deconv_bank_batch: dimension mismatch");
    if (cfg.rho <= 0.0) throw std::invalid_argument("SolverConfig: rho must be positive");
    AffineProjector proj(bank.stacked, Vector::Zero(n));

    Matrix solution = Matrix::Zero(dim, total);
    std::vector<SolveReport> reports(total);

    // active-set lockstep: converged columns are compacted away so late
    // stragglers do not drag the whole batch
    std::vector<int> active(total);
    std::iota(active.begin(), active.end(), 0);
    Matrix y_act = y_cols;
    Matrix x = Matrix::Zero(dim, total), w = Matrix::Zero(dim, total), u = Matrix::Zero(dim, total);

    auto prox_cols = [&](Matrix& m, double t) {
        for (int c = 0; c < m.cols(); ++c) {
            Eigen::Map<Matrix> mc(m.col(c).data(), n, k);
            mc = sparse_group_prox(mc, t, alpha);
        }
    };

    int it = 0;
    while (it < cfg.max_iter && !active.empty()) {
        ++it;
        x = w - u;
        prox_cols(x, 1.0 / cfg.rho);
        Matrix w_prev = w;
        w = proj.project_cols(x + u, y_act);
        u += x - w;

        std::vector<int> still;
        for (std::size_t c = 0; c < active.size(); ++c) {
            double rp = (x.col(c) - w.col(c)).norm();
            double rd = cfg.rho * (w.col(c) - w_prev.col(c)).norm();
            auto& rep = reports[active[c]];
            rep.iterations = it;
            rep.primal_residual = rp;
            rep.dual_residual = rd;
            if (rp <= cfg.tol_primal && rd <= cfg.tol_dual) {
                rep.converged = true;
                solution.col(active[c]) = w.col(c);
            } else {
                still.push_back(static_cast<int>(c));
            }
        }
        if (still.size() != active.size()) {
            std::vector<int> next;
            Matrix xn(dim, still.size()), wn(dim, still.size()), un(dim, still.size()),
                yn(n, still.size());
            for (std::size_t c = 0; c < still.size(); ++c) {
                int src = still[c];
                next.push_back(active[src]);
                xn.col(c) = x.col(src);
                wn.col(c) = w.col(src);
                un.col(c) = u.col(src);
                yn.col(c) = y_act.col(src);
            }
            active = std::move(next);
            x = std::move(xn);
            w = std::move(wn);
            u = std::move(un);
            y_act = std::move(yn);
        }
    }
    // unconverged leftovers keep their last feasible iterate
    for (std::size_t c = 0; c < active.size(); ++c) solution.col(active[c]) = w.col(c);

    for (int c = 0; c < total; ++c) {
        Eigen::Map<Matrix> sm(solution.col(c).data(), n, k);
        reports[c].objective = sparse_group_penalty(sm, alpha);
        reports[c].feasibility = (bank.stacked * solution.col(c) - y_cols.col(c)).norm();
    }
    return {std::move(solution), std::move(reports)};
}

std::pair<GraphSignal, SolveReport> deconv_robust(const GraphSignal& y, const FilterMatrix& h,
                                                  double lambda, const SolverConfig& cfg) {
    if (lambda <= 0.0) throw std::invalid_argument("deconv_robust: lambda must be positive");
    if (y.size() != h.n()) throw std::invalid_argument("deconv_robust: dimension mismatch");
    const Matrix& hm = h.matrix;
    const int n = h.n();

    // step = 1 / ||H^T H||_2, estimated by 100 power iterations
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    double lip = 1.0;
    for (int i = 0; i < 100; ++i) {
        Vector hv = hm.transpose() * (hm * v);
        lip = hv.norm();
        if (lip <= 0.0) break;
        v = hv / lip;
    }
    if (lip <= 0.0) lip = 1.0;
    const double step = 1.0 / lip;

    auto objective = [&](const Vector& x) {
        return 0.5 * (hm * x - y).squaredNorm() + lambda * x.lpNorm<1>();
    };

    Vector x = Vector::Zero(n), z = x;
    double t_mom = 1.0;
    double prev_obj = objective(x);
    SolveReport rep;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        Vector grad = hm.transpose() * (hm * z - y);
        Vector x_next = soft_threshold(z - step * grad, step * lambda);
        double obj = objective(x_next);
        if (obj > prev_obj) {
            // restart momentum from the last accepted point
            t_mom = 1.0;
            z = x;
            grad = hm.transpose() * (hm * z - y);
            x_next = soft_threshold(z - step * grad, step * lambda);
            obj = objective(x_next);
        }
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        z = x_next + ((t_mom - 1.0) / t_next) * (x_next - x);
        double rel_change = (x_next - x).norm() / std::max(1.0, x.norm());
        x = std::move(x_next);
        t_mom = t_next;
        prev_obj = obj;
        rep.iterations = it;
        rep.primal_residual = rel_change;
        if (rel_change <= cfg.tol_primal) {
            rep.converged = true;
            break;
        }
    }
    rep.objective = prev_obj;
    rep.feasibility = (hm * x - y).norm();
    return {std::move(x), rep};
}

GraphSignal aggregate_seeds(const Matrix& x) { return x.rowwise().sum(); }

}  // namespace gsd
