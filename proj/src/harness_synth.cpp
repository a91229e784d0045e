#include "gsd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gsd {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

SynthDataset synth_generate(const SynthConfig& cfg) {
    if (cfg.train_count + cfg.test_count != 2 * cfg.signal_count)
        throw std::invalid_argument("synth_generate: split must sum to 2x signal count");
    std::mt19937_64 rng(cfg.seed);
    Graph g1 = erdos_renyi(cfg.n, cfg.p1, rng());
    Graph g2 = erdos_renyi(cfg.n, cfg.p2, rng());
    Graph g = erdos_renyi(cfg.n, cfg.p, rng());

    auto s1 = shift_operator(g1, ShiftKind::ScaledAdjacency);
    auto s2 = shift_operator(g2, ShiftKind::ScaledAdjacency);
    auto s = shift_operator(g, ShiftKind::ScaledAdjacency);
    FilterMatrix h1 = filter_matrix(s1, range_profile(Profile::UR, cfg.diffusion_taps));
    FilterMatrix h2 = filter_matrix(s2, range_profile(Profile::SR, cfg.diffusion_taps));
    FilterMatrix h = filter_matrix(s, range_profile(Profile::SR, cfg.diffusion_taps));

    const int n = cfg.n;
    const int draws = cfg.signal_count;
    const int nnz = static_cast<int>(std::ceil(cfg.sparsity * n));
    SynthDataset data{Matrix::Zero(n, draws),
                      Matrix(n, 2 * draws),
                      Matrix(n, 2 * draws),
                      {},
                      {},
                      {},
                      std::move(g1),
                      std::move(g2),
                      std::move(g),
                      std::move(h)};
    data.labels.resize(2 * draws);

    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::vector<int> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    for (int d = 0; d < draws; ++d) {
        std::shuffle(positions.begin(), positions.end(), rng);
        for (int k = 0; k < nnz; ++k) data.seeds(positions[k], d) = stdnorm(rng);
        Vector x1 = h1.matrix * data.seeds.col(d);
        Vector x2 = h2.matrix * data.seeds.col(d);
        data.x.col(2 * d) = x1;
        data.x.col(2 * d + 1) = x2;
        data.y.col(2 * d) = data.h.matrix * x1;
        data.y.col(2 * d + 1) = data.h.matrix * x2;
        data.labels[2 * d] = 0;
        data.labels[2 * d + 1] = 1;
    }

    std::vector<int> idx(2 * draws);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    data.train_idx.assign(idx.begin(), idx.begin() + cfg.train_count);
    data.test_idx.assign(idx.begin() + cfg.train_count, idx.end());
    return data;
}

namespace {

// The two classes share a symmetric seed distribution, so any linear
// score has the same symmetric law under both; a plain logistic model
// on signed values is at chance by construction. Classify magnitudes
// instead (the minimal sign-invariant feature map).
double classify(const Matrix& feats, const SynthDataset& data) {
    const int d = static_cast<int>(feats.rows());
    Matrix xtr(d, data.train_idx.size()), xte(d, data.test_idx.size());
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < data.train_idx.size(); ++i) {
        xtr.col(i) = feats.col(data.train_idx[i]).cwiseAbs();
        ytr.push_back(data.labels[data.train_idx[i]]);
    }
    for (std::size_t i = 0; i < data.test_idx.size(); ++i) {
        xte.col(i) = feats.col(data.test_idx[i]).cwiseAbs();
        yte.push_back(data.labels[data.test_idx[i]]);
    }
    return logreg(xtr, ytr, xte, yte);
}

}  // namespace

std::vector<SweepRow> sigma_sweep(const SynthConfig& cfg) {
    SynthDataset data = synth_generate(cfg);
    const int total = static_cast<int>(data.labels.size());
    const double acc_x = classify(data.x, data);
    const double acc_y = classify(data.y, data);

    std::vector<SweepRow> rows;
    for (std::size_t si = 0; si < cfg.sigma_grid.size(); ++si) {
        const double sigma = cfg.sigma_grid[si];
        SweepRow row{sigma, acc_x, acc_y, 0.0, 0, 0};
        Matrix xhat(cfg.n, total);
        for (int j = 0; j < total; ++j) {
            std::uint64_t pseed = fnv1a(&cfg.seed, sizeof(cfg.seed));
            pseed = fnv1a(&si, sizeof(si), pseed);
            pseed = fnv1a(&j, sizeof(j), pseed);
            FilterMatrix ht = perturb_filter(data.h, sigma, pseed);
            try {
                auto [x, rep] = deconv_single(data.y.col(j), ht, cfg.solver);
                if (!rep.converged) ++row.unconverged;
                xhat.col(j) = x;
            } catch (const RankDeficientError&) {
                ++row.flagged_near_singular;
                auto [x, rep] = deconv_robust(data.y.col(j), ht, 1e-3, cfg.solver);
                xhat.col(j) = x;
            }
        }
        row.acc_xhat = classify(xhat, data);
        rows.push_back(row);
    }
    return rows;
}

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_sweep_csv: cannot open " + path);
    out << "sigma,acc_x,acc_y,acc_xhat,unconverged,flagged_near_singular\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.sigma, r.acc_x,
                      r.acc_y, r.acc_xhat, r.unconverged, r.flagged_near_singular);
        out << buf;
    }
}

}  // namespace gsd
