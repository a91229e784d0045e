#include "gsd/filters.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gsd {

std::string to_string(Profile p) {
    switch (p) {
        case Profile::UR: return "UR";
        case Profile::SR: return "SR";
        case Profile::MR: return "MR";
        case Profile::LR: return "LR";
        case Profile::Custom: return "custom";
    }
    throw std::logic_error("unknown Profile");
}

Profile profile_from_string(const std::string& s) {
    if (s == "UR") return Profile::UR;
    if (s == "SR") return Profile::SR;
    if (s == "MR") return Profile::MR;
    if (s == "LR") return Profile::LR;
    if (s == "custom") return Profile::Custom;
    throw std::invalid_argument("unknown profile: " + s);
}

FilterCoefficients range_profile(Profile kind, int taps) {
    if (taps < 1) throw std::invalid_argument("range_profile: L must be >= 1");
    const double L = taps;
    Vector h(taps);
    switch (kind) {
        case Profile::UR:
            h.setOnes();
            break;
        case Profile::SR:
            for (int i = 1; i <= taps; ++i) h[i - 1] = std::pow(1.0 + i / L, -4.0);
            break;
        case Profile::MR:
            for (int i = 1; i <= taps; ++i) {
                double u = i / L - 0.5;
                h[i - 1] = std::exp(-u * u);
            }
            break;
        case Profile::LR:
            for (int i = 1; i <= taps; ++i) h[i - 1] = std::pow(1.0 + (taps - i + 1) / L, -4.0);
            break;
        case Profile::Custom:
            throw std::invalid_argument("range_profile: Custom has no formula");
    }
    return {std::move(h), kind};
}

FilterMatrix filter_matrix(const ShiftOperator& s, const FilterCoefficients& h) {
    const int n = s.n();
    const int taps = h.taps();
    if (taps < 1) throw std::invalid_argument("filter_matrix: empty coefficients");
    Matrix acc = h.coeffs[taps - 1] * Matrix::Identity(n, n);
    for (int l = taps - 2; l >= 0; --l) {
        acc = s.matrix * acc;
        acc.diagonal().array() += h.coeffs[l];
    }
    FilterMatrix fm{std::move(acc), h, s.kind, taps > n};
    return fm;
}

GraphSignal apply_filter(const FilterMatrix& h, const GraphSignal& x) {
    if (x.size() != h.n()) throw std::invalid_argument("apply_filter: dimension mismatch");
    return h.matrix * x;
}

Vector frequency_response(const Vector& eigenvalues, const FilterCoefficients& h) {
    const int n = static_cast<int>(eigenvalues.size());
    Vector resp = Vector::Zero(n);
    // Horner in each eigenvalue
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = h.taps() - 1; j >= 0; --j) acc = acc * eigenvalues[i] + h.coeffs[j];
        resp[i] = acc;
    }
    return resp;
}

GraphSignal spectral_apply(const SpectralBasis& b, const Vector& response, const GraphSignal& x) {
    if (x.size() != b.n() || response.size() != b.n())
        throw std::invalid_argument("spectral_apply: dimension mismatch");
    Vector xh = b.vectors.transpose() * x;
    return b.vectors * (response.cwiseProduct(xh));
}

FilterMatrix perturb_filter(const FilterMatrix& h, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("perturb_filter: sigma must be >= 0");
    FilterMatrix out = h;
    out.source_coeffs.profile = Profile::Custom;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    const double eps = sigma * stdnorm(rng);
    const int n = h.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.matrix(i, j) += eps * stdnorm(rng);
    return out;
}

FilterBank build_bank(const ShiftOperator& s, const std::vector<Profile>& profiles, int taps) {
    if (profiles.empty()) throw std::invalid_argument("build_bank: empty profile list");
    FilterBank bank;
    const int n = s.n();
    bank.stacked.resize(n, n * static_cast<int>(profiles.size()));
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        bank.filters.push_back(filter_matrix(s, range_profile(profiles[k], taps)));
        bank.stacked.middleCols(static_cast<int>(k) * n, n) = bank.filters.back().matrix;
    }
    return bank;
}

void save_coeffs_csv(const FilterCoefficients& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_coeffs_csv: cannot open " + path);
    char buf[64];
    for (int i = 0; i < h.taps(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", h.coeffs[i]);
        out << buf << (i + 1 < h.taps() ? "," : "\n");
    }
}

FilterCoefficients load_coeffs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_coeffs_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_coeffs_csv: empty file " + path);
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    FilterCoefficients h;
    h.coeffs = Eigen::Map<Vector>(vals.data(), static_cast<int>(vals.size()));
    h.profile = Profile::Custom;
    return h;
}

std::string bank_manifest_json(ShiftKind shift, int taps, const std::vector<Profile>& profiles) {
    nlohmann::json j;
    j["shift"] = to_string(shift);
    j["L"] = taps;
    j["profiles"] = nlohmann::json::array();
    for (auto p : profiles) j["profiles"].push_back(to_string(p));
    return j.dump();
}

}  // namespace gsd
