#pragma once

#include "gsd/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsd {

enum class Profile { UR, SR, MR, LR, Custom };

std::string to_string(Profile p);
Profile profile_from_string(const std::string& s);

/// Polynomial filter taps h_0..h_{L-1}.
struct FilterCoefficients {
    Vector coeffs;
    Profile profile = Profile::Custom;

    int taps() const { return static_cast<int>(coeffs.size()); }
};

/// Range profiles with index i running 1..L, mapped to taps 0..L-1:
/// UR all ones, SR_i = (1+i/L)^-4, MR_i = exp(-(i/L-0.5)^2), LR = reversed SR.
FilterCoefficients range_profile(Profile kind, int taps);

/// H = sum_l h_l S^l, realized by Horner accumulation.
struct FilterMatrix {
    Matrix matrix;
    FilterCoefficients source_coeffs;
    ShiftKind source_shift = ShiftKind::Adjacency;
    bool degree_warning = false;  // set when L > n

    int n() const { return static_cast<int>(matrix.rows()); }
};

FilterMatrix filter_matrix(const ShiftOperator& s, const FilterCoefficients& h);

GraphSignal apply_filter(const FilterMatrix& h, const GraphSignal& x);

/// Vandermonde product: response_i = sum_j h_j * lambda_i^j.
Vector frequency_response(const Vector& eigenvalues, const FilterCoefficients& h);

/// y = V (response o V^T x), the convolution-theorem route.
GraphSignal spectral_apply(const SpectralBasis& b, const Vector& response, const GraphSignal& x);

/// H + eps*Z with one scalar eps ~ N(0, sigma^2) and Z i.i.d. standard
/// normal. Symmetry is not preserved.
FilterMatrix perturb_filter(const FilterMatrix& h, double sigma, std::uint64_t seed);

/// Horizontal stack P = [H_1 .. H_K] over a common shift.
struct FilterBank {
    std::vector<FilterMatrix> filters;
    Matrix stacked;  // n x n*K

    int n() const { return static_cast<int>(stacked.rows()); }
    int k() const { return static_cast<int>(filters.size()); }
};

FilterBank build_bank(const ShiftOperator& s, const std::vector<Profile>& profiles, int taps);

// --- file formats ---

/// Coefficients as a single CSV row.
void save_coeffs_csv(const FilterCoefficients& h, const std::string& path);
FilterCoefficients load_coeffs_csv(const std::string& path);

/// Bank manifest: {"shift": "<kind>", "L": int, "profiles": [..]}.
std::string bank_manifest_json(ShiftKind shift, int taps, const std::vector<Profile>& profiles);

}  // namespace gsd
