#pragma once

#include "gsd/deconv.hpp"
#include "gsd/filters.hpp"
#include "gsd/gnn.hpp"
#include "gsd/graph.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gsd {

// --- synthetic diffusion experiment ---

struct SynthConfig {
    int n = 30;
    double sparsity = 0.1;          // fraction of nonzeros in the seed
    double p1 = 0.1, p2 = 0.3, p = 0.7;
    int diffusion_taps = 3;         // L of the common diffusing filter
    std::vector<double> sigma_grid = {0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
    int signal_count = 1000;        // seeds; observations are 2x this
    int train_count = 1500, test_count = 500;
    std::uint64_t seed = 0;
    SolverConfig solver{1.0, 5000, 1e-6, 1e-6};
};

struct SynthDataset {
    Matrix seeds;     // n x S sparse originals x_S
    Matrix x;         // n x 2S class signals (columns 2d, 2d+1 from draw d)
    Matrix y;         // n x 2S observed diffused signals
    std::vector<int> labels;      // 0 = class 1, 1 = class 2
    std::vector<int> train_idx, test_idx;
    Graph g1, g2, g;
    FilterMatrix h;   // common short-range diffusion filter on g
};

/// Fixed graphs per seed; per draw: sparse normal seed, x1 = H1 x_S on
/// g1 (UR), x2 = H2 x_S on g2 (SR), y = H x on the common g (SR).
SynthDataset synth_generate(const SynthConfig& cfg);

struct SweepRow {
    double sigma;
    double acc_x, acc_y, acc_xhat;
    int unconverged = 0;
    int flagged_near_singular = 0;
};

/// Per sigma: perturb H per sample, deconvolve, train the three
/// logistic-regression classifiers on x, y, x_hat with identical
/// hyperparameters.
std::vector<SweepRow> sigma_sweep(const SynthConfig& cfg);

void save_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

// --- MNIST ---

struct MnistData {
    Matrix images;  // 784 x S, scaled to [0,1]
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }
};

/// Reads big-endian IDX image/label files (magics 0x803 / 0x801).
MnistData read_idx(const std::string& images_path, const std::string& labels_path);

struct SplitIndices {
    std::vector<int> train, val, test;
};

/// Seeded random split into pairwise-disjoint index sets.
SplitIndices split_indices(int total, int train, int val, int test, std::uint64_t seed);

MnistData select(const MnistData& data, const std::vector<int>& idx);

// --- input encodings ---

enum class Encoding { Raw, RawCopy, Decon4, Decon1 };

std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& s);

/// Bank deconvolutions are cached on disk under cache_dir, keyed by
/// (image digest, bank manifest digest, alpha).
Dataset build_inputs(const Matrix& images, const std::vector<int>& labels, Encoding enc,
                     const FilterBank& bank, const std::string& bank_manifest, double alpha,
                     const std::string& cache_dir, const SolverConfig& cfg = {1.0, 2000, 1e-5, 1e-5});

/// FNV-1a digest of a byte range, used for cache keys and config digests.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 14695981039346656037ull);

// --- experiment orchestration ---

/// Plain-text config: [section] headers with key=value lines.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback = "") const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Digest of the canonicalized contents.
    std::uint64_t digest() const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct RunResult {
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string experiment;
    std::map<std::string, double> metrics;
    double wall_time_s = 0.0;
    std::vector<std::string> artifacts;

    std::string to_json() const;
};

/// Executes the experiment described by the config (type = sweep-sigma
/// or mnist) and writes RunResult JSONL, metric CSVs, and plot data
/// under out_dir.
RunResult run_experiment(const Config& cfg, const std::string& out_dir);

}  // namespace gsd
