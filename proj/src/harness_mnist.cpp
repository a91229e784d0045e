#include "gsd/harness.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gsd {

namespace {

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("read_idx: truncated file");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

MnistData read_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("read_idx: cannot open " + images_path);
    if (read_be32(img) != 0x00000803u)
        throw std::runtime_error("read_idx: bad image magic in " + images_path);
    const int count = static_cast<int>(read_be32(img));
    const int rows = static_cast<int>(read_be32(img));
    const int cols = static_cast<int>(read_be32(img));
    const int pixels = rows * cols;
    std::vector<unsigned char> buf(static_cast<std::size_t>(count) * pixels);
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!img) throw std::runtime_error("read_idx: truncated image data in " + images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("read_idx: cannot open " + labels_path);
    if (read_be32(lab) != 0x00000801u)
        throw std::runtime_error("read_idx: bad label magic in " + labels_path);
    const int lcount = static_cast<int>(read_be32(lab));
    if (lcount != count)
        throw std::runtime_error("read_idx: image/label count mismatch");
    std::vector<unsigned char> lbuf(count);
    lab.read(reinterpret_cast<char*>(lbuf.data()), count);
    if (!lab) throw std::runtime_error("read_idx: truncated label data in " + labels_path);

    MnistData data;
    data.images.resize(pixels, count);
    for (int s = 0; s < count; ++s)
        for (int p = 0; p < pixels; ++p)
            data.images(p, s) = buf[static_cast<std::size_t>(s) * pixels + p] / 255.0;
    data.labels.assign(lbuf.begin(), lbuf.end());
    return data;
}

SplitIndices split_indices(int total, int train, int val, int test, std::uint64_t seed) {
    if (train + val + test > total)
        throw std::invalid_argument("split_indices: split exceeds dataset size");
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + train);
    s.val.assign(idx.begin() + train, idx.begin() + train + val);
    s.test.assign(idx.begin() + train + val, idx.begin() + train + val + test);
    return s;
}

MnistData select(const MnistData& data, const std::vector<int>& idx) {
    MnistData out;
    out.images.resize(data.images.rows(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.images.col(i) = data.images.col(idx[i]);
        out.labels.push_back(data.labels[idx[i]]);
    }
    return out;
}

std::string to_string(Encoding e) {
    switch (e) {
        case Encoding::Raw: return "raw";
        case Encoding::RawCopy: return "raw-copy";
        case Encoding::Decon4: return "decon-4";
        case Encoding::Decon1: return "decon-1";
    }
    throw std::logic_error("unknown Encoding");
}

Encoding encoding_from_string(const std::string& s) {
    if (s == "raw") return Encoding::Raw;
    if (s == "raw-copy") return Encoding::RawCopy;
    if (s == "decon-4") return Encoding::Decon4;
    if (s == "decon-1") return Encoding::Decon1;
    throw std::invalid_argument("unknown encoding: " + s);
}

namespace {

constexpr std::uint64_t kCacheMagic = 0x6773646b63616368ull;

std::uint64_t image_key(const Vector& image, const std::string& manifest, double alpha) {
    std::uint64_t h = fnv1a(image.data(), sizeof(double) * image.size());
    h = fnv1a(manifest.data(), manifest.size(), h);
    h = fnv1a(&alpha, sizeof(alpha), h);
    return h;
}

std::string key_path(const std::string& dir, std::uint64_t key) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx.bin", static_cast<unsigned long long>(key));
    return dir + "/" + buf;
}

bool load_cached(const std::string& path, int n, int k, Matrix* out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::uint64_t magic = 0;
    std::uint32_t rn = 0, rk = 0;
    in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
    in.read(reinterpret_cast<char*>(&rn), sizeof(rn));
    in.read(reinterpret_cast<char*>(&rk), sizeof(rk));
    if (!in || magic != kCacheMagic || rn != static_cast<std::uint32_t>(n) ||
        rk != static_cast<std::uint32_t>(k)) {
        std::fprintf(stderr, "warning: corrupt deconv cache entry %s, recomputing\n", path.c_str());
        return false;
    }
    out->resize(n, k);
    in.read(reinterpret_cast<char*>(out->data()), sizeof(double) * n * k);
    if (!in) {
        std::fprintf(stderr, "warning: corrupt deconv cache entry %s, recomputing\n", path.c_str());
        return false;
    }
    return true;
}

void store_cached(const std::string& path, const Matrix& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return;  // cache is best-effort
    std::uint32_t n = static_cast<std::uint32_t>(x.rows());
    std::uint32_t k = static_cast<std::uint32_t>(x.cols());
    out.write(reinterpret_cast<const char*>(&kCacheMagic), sizeof(kCacheMagic));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&k), sizeof(k));
    out.write(reinterpret_cast<const char*>(x.data()), sizeof(double) * x.size());
}

}  // namespace

Dataset build_inputs(const Matrix& images, const std::vector<int>& labels, Encoding enc,
                     const FilterBank& bank, const std::string& bank_manifest, double alpha,
                     const std::string& cache_dir, const SolverConfig& cfg) {
    const int n = static_cast<int>(images.rows());
    const int samples = static_cast<int>(images.cols());
    const int k = bank.k();
    Dataset ds;
    ds.labels = labels;
    ds.nodes = n;

    if (enc == Encoding::Raw) {
        ds.channels = 1;
        ds.features = images;
        return ds;
    }
    if (enc == Encoding::RawCopy) {
        ds.channels = k;
        ds.features.resize(static_cast<Eigen::Index>(n) * k, samples);
        for (int c = 0; c < k; ++c) ds.features.middleRows(static_cast<Eigen::Index>(c) * n, n) = images;
        return ds;
    }

    // deconvolved encodings, disk-cached per image
    std::filesystem::create_directories(cache_dir);
    Matrix seeds(static_cast<Eigen::Index>(n) * k, samples);  // vec(X) per column
    std::vector<int> missing;
    for (int s = 0; s < samples; ++s) {
        std::uint64_t key = image_key(images.col(s), bank_manifest, alpha);
        Matrix x;
        if (load_cached(key_path(cache_dir, key), n, k, &x))
            seeds.col(s) = Eigen::Map<Vector>(x.data(), static_cast<Eigen::Index>(n) * k);
        else
            missing.push_back(s);
    }
    if (!missing.empty()) {
        Matrix y(n, missing.size());
        for (std::size_t i = 0; i < missing.size(); ++i) y.col(i) = images.col(missing[i]);
        auto [sol, reports] = deconv_bank_batch(y, bank, alpha, cfg);
        for (std::size_t i = 0; i < missing.size(); ++i) {
            seeds.col(missing[i]) = sol.col(i);
            Eigen::Map<Matrix> xm(sol.col(i).data(), n, k);
            std::uint64_t key = image_key(images.col(missing[i]), bank_manifest, alpha);
            store_cached(key_path(cache_dir, key), xm);
        }
    }

    if (enc == Encoding::Decon4) {
        ds.channels = k;
        ds.features = std::move(seeds);
    } else {
        ds.channels = 1;
        ds.features.resize(n, samples);
        for (int s = 0; s < samples; ++s) {
            Eigen::Map<Matrix> xm(seeds.col(s).data(), n, k);
            ds.features.col(s) = xm.rowwise().sum();
        }
    }
    return ds;
}

}  // namespace gsd
