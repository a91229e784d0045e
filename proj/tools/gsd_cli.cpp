// Command-line front end: dataset generation, deconvolution, training,
// evaluation, and result reporting.

#include "gsd/coarsening.hpp"
#include "gsd/deconv.hpp"
#include "gsd/filters.hpp"
#include "gsd/gnn.hpp"
#include "gsd/graph.hpp"
#include "gsd/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gsd;

namespace {

// one sample per row
Matrix load_signals_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data");
    Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(c, r) = rows[r][c];
    return m;  // column per sample
}

void save_signals_csv(const Matrix& cols, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[32];
    for (Eigen::Index s = 0; s < cols.cols(); ++s) {
        for (Eigen::Index i = 0; i < cols.rows(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", cols(i, s));
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

std::vector<Profile> parse_bank_list(const std::string& s) {
    std::vector<Profile> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(profile_from_string(tok));
    return out;
}

Config load_config(const std::string& path, std::uint64_t seed, bool seed_set) {
    Config cfg = path.empty() ? Config::parse_string("") : Config::parse_file(path);
    if (seed_set) cfg.set("experiment", "seed", std::to_string(seed));
    return cfg;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

int cmd_gen_synth(const Config& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    SynthConfig sc;
    sc.n = cfg.get_int("synth", "n", sc.n);
    sc.diffusion_taps = cfg.get_int("synth", "degree", sc.diffusion_taps);
    sc.signal_count = cfg.get_int("synth", "signals", sc.signal_count);
    sc.train_count = cfg.get_int("synth", "train", 3 * sc.signal_count / 2);
    sc.test_count = cfg.get_int("synth", "test", 2 * sc.signal_count - sc.train_count);
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 0));
    auto ds = synth_generate(sc);
    save_graph_csv(ds.g1, out_dir + "/graph1.csv");
    save_graph_csv(ds.g2, out_dir + "/graph2.csv");
    save_graph_csv(ds.g, out_dir + "/graph.csv");
    save_signals_csv(ds.seeds, out_dir + "/seeds.csv");
    save_signals_csv(ds.x, out_dir + "/x.csv");
    save_signals_csv(ds.y, out_dir + "/y.csv");
    std::ofstream lab(out_dir + "/labels.csv");
    lab << "index,label,split\n";
    std::vector<char> split(ds.labels.size(), '-');
    for (int i : ds.train_idx) split[i] = 't';
    for (int i : ds.test_idx) split[i] = 'e';
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        lab << i << "," << ds.labels[i] << "," << (split[i] == 't' ? "train" : "test") << "\n";
    std::cout << "wrote " << ds.y.cols() << " signals to " << out_dir << "\n";
    return 0;
}

int cmd_deconv(const std::string& graph_path, const std::string& shift_name,
               const std::string& bank_list, int degree, double alpha, const std::string& input,
               const std::string& output, const std::string& report_path) {
    Matrix signals = load_signals_csv(input);
    const int n = static_cast<int>(signals.rows());
    Graph g = load_graph_csv(graph_path, n);
    auto s = shift_operator(g, shift_kind_from_string(shift_name));
    auto profiles = parse_bank_list(bank_list);
    FilterBank bank = build_bank(s, profiles, degree);
    auto [solutions, reports] = deconv_bank_batch(signals, bank, alpha);
    save_signals_csv(solutions, output);
    if (!report_path.empty()) {
        std::ofstream rep(report_path);
        for (const auto& r : reports) rep << to_json(r) << "\n";
    }
    int unconverged = 0;
    for (const auto& r : reports) unconverged += r.converged ? 0 : 1;
    std::cout << "deconvolved " << signals.cols() << " signals (" << unconverged
              << " unconverged) -> " << output << "\n";
    return unconverged == 0 ? 0 : 1;
}

// Converts per-digit JSON arrays ({"data": [pixels...]}, files 0.json
// .. 9.json, values in [0,1]) into a single IDX image/label file pair,
// round-robin interleaved across digits.
int cmd_mnist_prep(const std::string& src_dir, const std::string& out_dir) {
    std::vector<std::vector<std::vector<unsigned char>>> digits(10);
    for (int d = 0; d < 10; ++d) {
        std::string path = src_dir + "/" + std::to_string(d) + ".json";
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        nlohmann::json j;
        in >> j;
        const auto& flat = j.at("data");
        if (flat.size() % 784 != 0)
            throw std::runtime_error(path + ": pixel count not a multiple of 784");
        for (std::size_t off = 0; off < flat.size(); off += 784) {
            std::vector<unsigned char> img(784);
            for (int p = 0; p < 784; ++p)
                img[p] = static_cast<unsigned char>(
                    std::lround(255.0 * flat[off + p].get<double>()));
            digits[d].push_back(std::move(img));
        }
    }
    fs::create_directories(out_dir);
    std::ofstream img_out(out_dir + "/mnist-images-idx3-ubyte", std::ios::binary);
    std::ofstream lab_out(out_dir + "/mnist-labels-idx1-ubyte", std::ios::binary);
    std::uint32_t total = 0;
    for (const auto& dv : digits) total += static_cast<std::uint32_t>(dv.size());
    write_be32(img_out, 0x803);
    write_be32(img_out, total);
    write_be32(img_out, 28);
    write_be32(img_out, 28);
    write_be32(lab_out, 0x801);
    write_be32(lab_out, total);
    std::vector<std::size_t> cursor(10, 0);
    bool remaining = true;
    while (remaining) {
        remaining = false;
        for (int d = 0; d < 10; ++d) {
            if (cursor[d] >= digits[d].size()) continue;
            const auto& img = digits[d][cursor[d]++];
            img_out.write(reinterpret_cast<const char*>(img.data()), 784);
            char lb = static_cast<char>(d);
            lab_out.write(&lb, 1);
            remaining = true;
        }
    }
    std::cout << "wrote " << total << " images to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const Config& cfg) {
    std::string data_dir = cfg.get("mnist", "data_dir");
    if (data_dir.empty()) {
        const char* env = std::getenv("GSD_MNIST_DIR");
        if (env == nullptr) throw std::runtime_error("set [mnist] data_dir or GSD_MNIST_DIR");
        data_dir = env;
    }
    MnistData all = read_idx(data_dir + "/" + cfg.get("mnist", "images", "mnist-images-idx3-ubyte"),
                             data_dir + "/" + cfg.get("mnist", "labels", "mnist-labels-idx1-ubyte"));
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 0));
    auto split = split_indices(all.size(), cfg.get_int("mnist", "train", 2000),
                               cfg.get_int("mnist", "val", 400), cfg.get_int("mnist", "test", 400),
                               seed);
    MnistData test_set = select(all, split.test);

    Graph grid = grid8_graph(28, 28);
    const int degree = cfg.get_int("bank", "degree", 10);
    std::vector<Profile> profiles = {Profile::UR, Profile::SR, Profile::MR, Profile::LR};
    auto shift = shift_operator(grid, ShiftKind::ScaledAdjacency);
    FilterBank bank = build_bank(shift, profiles, degree);
    std::string manifest = bank_manifest_json(shift.kind, degree, profiles);
    Encoding enc = encoding_from_string(cfg.get("mnist", "encoding", "decon-4"));
    Dataset test_ds = build_inputs(test_set.images, test_set.labels, enc, bank, manifest,
                                   cfg.get_double("bank", "alpha", 0.2),
                                   cfg.get("bank", "cache_dir", "deconv-cache"));

    NetworkSpec spec = parse_architecture(cfg.get("gnn", "arch", "GC8-P4-GC16-P4-FC64"));
    spec.mode = conv_mode_from_string(cfg.get("gnn", "mode", "non-parametric"));
    spec.spline_q = cfg.get_int("gnn", "q", 25);
    int pool_depth = 0;
    for (const auto& t : spec.layers)
        if (t.kind == LayerToken::Kind::P)
            for (int s = t.arg; s > 1; s /= 2) ++pool_depth;
    PoolingPlan plan = binary_tree_plan(grid, graclus_coarsen(grid, std::max(1, pool_depth), seed));
    Network net(spec, plan, test_ds.channels, seed);
    net.load_checkpoint(checkpoint);
    Matrix prep = net.prepare_input(test_ds.features);
    std::printf("test_accuracy %.4f on %d samples\n", net.accuracy(prep, test_ds.labels),
                test_ds.size());
    return 0;
}

int cmd_report(const std::string& out_dir) {
    std::ifstream in(out_dir + "/results.jsonl");
    if (!in) throw std::runtime_error("no results.jsonl under " + out_dir);
    std::string line;
    std::vector<nlohmann::json> runs;
    while (std::getline(in, line))
        if (!line.empty()) runs.push_back(nlohmann::json::parse(line));
    std::ofstream plot(out_dir + "/plot-data.csv");
    plot << "experiment,config_digest,metric,value\n";
    for (const auto& r : runs) {
        if (r.contains("error")) {
            std::cout << r.value("config_digest", "?") << "  FAILED in "
                      << r.value("stage", "?") << ": " << r.value("error", "") << "\n";
            continue;
        }
        std::cout << r.value("config_digest", "?") << "  " << r.value("experiment", "?") << "  ("
                  << r.value("wall_time_s", 0.0) << "s)\n";
        for (const auto& [k, v] : r.at("metrics").items()) {
            std::cout << "    " << k << " = " << v << "\n";
            plot << r.value("experiment", "?") << "," << r.value("config_digest", "?") << "," << k
                 << "," << v << "\n";
        }
    }
    std::cout << runs.size() << " runs; plot data in " << out_dir << "/plot-data.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph filter deconvolution toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "runs";
    std::uint64_t seed = 0;
    int threads = 1;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config file");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--seed", seed, "override the experiment seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", threads, "Eigen thread cap");

    auto* gen = app.add_subcommand("gen-synth", "generate the synthetic diffusion dataset");
    auto* sweep = app.add_subcommand("sweep-sigma", "run the operator-noise sweep");
    auto* prep = app.add_subcommand("mnist-prep", "convert per-digit JSON dumps to IDX files");
    std::string prep_src, prep_out = "data/mnist";
    prep->add_option("--src", prep_src, "directory with 0.json..9.json")->required();
    prep->add_option("--out", prep_out, "destination directory");

    auto* dec = app.add_subcommand("deconv", "batch bank deconvolution of signals");
    std::string dec_graph, dec_shift = "scaled-adjacency", dec_bank = "UR,SR,MR,LR";
    std::string dec_in, dec_out = "seeds.csv", dec_report;
    int dec_degree = 3;
    double dec_alpha = 0.2;
    dec->add_option("--graph", dec_graph, "graph edge-list csv")->required();
    dec->add_option("--shift", dec_shift, "shift operator kind");
    dec->add_option("--bank", dec_bank, "comma-separated profile list");
    dec->add_option("--degree", dec_degree, "filter tap count");
    dec->add_option("--alpha", dec_alpha, "entrywise sparsity weight");
    dec->add_option("--input", dec_in, "signals csv, one row per signal")->required();
    dec->add_option("--output", dec_out, "recovered seeds csv");
    dec->add_option("--report", dec_report, "per-signal solver report jsonl");

    auto* trainc = app.add_subcommand("train", "train a network per the config");
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    std::string ckpt;
    evalc->add_option("--checkpoint", ckpt, "model checkpoint json")->required();
    auto* rep = app.add_subcommand("report", "summarize results.jsonl and emit plot data");

    CLI11_PARSE(app, argc, argv);
    Eigen::setNbThreads(threads);

    try {
        if (gen->parsed()) return cmd_gen_synth(load_config(config_path, seed, seed_set), out_dir);
        if (sweep->parsed()) {
            Config cfg = load_config(config_path, seed, seed_set);
            cfg.set("experiment", "type", "sweep-sigma");
            auto res = run_experiment(cfg, out_dir);
            std::cout << res.to_json() << "\n";
            return 0;
        }
        if (prep->parsed()) return cmd_mnist_prep(prep_src, prep_out);
        if (dec->parsed())
            return cmd_deconv(dec_graph, dec_shift, dec_bank, dec_degree, dec_alpha, dec_in,
                              dec_out, dec_report);
        if (trainc->parsed()) {
            Config cfg = load_config(config_path, seed, seed_set);
            cfg.set("experiment", "type", "mnist");
            auto res = run_experiment(cfg, out_dir);
            std::cout << res.to_json() << "\n";
            return 0;
        }
        if (evalc->parsed()) return cmd_eval(ckpt, load_config(config_path, seed, seed_set));
        if (rep->parsed()) return cmd_report(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
