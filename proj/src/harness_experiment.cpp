#include "gsd/harness.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsd {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line, section;
    while (std::getline(ss, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("Config: malformed line: " + line);
        cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    auto v = get(section, key);
    return v.empty() ? fallback : std::stod(v);
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
    auto v = get(section, key);
    return v.empty() ? fallback : std::stoi(v);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

std::uint64_t Config::digest() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [sec, kv] : sections_) {
        h = fnv1a(sec.data(), sec.size(), h);
        for (const auto& [k, v] : kv) {
            h = fnv1a(k.data(), k.size(), h);
            h = fnv1a(v.data(), v.size(), h);
        }
    }
    return h;
}

std::string RunResult::to_json() const {
    nlohmann::json j;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["experiment"] = experiment;
    j["metrics"] = metrics;
    j["wall_time_s"] = wall_time_s;
    j["artifacts"] = artifacts;
    return j.dump();
}

namespace {

SynthConfig synth_config_from(const Config& cfg) {
    SynthConfig sc;
    sc.n = cfg.get_int("synth", "n", sc.n);
    sc.sparsity = cfg.get_double("synth", "sparsity", sc.sparsity);
    sc.p1 = cfg.get_double("synth", "p1", sc.p1);
    sc.p2 = cfg.get_double("synth", "p2", sc.p2);
    sc.p = cfg.get_double("synth", "p", sc.p);
    sc.diffusion_taps = cfg.get_int("synth", "degree", sc.diffusion_taps);
    sc.signal_count = cfg.get_int("synth", "signals", sc.signal_count);
    sc.train_count = cfg.get_int("synth", "train", 0);
    sc.test_count = cfg.get_int("synth", "test", 0);
    if (sc.train_count == 0) sc.train_count = 3 * sc.signal_count / 2;
    if (sc.test_count == 0) sc.test_count = 2 * sc.signal_count - sc.train_count;
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 0));
    auto grid = cfg.get("synth", "sigma_grid");
    if (!grid.empty()) {
        sc.sigma_grid.clear();
        std::stringstream ss(grid);
        std::string tok;
        while (std::getline(ss, tok, ',')) sc.sigma_grid.push_back(std::stod(tok));
    }
    sc.solver.max_iter = cfg.get_int("solver", "max_iter", sc.solver.max_iter);
    sc.solver.tol_primal = cfg.get_double("solver", "tol_primal", sc.solver.tol_primal);
    sc.solver.tol_dual = cfg.get_double("solver", "tol_dual", sc.solver.tol_dual);
    return sc;
}

RunResult run_sweep(const Config& cfg, const std::string& out_dir, const std::string& digest) {
    SynthConfig sc = synth_config_from(cfg);
    auto rows = sigma_sweep(sc);
    RunResult res;
    res.experiment = "sweep-sigma";
    res.config_digest = digest;
    res.seed = sc.seed;
    std::string csv = out_dir + "/sweep.csv";
    save_sweep_csv(rows, csv);
    res.artifacts.push_back(csv);
    for (const auto& r : rows) {
        char key[64];
        std::snprintf(key, sizeof(key), "acc_xhat@%g", r.sigma);
        res.metrics[key] = r.acc_xhat;
    }
    if (!rows.empty()) {
        res.metrics["acc_x"] = rows.front().acc_x;
        res.metrics["acc_y"] = rows.front().acc_y;
    }
    return res;
}

RunResult run_mnist(const Config& cfg, const std::string& out_dir, const std::string& digest) {
    RunResult res;
    res.experiment = "mnist";
    res.config_digest = digest;
    res.seed = static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 0));

    std::string data_dir = cfg.get("mnist", "data_dir");
    if (data_dir.empty()) {
        const char* env = std::getenv("GSD_MNIST_DIR");
        if (env == nullptr)
            throw std::runtime_error("mnist: set [mnist] data_dir or GSD_MNIST_DIR");
        data_dir = env;
    }
    MnistData all = read_idx(data_dir + "/" + cfg.get("mnist", "images", "mnist-images-idx3-ubyte"),
                             data_dir + "/" + cfg.get("mnist", "labels", "mnist-labels-idx1-ubyte"));
    auto split = split_indices(all.size(), cfg.get_int("mnist", "train", 2000),
                               cfg.get_int("mnist", "val", 400), cfg.get_int("mnist", "test", 400),
                               res.seed);
    MnistData train_set = select(all, split.train);
    MnistData val_set = select(all, split.val);
    MnistData test_set = select(all, split.test);

    const int degree = cfg.get_int("bank", "degree", 10);
    const double alpha = cfg.get_double("bank", "alpha", 0.2);
    Graph grid = grid8_graph(28, 28);
    auto shift = shift_operator(grid, ShiftKind::ScaledAdjacency);
    std::vector<Profile> profiles = {Profile::UR, Profile::SR, Profile::MR, Profile::LR};
    FilterBank bank = build_bank(shift, profiles, degree);
    std::string manifest = bank_manifest_json(shift.kind, degree, profiles);
    std::string cache_dir = cfg.get("bank", "cache_dir", out_dir + "/deconv-cache");
    SolverConfig solver{1.0, cfg.get_int("solver", "max_iter", 2000),
                        cfg.get_double("solver", "tol_primal", 1e-5),
                        cfg.get_double("solver", "tol_dual", 1e-5)};

    Encoding enc = encoding_from_string(cfg.get("mnist", "encoding", "decon-4"));
    Dataset train_ds =
        build_inputs(train_set.images, train_set.labels, enc, bank, manifest, alpha, cache_dir, solver);
    Dataset val_ds =
        build_inputs(val_set.images, val_set.labels, enc, bank, manifest, alpha, cache_dir, solver);
    Dataset test_ds =
        build_inputs(test_set.images, test_set.labels, enc, bank, manifest, alpha, cache_dir, solver);

    NetworkSpec spec = parse_architecture(cfg.get("gnn", "arch", "GC8-P4-GC16-P4-FC64"));
    spec.mode = conv_mode_from_string(cfg.get("gnn", "mode", "non-parametric"));
    spec.spline_q = cfg.get_int("gnn", "q", 25);
    spec.class_count = 10;

    int pool_depth = 0;
    for (const auto& t : spec.layers)
        if (t.kind == LayerToken::Kind::P)
            for (int s = t.arg; s > 1; s /= 2) ++pool_depth;
    auto levels = graclus_coarsen(grid, std::max(1, pool_depth), res.seed);
    PoolingPlan plan = binary_tree_plan(grid, levels);

    Network net(spec, plan, train_ds.channels, res.seed);
    TrainConfig tc;
    tc.learning_rate = cfg.get_double("train", "learning_rate", tc.learning_rate);
    tc.batch_size = cfg.get_int("train", "batch", tc.batch_size);
    tc.steps = cfg.get_int("train", "steps", tc.steps);
    tc.weight_decay = cfg.get_double("train", "weight_decay", tc.weight_decay);
    tc.eval_every = cfg.get_int("train", "eval_every", tc.eval_every);
    tc.seed = res.seed;

    Dataset val_gnn{val_ds.features, val_ds.labels, val_ds.nodes, val_ds.channels};
    TrainTrace trace = train(net, train_ds, val_gnn, tc);

    std::string trace_csv = out_dir + "/trace-" + to_string(enc) + "-" + to_string(spec.mode) + ".csv";
    save_metric_trace_csv(trace, trace_csv);
    res.artifacts.push_back(trace_csv);
    std::string ckpt = out_dir + "/model-" + to_string(enc) + "-" + to_string(spec.mode) + ".json";
    net.save_checkpoint(ckpt, cfg.get("gnn", "arch", "GC8-P4-GC16-P4-FC64"), "graclus-seed-" +
                            std::to_string(res.seed));
    res.artifacts.push_back(ckpt);

    Matrix test_prep = net.prepare_input(test_ds.features);
    res.metrics["test_accuracy"] = net.accuracy(test_prep, test_ds.labels);
    res.metrics["final_val_accuracy"] =
        trace.val_accuracy.empty() ? 0.0 : trace.val_accuracy.back();
    res.metrics["diverged"] = trace.diverged ? 1.0 : 0.0;
    return res;
}

}  // namespace

RunResult run_experiment(const Config& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    char digest[32];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(cfg.digest()));
    const std::string type = cfg.get("experiment", "type");
    auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    std::string stage = "setup";
    try {
        if (type == "sweep-sigma") {
            stage = "sweep-sigma";
            res = run_sweep(cfg, out_dir, digest);
        } else if (type == "mnist") {
            stage = "mnist";
            res = run_mnist(cfg, out_dir, digest);
        } else {
            throw std::runtime_error("unknown experiment type: " + type);
        }
    } catch (const std::exception& e) {
        // persist the partial trace before aborting
        std::ofstream out(out_dir + "/results.jsonl", std::ios::app);
        nlohmann::json j;
        j["config_digest"] = digest;
        j["stage"] = stage;
        j["error"] = e.what();
        out << j.dump() << "\n";
        throw std::runtime_error("experiment failed in stage '" + stage + "': " + e.what());
    }
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream out(out_dir + "/results.jsonl", std::ios::app);
    out << res.to_json() << "\n";
    return res;
}

}  // namespace gsd
