#include "gsd/coarsening.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gsd {

namespace {

CoarseningLevel coarsen_once(const Graph& g, std::mt19937_64& rng) {
    const int n = g.n();
    auto nbr = g.neighbor_lists();
    Vector deg = g.degrees();

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<int> parent(n, -1);
    int next_cluster = 0;
    for (int i : order) {
        if (parent[i] >= 0) continue;
        int best = -1;
        double best_score = -1.0;
        for (auto [j, w] : nbr[i]) {
            if (parent[j] >= 0) continue;
            double score = w * (1.0 / deg[i] + 1.0 / deg[j]);
            if (score > best_score) {  // ties go to the lowest index (lists are sorted)
                best_score = score;
                best = j;
            }
        }
        parent[i] = next_cluster;
        if (best >= 0) parent[best] = next_cluster;
        ++next_cluster;
    }

    std::map<std::pair<int, int>, double> wsum;
    for (const auto& e : g.edges()) {
        int cu = parent[e.u], cv = parent[e.v];
        if (cu == cv) continue;  // intra-cluster weight dropped
        if (cu > cv) std::swap(cu, cv);
        wsum[{cu, cv}] += e.weight;
    }
    std::vector<Edge> coarse_edges;
    coarse_edges.reserve(wsum.size());
    for (const auto& [key, w] : wsum) coarse_edges.push_back({key.first, key.second, w});
    return {std::move(parent), Graph(next_cluster, std::move(coarse_edges))};
}

}  // namespace

std::vector<CoarseningLevel> graclus_coarsen(const Graph& g, int num_levels, std::uint64_t seed) {
    if (num_levels < 1) throw std::invalid_argument("graclus_coarsen: num_levels must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<CoarseningLevel> levels;
    const Graph* cur = &g;
    for (int l = 0; l < num_levels; ++l) {
        levels.push_back(coarsen_once(*cur, rng));
        cur = &levels.back().coarse;
    }
    return levels;
}

PoolingPlan binary_tree_plan(const Graph& g, const std::vector<CoarseningLevel>& levels) {
    if (levels.empty()) throw std::invalid_argument("binary_tree_plan: empty level list");
    if (levels.front().fine_n() != g.n())
        throw std::invalid_argument("binary_tree_plan: graph size does not match level 0");
    const int depth = static_cast<int>(levels.size());

    // children[l][c]: level-l nodes inside coarse cluster c
    std::vector<std::vector<std::vector<int>>> children(depth);
    for (int l = 0; l < depth; ++l) {
        children[l].assign(levels[l].coarse.n(), {});
        for (int i = 0; i < levels[l].fine_n(); ++i) children[l][levels[l].parent[i]].push_back(i);
    }

    PoolingPlan plan;
    plan.levels = levels;
    plan.base_ = g;
    plan.perms.resize(depth + 1);
    auto& top = plan.perms[depth];
    top.resize(levels.back().coarse.n());
    std::iota(top.begin(), top.end(), 0);
    for (int l = depth - 1; l >= 0; --l) {
        std::vector<int> cur;
        cur.reserve(2 * plan.perms[l + 1].size());
        for (int id : plan.perms[l + 1]) {
            if (id < 0) {
                cur.push_back(-1);
                cur.push_back(-1);
                continue;
            }
            const auto& kids = children[l][id];
            cur.push_back(kids[0]);
            cur.push_back(kids.size() == 2 ? kids[1] : -1);
        }
        plan.perms[l] = std::move(cur);
    }
    plan.fake_counts.resize(depth + 1);
    for (int l = 0; l <= depth; ++l) {
        int real = 0;
        for (int id : plan.perms[l]) real += id >= 0;
        plan.fake_counts[l] = plan.padded_size(l) - real;
    }
    return plan;
}

Graph PoolingPlan::padded_graph(int level) const {
    const Graph& src = level == 0 ? *base_ : levels.at(level - 1).coarse;
    const auto& perm = perms.at(level);
    std::vector<int> pos_of(src.n(), -1);
    for (int pos = 0; pos < static_cast<int>(perm.size()); ++pos)
        if (perm[pos] >= 0) pos_of[perm[pos]] = pos;
    std::vector<Edge> edges;
    edges.reserve(src.edges().size());
    for (const auto& e : src.edges())
        edges.push_back({pos_of[e.u], pos_of[e.v], e.weight});
    return Graph(static_cast<int>(perm.size()), std::move(edges));
}

std::string PoolingPlan::to_json() const {
    nlohmann::json j;
    j["num_levels"] = depth();
    j["parents"] = nlohmann::json::array();
    for (const auto& lvl : levels) j["parents"].push_back(lvl.parent);
    j["perms"] = perms;
    j["fake_counts"] = fake_counts;
    return j.dump();
}

Matrix pool_forward(const PoolingPlan& plan, int level, const Matrix& features) {
    if (features.rows() != plan.padded_size(level))
        throw std::invalid_argument("pool_forward: row count does not match padded level size");
    if (features.rows() % 2 != 0) throw std::invalid_argument("pool_forward: odd row count");
    Matrix f = features;
    const auto& perm = plan.perms.at(level);
    for (int pos = 0; pos < static_cast<int>(perm.size()); ++pos)
        if (perm[pos] < 0) f.row(pos).setZero();
    Matrix out(f.rows() / 2, f.cols());
    for (int r = 0; r < out.rows(); ++r)
        out.row(r) = f.row(2 * r).cwiseMax(f.row(2 * r + 1));
    return out;
}

}  // namespace gsd
