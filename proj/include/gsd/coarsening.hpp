#pragma once

#include "gsd/graph.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsd {

/// One Graclus level: every cluster holds 1 or 2 fine nodes; the coarse
/// graph sums inter-cluster weights and drops intra-cluster ones.
struct CoarseningLevel {
    std::vector<int> parent;  // fine node -> coarse cluster index
    Graph coarse;

    int fine_n() const { return static_cast<int>(parent.size()); }
};

/// Greedy matching: visit unmarked nodes in seeded random order, pair
/// each with the unmarked neighbor maximizing w_ij (1/d_i + 1/d_j),
/// ties broken by lowest index; leftovers become singletons.
std::vector<CoarseningLevel> graclus_coarsen(const Graph& g, int num_levels, std::uint64_t seed);

/// Binary-tree arrangement of the coarsening hierarchy: children of
/// coarse node k occupy positions (2k, 2k+1), singleton clusters get a
/// disconnected fake sibling. perms[l][pos] is the level-l node at that
/// position, or -1 for a fake node.
struct PoolingPlan {
    std::vector<CoarseningLevel> levels;
    std::vector<std::vector<int>> perms;  // one per level 0..L
    std::vector<int> fake_counts;         // per level

    int depth() const { return static_cast<int>(levels.size()); }
    int padded_size(int level) const { return static_cast<int>(perms.at(level).size()); }
    bool is_fake(int level, int pos) const { return perms.at(level).at(pos) < 0; }

    /// Level-l graph on the padded, permuted node set; fake nodes are
    /// disconnected. Level 0 uses the original graph.
    Graph padded_graph(int level) const;

    std::string to_json() const;

private:
    friend PoolingPlan binary_tree_plan(const Graph& g, const std::vector<CoarseningLevel>& levels);
    std::optional<Graph> base_;  // level-0 graph
};

PoolingPlan binary_tree_plan(const Graph& g, const std::vector<CoarseningLevel>& levels);

/// Stride-2 max pooling over adjacent position pairs. Fake-node rows
/// are zeroed before the max; input rows = padded_size(level).
Matrix pool_forward(const PoolingPlan& plan, int level, const Matrix& features);

}  // namespace gsd
