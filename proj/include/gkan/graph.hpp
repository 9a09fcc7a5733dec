#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gkan/matrix.hpp"

namespace gkan {

/// One dataset instance: features, labels and disjoint train/val/test masks
/// over an undirected graph. The stored edge list is deduplicated and free of
/// self-loops; self-loops enter only through adjacency normalization.
struct Graph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;  // undirected, first < second
    Matrix features;                         // num_nodes x d_input
    std::vector<int> labels;                 // class ids in [0, num_classes)
    std::vector<std::uint8_t> train_mask;
    std::vector<std::uint8_t> val_mask;
    std::vector<std::uint8_t> test_mask;
    int num_classes = 0;

    int feature_dim() const { return static_cast<int>(features.cols()); }
};

inline void validate_graph(const Graph& g) {
    if (g.num_nodes <= 0) throw std::invalid_argument("graph: num_nodes must be positive");
    if (static_cast<int>(g.features.rows()) != g.num_nodes)
        throw std::invalid_argument("graph: feature row count != num_nodes");
    if (static_cast<int>(g.labels.size()) != g.num_nodes)
        throw std::invalid_argument("graph: label count != num_nodes");
    for (const auto& [u, v] : g.edges) {
        if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
            throw std::invalid_argument("graph: edge endpoint out of range");
        if (u == v) throw std::invalid_argument("graph: stored edge list must not contain self-loops");
    }
    for (int label : g.labels)
        if (label < 0 || label >= g.num_classes)
            throw std::invalid_argument("graph: label out of range");
    const std::size_t n = static_cast<std::size_t>(g.num_nodes);
    if (g.train_mask.size() != n || g.val_mask.size() != n || g.test_mask.size() != n)
        throw std::invalid_argument("graph: mask length != num_nodes");
    for (std::size_t i = 0; i < n; ++i)
        if (g.train_mask[i] + g.val_mask[i] + g.test_mask[i] > 1)
            throw std::invalid_argument("graph: masks must be pairwise disjoint");
}

inline int mask_count(const std::vector<std::uint8_t>& mask) {
    int n = 0;
    for (auto m : mask) n += (m != 0);
    return n;
}

/// Symmetrically normalized adjacency with self-loops,
/// A_hat = D~^{-1/2} (A + I) D~^{-1/2}, in compressed sparse row form with
/// sorted column indices (fixed accumulation order for reproducible products).
struct NormalizedAdjacency {
    int num_nodes = 0;
    std::vector<int> row_ptr;   // size num_nodes + 1
    std::vector<int> col_idx;   // sorted within each row
    std::vector<double> values;
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
    const int n = g.num_nodes;
    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    for (const auto& [u, v] : g.edges) {
        neighbors[static_cast<std::size_t>(u)].push_back(v);
        neighbors[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<double> inv_sqrt_degree(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& nb = neighbors[static_cast<std::size_t>(i)];
        nb.push_back(i);  // self-loop from A + I
        std::sort(nb.begin(), nb.end());
        inv_sqrt_degree[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(nb.size()));
    }

    NormalizedAdjacency adj;
    adj.num_nodes = n;
    adj.row_ptr.resize(static_cast<std::size_t>(n) + 1, 0);
    std::size_t nnz = 0;
    for (int i = 0; i < n; ++i) nnz += neighbors[static_cast<std::size_t>(i)].size();
    adj.col_idx.reserve(nnz);
    adj.values.reserve(nnz);
    for (int i = 0; i < n; ++i) {
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            adj.col_idx.push_back(j);
            adj.values.push_back(inv_sqrt_degree[static_cast<std::size_t>(i)] *
                                 inv_sqrt_degree[static_cast<std::size_t>(j)]);
        }
        adj.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<int>(adj.col_idx.size());
    }
    return adj;
}

/// Sparse-dense product A_hat * H with a deterministic accumulation order.
inline Matrix spmm(const NormalizedAdjacency& adj, const Matrix& h) {
    check_shapes(h.rows() == static_cast<std::size_t>(adj.num_nodes), "spmm row count");
    Matrix out(h.rows(), h.cols());
    const std::size_t d = h.cols();
    for (int i = 0; i < adj.num_nodes; ++i) {
        double* out_i = out.row(static_cast<std::size_t>(i));
        for (int p = adj.row_ptr[static_cast<std::size_t>(i)]; p < adj.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
            const double v = adj.values[static_cast<std::size_t>(p)];
            const double* h_j = h.row(static_cast<std::size_t>(adj.col_idx[static_cast<std::size_t>(p)]));
            for (std::size_t c = 0; c < d; ++c) out_i[c] += v * h_j[c];
        }
    }
    return out;
}

} // namespace gkan
