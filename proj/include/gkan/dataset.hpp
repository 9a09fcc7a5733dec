#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/rng.hpp"

namespace gkan {

/// How train/val/test masks are drawn.
///
/// RandomCounts draws a seeded uniform split with the given sizes.
/// PerClassTrain takes per_class_train training nodes from each class (in
/// seeded shuffle order) and then val_size / test_size nodes from the rest.
struct SplitSpec {
    enum class Mode { RandomCounts, PerClassTrain };
    Mode mode = Mode::RandomCounts;
    int train_size = 1000;
    int val_size = 200;
    int test_size = 300;
    int per_class_train = 20;
};

/// Draws masks for an existing graph; everything else is left untouched.
inline void assign_masks(Graph& g, const SplitSpec& split, std::uint64_t seed) {
    const int n = g.num_nodes;
    g.train_mask.assign(static_cast<std::size_t>(n), 0);
    g.val_mask.assign(static_cast<std::size_t>(n), 0);
    g.test_mask.assign(static_cast<std::size_t>(n), 0);

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(order);

    if (split.val_size < 0 || split.test_size < 0)
        throw std::invalid_argument("split: sizes must be nonnegative");

    if (split.mode == SplitSpec::Mode::RandomCounts) {
        if (split.train_size < 1) throw std::invalid_argument("split: train_size must be >= 1");
        if (split.train_size + split.val_size + split.test_size > n)
            throw std::invalid_argument("split: sizes exceed node count");
        int pos = 0;
        for (int i = 0; i < split.train_size; ++i) g.train_mask[static_cast<std::size_t>(order[pos++])] = 1;
        for (int i = 0; i < split.val_size; ++i) g.val_mask[static_cast<std::size_t>(order[pos++])] = 1;
        for (int i = 0; i < split.test_size; ++i) g.test_mask[static_cast<std::size_t>(order[pos++])] = 1;
        return;
    }

    if (split.per_class_train < 1) throw std::invalid_argument("split: per_class_train must be >= 1");
    std::vector<int> taken(static_cast<std::size_t>(g.num_classes), 0);
    std::vector<int> rest;
    rest.reserve(order.size());
    for (int node : order) {
        const int c = g.labels[static_cast<std::size_t>(node)];
        if (taken[static_cast<std::size_t>(c)] < split.per_class_train) {
            g.train_mask[static_cast<std::size_t>(node)] = 1;
            ++taken[static_cast<std::size_t>(c)];
        } else {
            rest.push_back(node);
        }
    }
    if (split.val_size + split.test_size > static_cast<int>(rest.size()))
        throw std::invalid_argument("split: val/test sizes exceed remaining nodes");
    for (int i = 0; i < split.val_size; ++i) g.val_mask[static_cast<std::size_t>(rest[static_cast<std::size_t>(i)])] = 1;
    for (int i = 0; i < split.test_size; ++i)
        g.test_mask[static_cast<std::size_t>(rest[static_cast<std::size_t>(split.val_size + i)])] = 1;
}

struct CoraLoadResult {
    Graph graph;
    int raw_feature_dim = 0;       // feature width of the content file
    long long citation_lines = 0;  // raw line count of the cites file
    long long undirected_edges = 0;
    std::vector<std::string> class_names;  // index = class id
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == '\t' || ch == ' ') {
            if (!current.empty()) {
                fields.push_back(std::move(current));
                current.clear();
            }
        } else if (ch != '\r') {
            current.push_back(ch);
        }
    }
    if (!current.empty()) fields.push_back(std::move(current));
    return fields;
}

[[noreturn]] inline void malformed(const std::string& path, long long line_no, const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed line: " + why);
}

inline double parse_feature(const std::string& token, const std::string& path, long long line_no) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        malformed(path, line_no, "feature value '" + token + "' is not a number");
    return v;
}

} // namespace detail

/// Loads a citation dataset in the classic two-file format:
///   content: <node id> <feature values...> <label string>, tab separated
///   cites:   <cited id> <citing id>, treated as an undirected edge
/// Label strings map to class ids in first-appearance order. num_features > 0
/// keeps only the first num_features feature columns (file column order);
/// 0 keeps all. Duplicate and reciprocal citations collapse to one edge.
inline CoraLoadResult load_cora(const std::string& content_path, const std::string& cites_path,
                                int num_features, const SplitSpec& split, std::uint64_t seed) {
    std::ifstream content(content_path);
    if (!content) throw std::runtime_error("file not found: " + content_path);

    CoraLoadResult result;
    Graph& g = result.graph;

    std::unordered_map<std::string, int> node_index;
    std::unordered_map<std::string, int> label_index;
    std::vector<std::vector<double>> rows;
    std::string line;
    long long line_no = 0;
    int width = -1;
    while (std::getline(content, line)) {
        ++line_no;
        auto fields = detail::split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() < 3)
            detail::malformed(content_path, line_no, "expected <id> <features...> <label>");
        const int d = static_cast<int>(fields.size()) - 2;
        if (width < 0) {
            width = d;
        } else if (d != width) {
            detail::malformed(content_path, line_no,
                              "feature count " + std::to_string(d) + " != " + std::to_string(width));
        }
        const std::string& id = fields.front();
        if (!node_index.emplace(id, static_cast<int>(rows.size())).second)
            detail::malformed(content_path, line_no, "duplicate node id '" + id + "'");
        const std::string& label = fields.back();
        auto [it, inserted] = label_index.emplace(label, static_cast<int>(result.class_names.size()));
        if (inserted) result.class_names.push_back(label);
        std::vector<double> feature_row(static_cast<std::size_t>(d));
        for (int f = 0; f < d; ++f)
            feature_row[static_cast<std::size_t>(f)] =
                detail::parse_feature(fields[static_cast<std::size_t>(f) + 1], content_path, line_no);
        rows.push_back(std::move(feature_row));
        g.labels.push_back(it->second);
    }
    if (rows.empty()) throw std::runtime_error(content_path + ": no nodes found");

    result.raw_feature_dim = width;
    if (num_features < 0 || num_features > width)
        throw std::invalid_argument("load_cora: num_features out of range (file has " +
                                    std::to_string(width) + " feature columns)");
    const int keep = (num_features == 0) ? width : num_features;

    g.num_nodes = static_cast<int>(rows.size());
    g.num_classes = static_cast<int>(result.class_names.size());
    g.features = Matrix(static_cast<std::size_t>(g.num_nodes), static_cast<std::size_t>(keep));
    for (int i = 0; i < g.num_nodes; ++i)
        for (int f = 0; f < keep; ++f)
            g.features(static_cast<std::size_t>(i), static_cast<std::size_t>(f)) =
                rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];

    std::ifstream cites(cites_path);
    if (!cites) throw std::runtime_error("file not found: " + cites_path);
    std::set<std::pair<int, int>> edge_set;
    line_no = 0;
    while (std::getline(cites, line)) {
        ++line_no;
        auto fields = detail::split_fields(line);
        if (fields.empty()) continue;
        ++result.citation_lines;
        if (fields.size() != 2)
            detail::malformed(cites_path, line_no, "expected <cited id> <citing id>");
        const auto a = node_index.find(fields[0]);
        const auto b = node_index.find(fields[1]);
        if (a == node_index.end())
            detail::malformed(cites_path, line_no, "unknown node id '" + fields[0] + "'");
        if (b == node_index.end())
            detail::malformed(cites_path, line_no, "unknown node id '" + fields[1] + "'");
        if (a->second == b->second) continue;  // self-citation
        edge_set.emplace(std::min(a->second, b->second), std::max(a->second, b->second));
    }
    g.edges.assign(edge_set.begin(), edge_set.end());
    result.undirected_edges = static_cast<long long>(g.edges.size());

    assign_masks(g, split, seed);
    validate_graph(g);
    return result;
}

/// Stochastic-block-model sanity corpus. Nodes take classes in contiguous
/// blocks; an edge between same-class nodes appears with probability p_in,
/// across classes with p_out. Features are signal * one_hot(class) plus unit
/// Gaussian noise, and masks follow a seeded 60/20/20 split.
inline Graph generate_synthetic(int num_nodes, int num_classes, double p_in, double p_out, int d,
                                double signal, std::uint64_t seed) {
    if (num_nodes < 1 || num_classes < 1 || num_nodes < num_classes)
        throw std::invalid_argument("generate_synthetic: need num_nodes >= num_classes >= 1");
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
        throw std::invalid_argument("generate_synthetic: probabilities must lie in [0, 1]");
    if (p_in < p_out)
        throw std::invalid_argument("generate_synthetic: require p_in >= p_out");
    if (d < num_classes)
        throw std::invalid_argument("generate_synthetic: feature dim must be >= num_classes");

    Graph g;
    g.num_nodes = num_nodes;
    g.num_classes = num_classes;
    g.labels.resize(static_cast<std::size_t>(num_nodes));
    for (int i = 0; i < num_nodes; ++i)
        g.labels[static_cast<std::size_t>(i)] =
            static_cast<int>((static_cast<long long>(i) * num_classes) / num_nodes);

    Rng rng(seed);
    for (int i = 0; i < num_nodes; ++i) {
        for (int j = i + 1; j < num_nodes; ++j) {
            const bool same = g.labels[static_cast<std::size_t>(i)] == g.labels[static_cast<std::size_t>(j)];
            if (rng.uniform() < (same ? p_in : p_out)) g.edges.emplace_back(i, j);
        }
    }

    g.features = Matrix(static_cast<std::size_t>(num_nodes), static_cast<std::size_t>(d));
    for (int i = 0; i < num_nodes; ++i) {
        for (int f = 0; f < d; ++f)
            g.features(static_cast<std::size_t>(i), static_cast<std::size_t>(f)) = rng.normal();
        g.features(static_cast<std::size_t>(i), static_cast<std::size_t>(g.labels[static_cast<std::size_t>(i)])) +=
            signal;
    }

    SplitSpec split;
    split.mode = SplitSpec::Mode::RandomCounts;
    split.train_size = (num_nodes * 6) / 10;
    split.val_size = (num_nodes * 2) / 10;
    split.test_size = num_nodes - split.train_size - split.val_size;
    assign_masks(g, split, rng.next_u64());
    validate_graph(g);
    return g;
}

/// Writes a graph in the same two-file format load_cora reads. Node ids are
/// "n<index>", labels "c<class id>"; feature values use %.17g so a round trip
/// through text reproduces them exactly.
inline void export_graph(const Graph& g, const std::string& content_path, const std::string& cites_path) {
    std::ofstream content(content_path);
    if (!content) throw std::runtime_error("cannot write: " + content_path);
    char buf[64];
    for (int i = 0; i < g.num_nodes; ++i) {
        content << 'n' << i;
        for (int f = 0; f < g.feature_dim(); ++f) {
            std::snprintf(buf, sizeof(buf), "%.17g",
                          g.features(static_cast<std::size_t>(i), static_cast<std::size_t>(f)));
            content << '\t' << buf;
        }
        content << "\tc" << g.labels[static_cast<std::size_t>(i)] << '\n';
    }
    std::ofstream cites(cites_path);
    if (!cites) throw std::runtime_error("cannot write: " + cites_path);
    for (const auto& [u, v] : g.edges) cites << 'n' << u << '\t' << 'n' << v << '\n';
}

} // namespace gkan
