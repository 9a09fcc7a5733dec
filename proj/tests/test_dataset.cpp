#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "gkan/dataset.hpp"

using namespace gkan;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("gkan_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// Five nodes, four features, two classes, in the classic content/cites shape.
const char* kContent =
    "paper_a\t1\t0\t0\t1\tml\n"
    "paper_b\t0\t1\t0\t0\tml\n"
    "paper_c\t1\t1\t0\t0\tdb\n"
    "paper_d\t0\t0\t1\t0\tdb\n"
    "paper_e\t0\t0\t1\t1\tml\n";

const char* kCites =
    "paper_a\tpaper_b\n"
    "paper_b\tpaper_a\n"   // reciprocal of the first line
    "paper_a\tpaper_b\n"   // duplicate
    "paper_c\tpaper_d\n"
    "paper_e\tpaper_e\n"   // self-citation, dropped
    "paper_b\tpaper_e\n";

SplitSpec tiny_split() {
    SplitSpec s;
    s.train_size = 2;
    s.val_size = 1;
    s.test_size = 1;
    return s;
}

} // namespace

TEST_CASE("load_cora") {
    TempDir dir;
    write_file(dir.file("c.content"), kContent);
    write_file(dir.file("c.cites"), kCites);

    SECTION("parses nodes, labels, and deduplicated undirected edges") {
        const auto result = load_cora(dir.file("c.content"), dir.file("c.cites"), 0, tiny_split(), 1);
        const Graph& g = result.graph;
        REQUIRE(g.num_nodes == 5);
        REQUIRE(g.num_classes == 2);
        REQUIRE(result.raw_feature_dim == 4);
        REQUIRE(g.feature_dim() == 4);
        REQUIRE(result.citation_lines == 6);
        REQUIRE(result.undirected_edges == 3);
        // label ids follow first appearance: ml -> 0, db -> 1
        REQUIRE(result.class_names == std::vector<std::string>{"ml", "db"});
        REQUIRE(g.labels == std::vector<int>{0, 0, 1, 1, 0});
        REQUIRE(g.features(0, 0) == 1.0);
        REQUIRE(g.features(0, 3) == 1.0);
        REQUIRE(g.features(3, 2) == 1.0);
    }
    SECTION("keeps only the first num_features columns") {
        const auto result = load_cora(dir.file("c.content"), dir.file("c.cites"), 2, tiny_split(), 1);
        REQUIRE(result.graph.feature_dim() == 2);
        REQUIRE(result.raw_feature_dim == 4);
        REQUIRE(result.graph.features(2, 0) == 1.0);
        REQUIRE(result.graph.features(2, 1) == 1.0);
        REQUIRE_THROWS_AS(load_cora(dir.file("c.content"), dir.file("c.cites"), 9, tiny_split(), 1),
                          std::invalid_argument);
    }
    SECTION("draws deterministic disjoint masks of the requested sizes") {
        const auto a = load_cora(dir.file("c.content"), dir.file("c.cites"), 0, tiny_split(), 7);
        const auto b = load_cora(dir.file("c.content"), dir.file("c.cites"), 0, tiny_split(), 7);
        REQUIRE(a.graph.train_mask == b.graph.train_mask);
        REQUIRE(a.graph.val_mask == b.graph.val_mask);
        REQUIRE(a.graph.test_mask == b.graph.test_mask);
        REQUIRE(mask_count(a.graph.train_mask) == 2);
        REQUIRE(mask_count(a.graph.val_mask) == 1);
        REQUIRE(mask_count(a.graph.test_mask) == 1);
        const auto c = load_cora(dir.file("c.content"), dir.file("c.cites"), 0, tiny_split(), 8);
        const bool same_split = a.graph.train_mask == c.graph.train_mask &&
                                a.graph.val_mask == c.graph.val_mask;
        REQUIRE_FALSE(same_split);
    }
    SECTION("per-class split takes the configured number per class") {
        SplitSpec split;
        split.mode = SplitSpec::Mode::PerClassTrain;
        split.per_class_train = 1;
        split.val_size = 1;
        split.test_size = 1;
        const auto result = load_cora(dir.file("c.content"), dir.file("c.cites"), 0, split, 3);
        const Graph& g = result.graph;
        REQUIRE(mask_count(g.train_mask) == 2);
        int per_class[2] = {0, 0};
        for (int i = 0; i < g.num_nodes; ++i)
            if (g.train_mask[static_cast<std::size_t>(i)]) ++per_class[g.labels[static_cast<std::size_t>(i)]];
        REQUIRE(per_class[0] == 1);
        REQUIRE(per_class[1] == 1);
    }
    SECTION("missing files are reported") {
        REQUIRE_THROWS_WITH(load_cora(dir.file("nope.content"), dir.file("c.cites"), 0, tiny_split(), 1),
                            Catch::Matchers::ContainsSubstring("file not found"));
    }
    SECTION("malformed lines are reported with their line number") {
        write_file(dir.file("bad.content"), "paper_a\t1\t0\tml\npaper_b\t1\tml\n");
        REQUIRE_THROWS_WITH(load_cora(dir.file("bad.content"), dir.file("c.cites"), 0, tiny_split(), 1),
                            Catch::Matchers::ContainsSubstring(":2:"));
        write_file(dir.file("badfeat.content"), "paper_a\t1\tx\tml\n");
        REQUIRE_THROWS_WITH(load_cora(dir.file("badfeat.content"), dir.file("c.cites"), 0, tiny_split(), 1),
                            Catch::Matchers::ContainsSubstring("not a number"));
        write_file(dir.file("bad.cites"), "paper_a\tpaper_b\npaper_a\tghost\n");
        write_file(dir.file("two.content"), kContent);
        REQUIRE_THROWS_WITH(load_cora(dir.file("two.content"), dir.file("bad.cites"), 0, tiny_split(), 1),
                            Catch::Matchers::ContainsSubstring("unknown node id"));
    }
}

TEST_CASE("generate_synthetic") {
    SECTION("degenerate SBM with p_in=1, p_out=0 gives per-class cliques") {
        const Graph g = generate_synthetic(8, 2, 1.0, 0.0, 2, 1.0, 5);
        REQUIRE(g.num_nodes == 8);
        // Blocks of four: every intra-class pair present, nothing across.
        REQUIRE(g.edges.size() == 2 * 6);
        for (const auto& [u, v] : g.edges)
            REQUIRE(g.labels[static_cast<std::size_t>(u)] == g.labels[static_cast<std::size_t>(v)]);
    }
    SECTION("signal=0 features carry no class information") {
        const Graph g = generate_synthetic(3000, 3, 0.01, 0.01, 3, 0.0, 11);
        double mean[3][3] = {};
        int count[3] = {};
        for (int i = 0; i < g.num_nodes; ++i) {
            const int c = g.labels[static_cast<std::size_t>(i)];
            ++count[c];
            for (int f = 0; f < 3; ++f)
                mean[c][f] += g.features(static_cast<std::size_t>(i), static_cast<std::size_t>(f));
        }
        for (int c = 0; c < 3; ++c)
            for (int f = 0; f < 3; ++f)
                REQUIRE(std::fabs(mean[c][f] / count[c]) < 0.15);  // ~4.7 sigma for N=1000
    }
    SECTION("deterministic by seed with 60/20/20 masks") {
        const Graph a = generate_synthetic(50, 2, 0.3, 0.05, 4, 1.0, 3);
        const Graph b = generate_synthetic(50, 2, 0.3, 0.05, 4, 1.0, 3);
        REQUIRE(a.edges == b.edges);
        REQUIRE(a.features.raw() == b.features.raw());
        REQUIRE(a.train_mask == b.train_mask);
        REQUIRE(mask_count(a.train_mask) == 30);
        REQUIRE(mask_count(a.val_mask) == 10);
        REQUIRE(mask_count(a.test_mask) == 10);
    }
    SECTION("input validation") {
        REQUIRE_THROWS_AS(generate_synthetic(10, 2, 0.1, 0.5, 4, 1.0, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(generate_synthetic(10, 2, 1.5, 0.1, 4, 1.0, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(generate_synthetic(10, 4, 0.5, 0.1, 2, 1.0, 0), std::invalid_argument);
        REQUIRE_THROWS_AS(generate_synthetic(2, 4, 0.5, 0.1, 4, 1.0, 0), std::invalid_argument);
    }
}

TEST_CASE("export_graph round-trips through the loader") {
    TempDir dir;
    const Graph g = generate_synthetic(40, 3, 0.4, 0.05, 5, 0.75, 21);
    export_graph(g, dir.file("synth.content"), dir.file("synth.cites"));

    SplitSpec split;
    split.train_size = 24;
    split.val_size = 8;
    split.test_size = 8;
    const auto result = load_cora(dir.file("synth.content"), dir.file("synth.cites"), 0, split, 1);
    const Graph& back = result.graph;
    REQUIRE(back.num_nodes == g.num_nodes);
    REQUIRE(back.num_classes == g.num_classes);
    REQUIRE(back.labels == g.labels);
    REQUIRE(back.edges == g.edges);
    REQUIRE(back.features.rows() == g.features.rows());
    REQUIRE(back.features.cols() == g.features.cols());
    // %.17g text round-trips doubles exactly
    REQUIRE(back.features.raw() == g.features.raw());
}
