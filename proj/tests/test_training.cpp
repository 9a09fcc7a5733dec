#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gkan/dataset.hpp"
#include "gkan/models.hpp"
#include "gkan/training.hpp"

using namespace gkan;

namespace {

ModelConfig config_for(Architecture arch, const Graph& g, int hidden, std::uint64_t seed,
                       int grid = 3, int degree = 1) {
    ModelConfig cfg;
    cfg.architecture = arch;
    cfg.d_input = g.feature_dim();
    cfg.hidden = hidden;
    cfg.num_classes = g.num_classes;
    cfg.seed = seed;
    if (arch != Architecture::GCN) cfg.spline = SplineSpec{grid, degree};
    return cfg;
}

} // namespace

TEST_CASE("Adam matches the hand-computed one-parameter step") {
    double param = 0.0;
    double grad = 1.0;
    std::vector<ParamGroupRef> params{{"p", &param, 1, false}};
    std::vector<ParamGroupRef> grads{{"p", &grad, 1, false}};
    Optimizer opt(OptimizerKind::Adam, 0.1, 0.0);
    opt.step(params, grads);
    // Bias-corrected first step moves by lr / (1 + eps): just under 0.1.
    REQUIRE(param < 0.0);
    REQUIRE(std::fabs(param + 0.1) < 1e-6);
    REQUIRE(param > -0.1);
}

TEST_CASE("SGD applies the plain update, with decay only on flagged groups") {
    double weight = 1.0;
    double bias = 1.0;
    double zero_grad = 0.0;
    std::vector<ParamGroupRef> params{{"w", &weight, 1, true}, {"b", &bias, 1, false}};
    std::vector<ParamGroupRef> grads{{"w", &zero_grad, 1, true}, {"b", &zero_grad, 1, false}};
    Optimizer opt(OptimizerKind::SGD, 1.0, 0.1);
    opt.step(params, grads);
    REQUIRE(weight == Catch::Approx(0.9).margin(1e-15));  // pure decay
    REQUIRE(bias == 1.0);                                 // biases are not decayed
}

TEST_CASE("training is deterministic given the seed") {
    const Graph g = generate_synthetic(60, 3, 0.2, 0.05, 5, 1.0, 9);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 30;
    tc.seed = 5;

    for (Architecture arch : {Architecture::GCN, Architecture::GKAN2}) {
        Model m1 = build_model(config_for(arch, g, 8, 5));
        Model m2 = build_model(config_for(arch, g, 8, 5));
        const TrainRecord r1 = train(m1, g, adj, tc);
        const TrainRecord r2 = train(m2, g, adj, tc);
        REQUIRE(r1.epochs.size() == r2.epochs.size());
        for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
            REQUIRE(r1.epochs[e].train_loss == r2.epochs[e].train_loss);
            REQUIRE(r1.epochs[e].test_acc == r2.epochs[e].test_acc);
        }
        // Parameter trajectories end bit-identical as well.
        auto p1 = param_groups(m1);
        auto p2 = param_groups(m2);
        for (std::size_t i = 0; i < p1.size(); ++i)
            for (std::size_t j = 0; j < p1[i].size; ++j)
                REQUIRE(p1[i].data[j] == p2[i].data[j]);
    }
}

TEST_CASE("csv export is reproducible apart from wall time") {
    const Graph g = generate_synthetic(40, 2, 0.3, 0.05, 4, 1.0, 2);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 12;
    tc.record_every = 3;
    tc.seed = 1;

    const auto dir = std::filesystem::temp_directory_path() / "gkan_csv_test";
    std::filesystem::create_directories(dir);
    const auto path1 = (dir / "a.csv").string();
    const auto path2 = (dir / "b.csv").string();

    Model m1 = build_model(config_for(Architecture::GKAN1, g, 6, 3));
    Model m2 = build_model(config_for(Architecture::GKAN1, g, 6, 3));
    const TrainRecord r1 = train(m1, g, adj, tc);
    const TrainRecord r2 = train(m2, g, adj, tc);
    write_csv(r1, path1);
    write_csv(r2, path2);

    REQUIRE(r1.epochs.size() == 4);  // epochs 3, 6, 9, 12
    std::ifstream in(path1);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "epoch,train_loss,test_loss,train_acc,test_acc,val_acc,wall_s");
    REQUIRE(csv_without_wall_column(path1) == csv_without_wall_column(path2));
    std::filesystem::remove_all(dir);
}

TEST_CASE("uninformative data trains to chance level") {
    // No feature signal and p_in == p_out: nothing to learn from.
    const Graph g = generate_synthetic(600, 3, 0.05, 0.05, 8, 0.0, 7);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 120;
    tc.seed = 7;
    Model model = build_model(config_for(Architecture::GCN, g, 16, 7));
    const TrainRecord record = train(model, g, adj, tc);
    REQUIRE_FALSE(record.diverged);
    REQUIRE(std::fabs(record.final_test_acc - 1.0 / 3.0) < 0.1);
}

TEST_CASE("informative synthetic data is learned by both model families") {
    const Graph g = generate_synthetic(300, 3, 0.1, 0.01, 8, 1.0, 7);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 200;
    tc.seed = 7;
    for (Architecture arch : {Architecture::GCN, Architecture::GKAN2}) {
        Model model = build_model(config_for(arch, g, 16, 7));
        const TrainRecord record = train(model, g, adj, tc);
        REQUIRE_FALSE(record.diverged);
        REQUIRE(record.final_test_acc >= 0.95);
    }
}

TEST_CASE("every architecture can overfit a tiny graph") {
    const Graph g = generate_synthetic(20, 2, 0.3, 0.1, 4, 0.5, 3);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 500;
    tc.seed = 3;
    for (Architecture arch : {Architecture::GCN, Architecture::GKAN1, Architecture::GKAN2}) {
        Model model = build_model(config_for(arch, g, 16, 21));
        const TrainRecord record = train(model, g, adj, tc);
        REQUIRE_FALSE(record.diverged);
        REQUIRE(record.final_train_acc == 1.0);
    }
}

TEST_CASE("input dropout is seed-deterministic and stays trainable") {
    const Graph g = generate_synthetic(80, 2, 0.25, 0.05, 5, 1.0, 17);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 40;
    tc.seed = 17;
    ModelConfig cfg = config_for(Architecture::GKAN2, g, 8, 17);
    cfg.dropout = 0.5;
    Model m1 = build_model(cfg);
    Model m2 = build_model(cfg);
    const TrainRecord r1 = train(m1, g, adj, tc);
    const TrainRecord r2 = train(m2, g, adj, tc);
    REQUIRE_FALSE(r1.diverged);
    REQUIRE(r1.final_train_acc > 0.5);
    for (std::size_t e = 0; e < r1.epochs.size(); ++e)
        REQUIRE(r1.epochs[e].train_loss == r2.epochs[e].train_loss);

    // Evaluation passes never apply dropout.
    const Matrix a = forward(m1, adj, g.features);
    const Matrix b = forward(m1, adj, g.features);
    REQUIRE(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("non-finite losses abort with a diagnostic record") {
    const Graph g = generate_synthetic(30, 2, 0.3, 0.1, 4, 1.0, 4);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.optimizer = OptimizerKind::SGD;
    tc.learning_rate = 1e154;
    tc.weight_decay = 0.0;
    tc.epochs = 10;
    tc.seed = 4;
    Model model = build_model(config_for(Architecture::GCN, g, 8, 5));
    const TrainRecord record = train(model, g, adj, tc);
    REQUIRE(record.diverged);
    REQUIRE(record.diverged_epoch >= 1);
    REQUIRE(record.diverged_epoch <= 10);
}

TEST_CASE("scheduled grid updates keep training stable") {
    const Graph g = generate_synthetic(80, 2, 0.25, 0.05, 5, 1.0, 13);
    const auto adj = normalize_adjacency(g);
    TrainConfig tc;
    tc.epochs = 80;
    tc.seed = 13;
    tc.grid_update_epochs = {10, 25, 50};
    Model model = build_model(config_for(Architecture::GKAN2, g, 8, 13));
    const TrainRecord record = train(model, g, adj, tc);
    REQUIRE_FALSE(record.diverged);
    REQUIRE(record.final_train_acc > 0.6);
    // The grids moved away from the build-time default domain.
    bool moved = false;
    for (const auto& layer : model.kan)
        if (layer.grid.domain_min != -1.0 || layer.grid.domain_max != 1.0) moved = true;
    REQUIRE(moved);
}

TEST_CASE("grad_check validates all architectures on small instances") {
    const Graph g = generate_synthetic(8, 2, 0.9, 0.2, 6, 1.0, 42);
    SECTION("GCN at 1e-5") {
        const auto report = grad_check(config_for(Architecture::GCN, g, 4, 7), g, 1e-5);
        CAPTURE(report.max_rel_error);
        REQUIRE(report.pass);
    }
    SECTION("GKAN-2, k=1, g=3, h=4 at 1e-4") {
        const auto report = grad_check(config_for(Architecture::GKAN2, g, 4, 7, 3, 1), g, 1e-4);
        CAPTURE(report.max_rel_error);
        REQUIRE(report.pass);
    }
    SECTION("GKAN-1, k=3, g=7, h=3 at 1e-4") {
        const auto report = grad_check(config_for(Architecture::GKAN1, g, 3, 7, 7, 3), g, 1e-4);
        CAPTURE(report.max_rel_error);
        REQUIRE(report.pass);
    }
    SECTION("reports include every parameter group and the input") {
        const auto report = grad_check(config_for(Architecture::GKAN2, g, 4, 7, 3, 1), g, 1e-4);
        std::vector<std::string> names;
        for (const auto& group : report.groups) names.push_back(group.name);
        REQUIRE(std::find(names.begin(), names.end(), "layer0.coeffs") != names.end());
        REQUIRE(std::find(names.begin(), names.end(), "layer1.bias") != names.end());
        REQUIRE(std::find(names.begin(), names.end(), "input") != names.end());
    }
    SECTION("three-layer GKAN-2 at 1e-4") {
        ModelConfig cfg = config_for(Architecture::GKAN2, g, 4, 7, 5, 2);
        cfg.num_layers = 3;
        const auto report = grad_check(cfg, g, 1e-4);
        CAPTURE(report.max_rel_error);
        REQUIRE(report.pass);
    }
    SECTION("oversized instances are rejected") {
        const Graph big = generate_synthetic(100, 2, 0.1, 0.05, 4, 1.0, 1);
        REQUIRE_THROWS_AS(grad_check(config_for(Architecture::GCN, big, 4, 7), big, 1e-5),
                          std::invalid_argument);
    }
}
