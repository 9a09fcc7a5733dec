// Command-line front end: dataset preparation, single experiments,
// reference-table reproduction, hyperparameter sweeps, and gradient checks.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gkan/gkan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitBadSpec = 2;

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> values;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stoi(item));
    }
    return values;
}

int run_train(const std::string& config_path, std::int64_t seed_override, const std::string& out_override,
              int features_override, int repeats_override) {
    gkan::ExperimentSpec spec;
    try {
        spec = gkan::parse_spec_file(config_path);
        if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
        if (!out_override.empty()) spec.output_dir = out_override;
        if (features_override >= 0) spec.dataset.num_features = features_override;
        if (repeats_override >= 1) spec.repeats = repeats_override;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadSpec;
    }
    try {
        std::cout << "running " << spec.repeats << " repeat(s), architecture "
                  << gkan::architecture_name(spec.model.architecture) << ", output " << spec.output_dir
                  << "\n";
        const auto result = gkan::run_experiment(spec, /*write_artifacts=*/true, &std::cout);
        std::cout << "param_count " << result.param_count << "\n";
        std::cout << "test accuracy mean " << 100.0 * result.mean_test_acc << "% +/- "
                  << 100.0 * result.std_test_acc << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_table_cmd(int table_id, const std::string& data_dir, const std::string& out_path, int repeats,
                  int epochs, int jobs) {
    const auto content = std::filesystem::path(data_dir) / "cora.content";
    const auto cites = std::filesystem::path(data_dir) / "cora.cites";
    if (!std::filesystem::exists(content) || !std::filesystem::exists(cites)) {
        std::cerr << "error: dataset not found under " << data_dir
                  << " (need cora.content and cora.cites)\n";
        return kExitBadSpec;
    }
    try {
        gkan::TrainConfig train;
        train.epochs = epochs;
        const auto report = gkan::run_table(table_id, content.string(), cites.string(), train, repeats,
                                            jobs, &std::cout);
        std::ostringstream text;
        gkan::write_table_report(report, text);
        std::cout << text.str();
        if (!out_path.empty()) {
            std::filesystem::create_directories(std::filesystem::path(out_path).parent_path());
            std::ofstream out(out_path);
            out << text.str();
            std::cout << "report written to " << out_path << "\n";
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_sweep_cmd(const std::string& axis, const std::string& values_csv, const std::string& config_path,
                  std::int64_t seed_override, const std::string& out_override) {
    gkan::ExperimentSpec base;
    try {
        // An empty spec gives the documented defaults (GKAN-2, g=3, k=1, h=16).
        base = config_path.empty() ? gkan::parse_spec_text("") : gkan::parse_spec_file(config_path);
        if (seed_override >= 0) base.seed = static_cast<std::uint64_t>(seed_override);
        if (!out_override.empty()) base.output_dir = out_override;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadSpec;
    }
    try {
        const auto values = parse_int_list(values_csv);
        const auto result = gkan::run_sweep(axis, values, base, &std::cout);
        std::cout << "sweep over " << axis << " done; best value by validation accuracy: "
                  << result.best_value_by_val << "\n";
        for (const auto& p : result.points)
            std::cout << "  " << axis << "=" << p.value << ": params " << p.param_count
                      << ", final test acc " << 100.0 * p.final_test_acc << "%, best val acc "
                      << 100.0 * p.best_val_acc << "%\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_gradcheck_cmd(const std::string& arch_name, int k, int g, int hidden) {
    try {
        const auto arch = gkan::architecture_from_name(arch_name);
        const auto result = gkan::run_gradcheck(arch, k, g, hidden);
        for (const auto& group : result.report.groups)
            std::cout << "  " << group.name << ": max rel. error " << group.max_rel_error << "\n";
        if (arch != gkan::Architecture::GCN)
            std::cout << "  spline input gradient: max |w_s * dspline/dx| = "
                      << result.spline_input_gradient_max
                      << (k == 0 ? " (identically 0 for degree-0 splines)" : "") << "\n";
        std::cout << (result.report.pass ? "PASS" : "FAIL") << " (max " << result.report.max_rel_error
                  << ", tolerance " << result.tolerance << ")\n";
        return result.report.pass ? kExitOk : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_synth_cmd(int nodes, int classes, double p_in, double p_out, int dim, double signal,
                  std::int64_t seed, const std::string& out_dir) {
    try {
        const auto graph = gkan::generate_synthetic(nodes, classes, p_in, p_out, dim, signal,
                                                    seed < 0 ? 0 : static_cast<std::uint64_t>(seed));
        std::filesystem::create_directories(out_dir);
        const auto content = std::filesystem::path(out_dir) / "synthetic.content";
        const auto cites = std::filesystem::path(out_dir) / "synthetic.cites";
        gkan::export_graph(graph, content.string(), cites.string());
        std::cout << "wrote " << content.string() << " (" << graph.num_nodes << " nodes) and "
                  << cites.string() << " (" << graph.edges.size() << " edges)\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadSpec;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph Kolmogorov-Arnold Networks: training, reference tables, sweeps"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Run a seeded experiment from a spec file");
    std::string train_config;
    std::int64_t train_seed = -1;
    std::string train_out;
    int train_features = -1;
    int train_repeats = 0;
    train->add_option("--config", train_config, "experiment spec file")->required();
    train->add_option("--seed", train_seed, "override base seed");
    train->add_option("--out", train_out, "override output directory");
    train->add_option("--features", train_features, "override feature count (0 = all)");
    train->add_option("--repeats", train_repeats, "override repeat count");

    // table
    auto* table = app.add_subcommand("table", "Reproduce a reference comparison table");
    int table_id = 1;
    std::string table_data = "data/cora";
    std::string table_out;
    int table_repeats = 5;
    int table_epochs = 300;
    int table_jobs = 1;
    table->add_option("--id", table_id, "table id (1 or 2)")->required();
    table->add_option("--data", table_data, "directory with cora.content / cora.cites");
    table->add_option("--out", table_out, "report output path");
    table->add_option("--repeats", table_repeats, "seeded repeats per row (seeds 0..n-1)");
    table->add_option("--epochs", table_epochs, "training epochs per run");
    table->add_option("--jobs", table_jobs, "parallel row jobs");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Sweep one hyperparameter axis (g, k, or h)");
    std::string sweep_axis;
    std::string sweep_values;
    std::string sweep_config;
    std::int64_t sweep_seed = -1;
    std::string sweep_out;
    sweep->add_option("--axis", sweep_axis, "axis: g, k, or h")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--config", sweep_config, "base experiment spec file");
    sweep->add_option("--seed", sweep_seed, "override base seed");
    sweep->add_option("--out", sweep_out, "override output directory");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    std::string gc_arch = "gkan2";
    int gc_k = 1;
    int gc_g = 3;
    int gc_hidden = 4;
    gradcheck->add_option("--architecture", gc_arch, "gcn | gkan1 | gkan2");
    gradcheck->add_option("--k", gc_k, "spline degree");
    gradcheck->add_option("--g", gc_g, "spline intervals");
    gradcheck->add_option("--hidden", gc_hidden, "hidden width");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset in content/cites format");
    int synth_nodes = 300;
    int synth_classes = 3;
    double synth_p_in = 0.1;
    double synth_p_out = 0.01;
    int synth_dim = 8;
    double synth_signal = 1.0;
    std::int64_t synth_seed = 7;
    std::string synth_out = "data/synthetic";
    synth->add_option("--nodes", synth_nodes, "node count");
    synth->add_option("--classes", synth_classes, "class count");
    synth->add_option("--p-in", synth_p_in, "intra-class edge probability");
    synth->add_option("--p-out", synth_p_out, "inter-class edge probability");
    synth->add_option("--dim", synth_dim, "feature dimension");
    synth->add_option("--signal", synth_signal, "class signal strength");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (*train)
        return run_train(train_config, train_seed, train_out, train_features, train_repeats);
    if (*table)
        return run_table_cmd(table_id, table_data, table_out, table_repeats, table_epochs, table_jobs);
    if (*sweep)
        return run_sweep_cmd(sweep_axis, sweep_values, sweep_config, sweep_seed, sweep_out);
    if (*gradcheck)
        return run_gradcheck_cmd(gc_arch, gc_k, gc_g, gc_hidden);
    if (*synth)
        return run_synth_cmd(synth_nodes, synth_classes, synth_p_in, synth_p_out, synth_dim,
                             synth_signal, synth_seed, synth_out);
    return kExitBadSpec;
}
