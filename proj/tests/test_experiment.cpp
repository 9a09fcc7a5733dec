#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gkan/experiment.hpp"

using namespace gkan;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("gkan_exp_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

int run_cli(const std::string& args, const std::string& output_file = "") {
    std::string command = std::string(GKAN_CLI_PATH) + " " + args;
    if (!output_file.empty()) command += " > " + output_file + " 2>&1";
    else command += " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kTinySpec =
    "# tiny synthetic experiment\n"
    "dataset = synthetic\n"
    "nodes = 60\n"
    "classes = 3\n"
    "p_in = 0.25\n"
    "p_out = 0.02\n"
    "feature_dim = 5\n"
    "signal = 1.0\n"
    "architecture = gkan2\n"
    "hidden = 6\n"
    "grid_size = 3\n"
    "degree = 1\n"
    "epochs = 15\n"
    "seed = 4\n"
    "repeats = 2\n";

} // namespace

TEST_CASE("parse_spec_text") {
    SECTION("reads every section with comments and defaults") {
        const auto spec = parse_spec_text(kTinySpec);
        REQUIRE(spec.dataset.kind == DatasetSpec::Kind::Synthetic);
        REQUIRE(spec.dataset.nodes == 60);
        REQUIRE(spec.model.architecture == Architecture::GKAN2);
        REQUIRE(spec.model.hidden == 6);
        REQUIRE(spec.model.spline.has_value());
        REQUIRE(spec.model.spline->g == 3);
        REQUIRE(spec.model.spline->k == 1);
        REQUIRE(spec.train.epochs == 15);
        REQUIRE(spec.train.optimizer == OptimizerKind::Adam);
        REQUIRE(spec.train.learning_rate == 0.01);
        REQUIRE(spec.train.weight_decay == 5e-4);
        REQUIRE(spec.seed == 4);
        REQUIRE(spec.repeats == 2);
    }
    SECTION("gcn specs drop the spline settings") {
        const auto spec = parse_spec_text("architecture = gcn\nhidden = 12\n");
        REQUIRE(spec.model.architecture == Architecture::GCN);
        REQUIRE_FALSE(spec.model.spline.has_value());
    }
    SECTION("grid update epochs parse as a comma list") {
        const auto spec = parse_spec_text("grid_update_epochs = 10, 25, 50\n");
        REQUIRE(spec.train.grid_update_epochs == std::vector<int>{10, 25, 50});
    }
    SECTION("unknown keys are rejected") {
        REQUIRE_THROWS_AS(parse_spec_text("learnin_rate = 0.1\n"), SpecError);
    }
    SECTION("bad values are rejected") {
        REQUIRE_THROWS_AS(parse_spec_text("epochs = soon\n"), SpecError);
        REQUIRE_THROWS_AS(parse_spec_text("p_in = high\n"), SpecError);
        REQUIRE_THROWS_AS(parse_spec_text("this is not a spec\n"), SpecError);
        REQUIRE_THROWS_AS(parse_spec_text("dataset = imagenet\n"), SpecError);
    }
}

TEST_CASE("run_experiment writes one csv and manifest per repeat plus a summary") {
    TempDir dir;
    auto spec = parse_spec_text(kTinySpec);
    spec.output_dir = dir.file("out");
    const auto result = run_experiment(spec, /*write_artifacts=*/true);

    REQUIRE(result.runs.size() == 2);
    REQUIRE(fs::exists(dir.file("out/run_seed4.csv")));
    REQUIRE(fs::exists(dir.file("out/run_seed5.csv")));
    REQUIRE(fs::exists(dir.file("out/run_seed4.manifest.txt")));
    REQUIRE(fs::exists(dir.file("out/run_seed5.manifest.txt")));
    REQUIRE(fs::exists(dir.file("out/summary.txt")));

    int csv_count = 0;
    for (const auto& entry : fs::directory_iterator(dir.file("out")))
        if (entry.path().extension() == ".csv") ++csv_count;
    REQUIRE(csv_count == 2);

    SECTION("summary statistics recompute from the per-run csvs") {
        std::vector<double> finals;
        for (const std::string name : {"out/run_seed4.csv", "out/run_seed5.csv"}) {
            std::ifstream in(dir.file(name));
            std::string line, last;
            std::getline(in, line);  // header
            while (std::getline(in, line))
                if (!line.empty()) last = line;
            // columns: epoch,train_loss,test_loss,train_acc,test_acc,val_acc,wall_s
            std::istringstream row(last);
            std::string field;
            for (int i = 0; i < 5; ++i) std::getline(row, field, ',');
            finals.push_back(std::stod(field));
        }
        const double mean = (finals[0] + finals[1]) / 2.0;
        REQUIRE(result.mean_test_acc == Catch::Approx(mean).margin(1e-12));

        const std::string summary = read_file(dir.file("out/summary.txt"));
        char expect[64];
        std::snprintf(expect, sizeof(expect), "test_acc_mean = %.6f", result.mean_test_acc);
        REQUIRE(summary.find(expect) != std::string::npos);
        REQUIRE(summary.find("param_count = " + std::to_string(result.param_count)) != std::string::npos);
    }
}

TEST_CASE("run_sweep emits per-value artifacts and an overlay summary") {
    TempDir dir;
    auto base = parse_spec_text(kTinySpec);
    base.repeats = 1;
    base.train.epochs = 12;
    base.output_dir = dir.file("sweep");
    const auto result = run_sweep("g", {3, 7}, base);

    REQUIRE(result.points.size() == 2);
    REQUIRE(fs::exists(dir.file("sweep/g3/run_seed4.csv")));
    REQUIRE(fs::exists(dir.file("sweep/g7/run_seed4.csv")));
    REQUIRE(fs::exists(dir.file("sweep/sweep_g_summary.csv")));
    REQUIRE((result.best_value_by_val == 3 || result.best_value_by_val == 7));

    // Hidden width and degree stay at the sweep defaults.
    REQUIRE(result.points[0].param_count !=
            result.points[1].param_count);  // g changes the count

    SECTION("per-run csv epochs are monotone") {
        std::ifstream in(dir.file("sweep/g3/run_seed4.csv"));
        std::string line;
        std::getline(in, line);
        int prev = 0;
        while (std::getline(in, line)) {
            const int epoch = std::stoi(line.substr(0, line.find(',')));
            REQUIRE(epoch > prev);
            prev = epoch;
        }
        REQUIRE(prev == 12);
    }
    SECTION("axis must be g, k, or h") {
        REQUIRE_THROWS_AS(run_sweep("q", {1}, base), std::invalid_argument);
    }
    SECTION("spline axes need a GKAN architecture") {
        auto gcn_base = base;
        gcn_base.model.architecture = Architecture::GCN;
        gcn_base.model.spline.reset();
        REQUIRE_THROWS_AS(run_sweep("g", {3, 7}, gcn_base), std::invalid_argument);
        REQUIRE_THROWS_AS(run_sweep("k", {1, 2}, gcn_base), std::invalid_argument);
    }
}

TEST_CASE("normalize_feature_rows scales rows to unit L1 norm") {
    Graph g = generate_synthetic(12, 2, 0.3, 0.1, 4, 1.0, 2);
    g.features(0, 0) = 0.0;
    g.features(0, 1) = 0.0;
    g.features(0, 2) = 0.0;
    g.features(0, 3) = 0.0;  // zero row stays untouched
    normalize_feature_rows(g);
    for (std::size_t c = 0; c < 4; ++c) REQUIRE(g.features(0, c) == 0.0);
    for (std::size_t r = 1; r < g.features.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 4; ++c) sum += std::fabs(g.features(r, c));
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("run_table reproduces the reference parameter columns") {
    // A synthetic 7-class corpus in the citation format is enough to check
    // the table plumbing: parameter counts depend only on layer dimensions.
    TempDir dir;
    const Graph fixture = generate_synthetic(1600, 7, 0.02, 0.001, 250, 2.0, 40);
    export_graph(fixture, dir.file("cora.content"), dir.file("cora.cites"));

    TrainConfig quick;
    quick.epochs = 2;

    const auto report1 = run_table(1, dir.file("cora.content"), dir.file("cora.cites"), quick, 1, 2);
    REQUIRE(report1.rows.size() == 5);
    const std::vector<long long> want1{22147, 22279, 22279, 22279, 22279};
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(report1.rows[i].measured_params == want1[i]);
        REQUIRE(report1.rows[i].measured_params == report1.rows[i].row.expected_params);
    }

    const auto report2 = run_table(2, dir.file("cora.content"), dir.file("cora.cites"), quick, 1, 1);
    const std::vector<long long> want2{21639, 21138, 21138, 20727, 20727};
    for (std::size_t i = 0; i < 5; ++i)
        REQUIRE(report2.rows[i].measured_params == want2[i]);

    std::ostringstream text;
    write_table_report(report1, text);
    REQUIRE(text.str().find("paper-reported") != std::string::npos);
    REQUIRE(text.str().find("61.76") != std::string::npos);  // reference column
    REQUIRE(text.str().find("WARNING") == std::string::npos);

    REQUIRE_THROWS_AS(reference_table(3), std::invalid_argument);
}

TEST_CASE("gradcheck command") {
    const auto gkan2 = run_gradcheck(Architecture::GKAN2, 1, 3, 4);
    REQUIRE(gkan2.report.pass);
    REQUIRE(gkan2.report.max_rel_error < 1e-4);

    const auto gcn = run_gradcheck(Architecture::GCN, 0, 0, 4);
    REQUIRE(gcn.report.pass);
    REQUIRE(gcn.report.max_rel_error < 1e-5);

    // Degree-0 splines: piecewise-constant edges contribute no input gradient.
    const auto degree0 = run_gradcheck(Architecture::GKAN2, 0, 3, 4);
    REQUIRE(degree0.spline_input_gradient_max == 0.0);
    REQUIRE(degree0.report.pass);
}

TEST_CASE("cli contract") {
    TempDir dir;
    SECTION("train runs a spec file and writes artifacts") {
        std::string spec_text = kTinySpec;
        spec_text += "output_dir = " + dir.file("cli_out") + "\n";
        write_file(dir.file("spec.txt"), spec_text);
        const int code = run_cli("train --config " + dir.file("spec.txt"), dir.file("log.txt"));
        CAPTURE(read_file(dir.file("log.txt")));
        REQUIRE(code == 0);
        REQUIRE(fs::exists(dir.file("cli_out/run_seed4.csv")));
        REQUIRE(fs::exists(dir.file("cli_out/summary.txt")));
    }
    SECTION("malformed spec exits with code 2 and writes nothing") {
        write_file(dir.file("bad.txt"), "architecture = resnet\noutput_dir = " + dir.file("bad_out") + "\n");
        const int code = run_cli("train --config " + dir.file("bad.txt"));
        REQUIRE(code == 2);
        REQUIRE_FALSE(fs::exists(dir.file("bad_out")));
    }
    SECTION("missing spec file exits with code 2") {
        REQUIRE(run_cli("train --config " + dir.file("missing.txt")) == 2);
    }
    SECTION("synth writes a loadable dataset") {
        const int code = run_cli("synth --nodes 30 --classes 2 --dim 4 --seed 5 --out " + dir.file("synth"));
        REQUIRE(code == 0);
        REQUIRE(fs::exists(dir.file("synth/synthetic.content")));
        REQUIRE(fs::exists(dir.file("synth/synthetic.cites")));
        SplitSpec split;
        split.train_size = 18;
        split.val_size = 6;
        split.test_size = 6;
        const auto loaded = load_cora(dir.file("synth/synthetic.content"),
                                      dir.file("synth/synthetic.cites"), 0, split, 1);
        REQUIRE(loaded.graph.num_nodes == 30);
        REQUIRE(loaded.graph.num_classes == 2);
    }
    SECTION("gradcheck reports the degree-0 spline gradient") {
        const int code = run_cli("gradcheck --architecture gkan2 --k 0 --g 3 --hidden 4",
                                 dir.file("gc.txt"));
        REQUIRE(code == 0);
        const std::string output = read_file(dir.file("gc.txt"));
        REQUIRE(output.find("PASS") != std::string::npos);
        REQUIRE(output.find("identically 0") != std::string::npos);
    }
    SECTION("table command refuses to run without the dataset") {
        const int code = run_cli("table --id 1 --data " + dir.file("nonexistent"));
        REQUIRE(code == 2);
    }
}
