#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkan/dataset.hpp"
#include "gkan/models.hpp"
#include "gkan/training.hpp"

namespace gkan {

/// Raised for unusable experiment spec files; the CLI maps it to exit code 2.
class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetSpec {
    enum class Kind { Cora, Synthetic };
    Kind kind = Kind::Synthetic;
    // cora
    std::string content_path = "data/cora/cora.content";
    std::string cites_path = "data/cora/cora.cites";
    int num_features = 0;  // 0 = all feature columns
    SplitSpec split;
    bool row_normalize = false;
    // synthetic
    int nodes = 300;
    int classes = 3;
    double p_in = 0.1;
    double p_out = 0.01;
    int feature_dim = 8;
    double signal = 1.0;
};

struct ExperimentSpec {
    DatasetSpec dataset;
    ModelConfig model;  // d_input / num_classes are filled from the dataset
    TrainConfig train;
    int repeats = 1;
    std::uint64_t seed = 0;  // run r uses seed + r
    std::string output_dir = "runs/experiment";
};

/// Scales each feature row to unit L1 norm (rows summing to zero are kept).
inline void normalize_feature_rows(Graph& g) {
    for (std::size_t r = 0; r < g.features.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < g.features.cols(); ++c) sum += std::fabs(g.features(r, c));
        if (sum <= 0.0) continue;
        for (std::size_t c = 0; c < g.features.cols(); ++c) g.features(r, c) /= sum;
    }
}

/// Materializes the dataset for one run. Cora keeps the file contents and
/// redraws masks with the run seed; synthetic regenerates the instance.
inline Graph load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.kind == DatasetSpec::Kind::Cora) {
        auto result = load_cora(spec.content_path, spec.cites_path, spec.num_features, spec.split, seed);
        if (spec.row_normalize) normalize_feature_rows(result.graph);
        return std::move(result.graph);
    }
    return generate_synthetic(spec.nodes, spec.classes, spec.p_in, spec.p_out, spec.feature_dim,
                              spec.signal, seed);
}

// ---------------------------------------------------------------------------
// Spec files: flat "key = value" lines, '#' comments. Unknown keys are errors
// so typos do not silently fall back to defaults.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline long long spec_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw SpecError("spec: key '" + key + "' needs an integer, got '" + value + "'");
    }
}

inline double spec_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw SpecError("spec: key '" + key + "' needs a number, got '" + value + "'");
    }
}

} // namespace detail

inline ExperimentSpec parse_spec_text(const std::string& text) {
    ExperimentSpec spec;
    spec.model.architecture = Architecture::GKAN2;
    int grid_size = 3;
    int degree = 1;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw SpecError("spec line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = detail::trim(trimmed.substr(eq + 1));
        if (key.empty() || value.empty())
            throw SpecError("spec line " + std::to_string(line_no) + ": empty key or value");

        if (key == "dataset") {
            if (value == "cora") spec.dataset.kind = DatasetSpec::Kind::Cora;
            else if (value == "synthetic") spec.dataset.kind = DatasetSpec::Kind::Synthetic;
            else throw SpecError("spec: dataset must be cora or synthetic, got '" + value + "'");
        } else if (key == "cora_content") {
            spec.dataset.content_path = value;
        } else if (key == "cora_cites") {
            spec.dataset.cites_path = value;
        } else if (key == "features") {
            spec.dataset.num_features = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "row_normalize") {
            spec.dataset.row_normalize = (value == "true" || value == "1");
        } else if (key == "split") {
            if (value == "random") spec.dataset.split.mode = SplitSpec::Mode::RandomCounts;
            else if (value == "per_class") spec.dataset.split.mode = SplitSpec::Mode::PerClassTrain;
            else throw SpecError("spec: split must be random or per_class, got '" + value + "'");
        } else if (key == "train_size") {
            spec.dataset.split.train_size = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "val_size") {
            spec.dataset.split.val_size = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "test_size") {
            spec.dataset.split.test_size = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "per_class_train") {
            spec.dataset.split.per_class_train = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "nodes") {
            spec.dataset.nodes = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "classes") {
            spec.dataset.classes = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "p_in") {
            spec.dataset.p_in = detail::spec_real(key, value);
        } else if (key == "p_out") {
            spec.dataset.p_out = detail::spec_real(key, value);
        } else if (key == "feature_dim") {
            spec.dataset.feature_dim = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "signal") {
            spec.dataset.signal = detail::spec_real(key, value);
        } else if (key == "architecture") {
            spec.model.architecture = architecture_from_name(value);
        } else if (key == "hidden") {
            spec.model.hidden = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "layers") {
            spec.model.num_layers = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "grid_size") {
            grid_size = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "degree") {
            degree = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "dropout") {
            spec.model.dropout = detail::spec_real(key, value);
        } else if (key == "optimizer") {
            if (value == "adam") spec.train.optimizer = OptimizerKind::Adam;
            else if (value == "sgd") spec.train.optimizer = OptimizerKind::SGD;
            else throw SpecError("spec: optimizer must be adam or sgd, got '" + value + "'");
        } else if (key == "learning_rate") {
            spec.train.learning_rate = detail::spec_real(key, value);
        } else if (key == "weight_decay") {
            spec.train.weight_decay = detail::spec_real(key, value);
        } else if (key == "epochs") {
            spec.train.epochs = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "record_every") {
            spec.train.record_every = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "grid_update_epochs") {
            spec.train.grid_update_epochs.clear();
            std::istringstream list(value);
            std::string item;
            while (std::getline(list, item, ','))
                spec.train.grid_update_epochs.push_back(
                    static_cast<int>(detail::spec_int(key, detail::trim(item))));
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(detail::spec_int(key, value));
        } else if (key == "repeats") {
            spec.repeats = static_cast<int>(detail::spec_int(key, value));
        } else if (key == "output_dir") {
            spec.output_dir = value;
        } else {
            throw SpecError("spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }

    if (spec.repeats < 1) throw SpecError("spec: repeats must be >= 1");
    if (spec.model.architecture == Architecture::GCN) spec.model.spline.reset();
    else spec.model.spline = SplineSpec{grid_size, degree};
    return spec;
}

inline ExperimentSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open spec file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_spec_text(buffer.str());
}

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

struct RunResult {
    std::uint64_t seed = 0;
    TrainRecord record;
};

struct ExperimentResult {
    long long param_count = 0;
    std::vector<RunResult> runs;
    double mean_test_acc = 0.0;
    double std_test_acc = 0.0;
    double mean_test_acc_at_best_val = 0.0;
    double mean_best_val_acc = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

} // namespace detail

/// Runs `repeats` seeded runs of one experiment. When write_artifacts is set,
/// emits run_seed<seed>.csv and run_seed<seed>.manifest.txt per run plus one
/// summary.txt under spec.output_dir.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, bool write_artifacts = true,
                                       std::ostream* log = nullptr) {
    ExperimentResult result;
    if (write_artifacts) std::filesystem::create_directories(spec.output_dir);

    std::vector<double> final_accs;
    std::vector<double> best_val_test_accs;
    std::vector<double> best_val_accs;
    for (int r = 0; r < spec.repeats; ++r) {
        const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(r);
        Graph graph = load_dataset(spec.dataset, seed);
        const NormalizedAdjacency adj = normalize_adjacency(graph);

        ModelConfig mc = spec.model;
        mc.d_input = graph.feature_dim();
        mc.num_classes = graph.num_classes;
        mc.seed = seed;
        Model model = build_model(mc);

        TrainConfig tc = spec.train;
        tc.seed = seed;
        RunResult run;
        run.seed = seed;
        run.record = train(model, graph, adj, tc);
        result.param_count = run.record.param_count;

        if (write_artifacts) {
            const auto base = std::filesystem::path(spec.output_dir) / ("run_seed" + std::to_string(seed));
            write_csv(run.record, base.string() + ".csv");
            write_manifest(run.record, mc, base.string() + ".manifest.txt");
        }
        if (log)
            *log << "  seed " << seed << ": test_acc=" << run.record.final_test_acc
                 << " (best-val test_acc=" << run.record.test_acc_at_best_val << ")"
                 << (run.record.diverged ? " DIVERGED" : "") << "\n";
        final_accs.push_back(run.record.final_test_acc);
        best_val_test_accs.push_back(run.record.test_acc_at_best_val);
        best_val_accs.push_back(run.record.best_val_acc);
        result.runs.push_back(std::move(run));
    }

    const auto [mean, stdev] = detail::mean_and_sample_std(final_accs);
    result.mean_test_acc = mean;
    result.std_test_acc = stdev;
    result.mean_test_acc_at_best_val = detail::mean_and_sample_std(best_val_test_accs).first;
    result.mean_best_val_acc = detail::mean_and_sample_std(best_val_accs).first;

    if (write_artifacts) {
        std::ofstream summary(std::filesystem::path(spec.output_dir) / "summary.txt");
        summary << "architecture = " << architecture_name(spec.model.architecture) << "\n";
        summary << "param_count = " << result.param_count << "\n";
        summary << "repeats = " << spec.repeats << "\n";
        summary << "base_seed = " << spec.seed << "\n";
        char buf[128];
        std::snprintf(buf, sizeof(buf), "test_acc_mean = %.6f\n", result.mean_test_acc);
        summary << buf;
        std::snprintf(buf, sizeof(buf), "test_acc_std = %.6f\n", result.std_test_acc);
        summary << buf;
        std::snprintf(buf, sizeof(buf), "test_acc_at_best_val_mean = %.6f\n",
                      result.mean_test_acc_at_best_val);
        summary << buf;
        for (const auto& run : result.runs) {
            std::snprintf(buf, sizeof(buf), "run_seed%llu_test_acc = %.6f\n",
                          static_cast<unsigned long long>(run.seed), run.record.final_test_acc);
            summary << buf;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Paper-reported reference tables (for side-by-side display only; the
// reference accuracies are never used as training targets).
// ---------------------------------------------------------------------------

struct TableRow {
    std::string label;
    Architecture architecture;
    int hidden;
    int g;  // ignored for GCN
    int k;
    long long expected_params;
    double reference_accuracy;  // percent
};

struct TableSpec {
    int id;
    int num_features;
    std::vector<TableRow> rows;
};

inline TableSpec reference_table(int table_id) {
    if (table_id == 1) {
        return {1,
                100,
                {{"GCN (h_gcn=205)", Architecture::GCN, 205, 0, 0, 22147, 53.50},
                 {"GKAN-1 (k=1, g=10, h=16)", Architecture::GKAN1, 16, 10, 1, 22279, 59.32},
                 {"GKAN-2 (k=1, g=10, h=16)", Architecture::GKAN2, 16, 10, 1, 22279, 61.48},
                 {"GKAN-1 (k=2, g=9, h=16)", Architecture::GKAN1, 16, 9, 2, 22279, 56.76},
                 {"GKAN-2 (k=2, g=9, h=16)", Architecture::GKAN2, 16, 9, 2, 22279, 61.76}}};
    }
    if (table_id == 2) {
        return {2,
                200,
                {{"GCN (h_gcn=104)", Architecture::GCN, 104, 0, 0, 21639, 61.24},
                 {"GKAN-1 (k=2, g=2, h=17)", Architecture::GKAN1, 17, 2, 2, 21138, 63.58},
                 {"GKAN-2 (k=2, g=2, h=17)", Architecture::GKAN2, 17, 2, 2, 21138, 64.10},
                 {"GKAN-1 (k=1, g=2, h=20)", Architecture::GKAN1, 20, 2, 1, 20727, 67.44},
                 {"GKAN-2 (k=1, g=2, h=20)", Architecture::GKAN2, 20, 2, 1, 20727, 67.66}}};
    }
    throw std::invalid_argument("table id must be 1 or 2");
}

inline ModelConfig table_row_model_config(const TableRow& row) {
    ModelConfig mc;
    mc.architecture = row.architecture;
    mc.hidden = row.hidden;
    if (row.architecture != Architecture::GCN) mc.spline = SplineSpec{row.g, row.k};
    return mc;
}

struct TableRowResult {
    TableRow row;
    long long measured_params = 0;
    double mean_test_acc = 0.0;  // percent
    double std_test_acc = 0.0;
};

struct TableReport {
    TableSpec spec;
    std::vector<TableRowResult> rows;
};

/// Runs every row of a reference table with matched parameter budgets and
/// `repeats` seeds starting at 0. Rows run as independent jobs (at most
/// `jobs` in flight); output order is fixed regardless of scheduling.
inline TableReport run_table(int table_id, const std::string& content_path, const std::string& cites_path,
                             const TrainConfig& train_base, int repeats, int jobs,
                             std::ostream* log = nullptr) {
    const TableSpec table = reference_table(table_id);
    TableReport report;
    report.spec = table;
    report.rows.resize(table.rows.size());

    auto run_row = [&](std::size_t idx) {
        const TableRow& row = table.rows[idx];
        ExperimentSpec spec;
        spec.dataset.kind = DatasetSpec::Kind::Cora;
        spec.dataset.content_path = content_path;
        spec.dataset.cites_path = cites_path;
        spec.dataset.num_features = table.num_features;
        spec.model = table_row_model_config(row);
        spec.train = train_base;
        spec.repeats = repeats;
        spec.seed = 0;
        const ExperimentResult result = run_experiment(spec, /*write_artifacts=*/false);
        TableRowResult out;
        out.row = row;
        out.measured_params = result.param_count;
        out.mean_test_acc = 100.0 * result.mean_test_acc;
        out.std_test_acc = 100.0 * result.std_test_acc;
        report.rows[idx] = std::move(out);
    };

    if (jobs <= 1) {
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            if (log) *log << "table " << table_id << " row " << (i + 1) << "/" << table.rows.size()
                          << ": " << table.rows[i].label << "\n";
            run_row(i);
        }
    } else {
        std::vector<std::future<void>> inflight;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            if (static_cast<int>(inflight.size()) >= jobs) {
                inflight.front().get();
                inflight.erase(inflight.begin());
            }
            inflight.push_back(std::async(std::launch::async, run_row, i));
        }
        for (auto& f : inflight) f.get();
    }
    return report;
}

inline void write_table_report(const TableReport& report, std::ostream& out) {
    out << "Cora, first " << report.spec.num_features << " features; "
        << "test accuracy over seeded repeats (mean +/- std), paper-reported numbers beside.\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-28s %12s %22s %16s\n", "Architecture", "#Parameters",
                  "Test-accuracy (%)", "paper-reported");
    out << buf;
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-28s %12lld %14.2f +/- %4.2f %16.2f\n", row.row.label.c_str(),
                      row.measured_params, row.mean_test_acc, row.std_test_acc,
                      row.row.reference_accuracy);
        out << buf;
        if (row.measured_params != row.row.expected_params) {
            std::snprintf(buf, sizeof(buf), "  WARNING: parameter count %lld != expected %lld\n",
                          row.measured_params, row.row.expected_params);
            out << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// Hyperparameter sweeps over g, k, h (defaults g=3, k=1, h=16)
// ---------------------------------------------------------------------------

struct SweepPoint {
    int value = 0;
    long long param_count = 0;
    double final_test_acc = 0.0;
    double best_val_acc = 0.0;
    double test_acc_at_best_val = 0.0;
    std::string csv_path;
};

struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    int best_value_by_val = 0;
};

inline constexpr int kSweepDefaultG = 3;
inline constexpr int kSweepDefaultK = 1;
inline constexpr int kSweepDefaultH = 16;

/// Varies one of g / k / h while holding the other two at the defaults,
/// emitting one CSV per value plus an overlay summary.
inline SweepResult run_sweep(const std::string& axis, const std::vector<int>& values,
                             const ExperimentSpec& base, std::ostream* log = nullptr) {
    if (axis != "g" && axis != "k" && axis != "h")
        throw std::invalid_argument("sweep axis must be one of g, k, h");
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    if (base.model.architecture == Architecture::GCN && axis != "h")
        throw std::invalid_argument("sweep axis " + axis + " needs a GKAN architecture");

    SweepResult result;
    result.axis = axis;
    std::filesystem::create_directories(base.output_dir);

    double best_val = -1.0;
    for (int value : values) {
        ExperimentSpec spec = base;
        spec.model.architecture = base.model.architecture;
        int g = kSweepDefaultG;
        int k = kSweepDefaultK;
        int h = kSweepDefaultH;
        if (axis == "g") g = value;
        if (axis == "k") k = value;
        if (axis == "h") h = value;
        spec.model.hidden = h;
        if (spec.model.architecture != Architecture::GCN) spec.model.spline = SplineSpec{g, k};
        spec.output_dir = (std::filesystem::path(base.output_dir) / (axis + std::to_string(value))).string();

        if (log) *log << "sweep " << axis << " = " << value << "\n";
        const ExperimentResult run = run_experiment(spec, /*write_artifacts=*/true, log);

        SweepPoint point;
        point.value = value;
        point.param_count = run.param_count;
        point.final_test_acc = run.mean_test_acc;
        point.best_val_acc = run.mean_best_val_acc;
        point.test_acc_at_best_val = run.mean_test_acc_at_best_val;
        point.csv_path =
            (std::filesystem::path(spec.output_dir) / ("run_seed" + std::to_string(spec.seed) + ".csv"))
                .string();
        if (point.best_val_acc > best_val) {
            best_val = point.best_val_acc;
            result.best_value_by_val = value;
        }
        result.points.push_back(std::move(point));
    }

    std::ofstream overlay(std::filesystem::path(base.output_dir) / ("sweep_" + axis + "_summary.csv"));
    overlay << axis << ",param_count,final_test_acc,best_val_acc,test_acc_at_best_val\n";
    char buf[160];
    for (const auto& p : result.points) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f,%.6f\n", p.value, p.param_count,
                      p.final_test_acc, p.best_val_acc, p.test_acc_at_best_val);
        overlay << buf;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient-check command
// ---------------------------------------------------------------------------

/// The seeded 8-node instance used by the gradcheck command.
inline Graph gradcheck_instance(int feature_dim) {
    Graph g = generate_synthetic(8, 2, 0.9, 0.2, feature_dim, 1.0, 42);
    return g;
}

struct GradCheckCommandResult {
    GradCheckReport report;
    double tolerance = 0.0;
    // Max magnitude of the first layer's spline input-gradient contribution;
    // identically 0 for degree-0 splines.
    double spline_input_gradient_max = 0.0;
};

inline GradCheckCommandResult run_gradcheck(Architecture arch, int k, int g, int h) {
    ModelConfig config;
    config.architecture = arch;
    config.hidden = h;
    if (arch != Architecture::GCN) config.spline = SplineSpec{g, k};
    const Graph graph = gradcheck_instance(6);
    config.d_input = graph.feature_dim();
    config.num_classes = graph.num_classes;
    config.seed = 7;
    const double tolerance = (arch == Architecture::GCN) ? 1e-5 : 1e-4;
    GradCheckCommandResult result;
    result.tolerance = tolerance;
    result.report = grad_check(config, graph, tolerance);
    if (arch != Architecture::GCN) {
        Model model = build_model(config);
        const NormalizedAdjacency adj = normalize_adjacency(graph);
        ForwardCache cache;
        forward(model, adj, graph.features, &cache);
        result.spline_input_gradient_max =
            spline_input_derivative_max(model.kan[0], cache.layer_inputs[0]);
    }
    return result;
}

} // namespace gkan
