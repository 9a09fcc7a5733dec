#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkan/dataset.hpp"
#include "gkan/graph.hpp"
#include "gkan/models.hpp"

namespace gkan {

enum class OptimizerKind { Adam, SGD };

inline std::string optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "sgd";
}

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;  // on weights/coeffs only, never biases
    int epochs = 300;
    std::uint64_t seed = 0;
    std::vector<int> grid_update_epochs;  // empty: dynamic grid updates off
    int record_every = 1;
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (cfg.weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
    if (cfg.record_every < 1) throw std::invalid_argument("train config: record_every must be >= 1");
}

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8), or plain
/// SGD. Weight decay is added to the gradient before the moment updates for
/// groups flagged for decay.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, double weight_decay)
        : kind_(kind), lr_(learning_rate), weight_decay_(weight_decay) {}

    void step(std::vector<ParamGroupRef>& params, const std::vector<ParamGroupRef>& grads) {
        if (m_.empty()) {
            std::size_t total = 0;
            for (const auto& g : params) total += g.size;
            m_.assign(total, 0.0);
            v_.assign(total, 0.0);
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        std::size_t offset = 0;
        for (std::size_t gi = 0; gi < params.size(); ++gi) {
            double* p = params[gi].data;
            const double* g = grads[gi].data;
            const bool decay = params[gi].weight_decay && weight_decay_ > 0.0;
            for (std::size_t i = 0; i < params[gi].size; ++i) {
                double grad = g[i];
                if (decay) grad += weight_decay_ * p[i];
                if (kind_ == OptimizerKind::SGD) {
                    p[i] -= lr_ * grad;
                    continue;
                }
                double& m = m_[offset + i];
                double& v = v_[offset + i];
                m = kBeta1 * m + (1.0 - kBeta1) * grad;
                v = kBeta2 * v + (1.0 - kBeta2) * grad * grad;
                p[i] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + kEpsilon);
            }
            offset += params[gi].size;
        }
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

private:
    OptimizerKind kind_;
    double lr_;
    double weight_decay_;
    std::vector<double> m_, v_;
    long long t_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double val_acc = 0.0;
    double wall_s = 0.0;  // cumulative; the one physically non-deterministic column
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
    double final_test_acc = 0.0;
    double final_train_loss = 0.0;
    double best_val_acc = 0.0;
    int best_val_epoch = 0;
    double test_acc_at_best_val = 0.0;
    double wall_seconds = 0.0;
    bool diverged = false;
    int diverged_epoch = -1;
    std::uint64_t seed = 0;
    long long param_count = 0;
    TrainConfig config;
};

/// Full-batch training. Metrics are recorded from the forward pass of each
/// epoch (before that epoch's update). Deterministic given (model, data,
/// config): the only random element is dropout, which draws from a stream
/// seeded by config.seed.
inline TrainRecord train(Model& model, const Graph& graph, const NormalizedAdjacency& adj,
                         const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (mask_count(graph.train_mask) == 0) throw std::invalid_argument("train: empty train mask");
    if (mask_count(graph.val_mask) == 0) throw std::invalid_argument("train: empty val mask");
    if (mask_count(graph.test_mask) == 0) throw std::invalid_argument("train: empty test mask");

    const auto wall_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    };

    TrainRecord record;
    record.config = cfg;
    record.seed = cfg.seed;
    record.param_count = allocated_parameter_count(model);
    record.best_val_acc = -1.0;

    Optimizer optimizer(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
    Rng dropout_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (model.is_kan() && !cfg.grid_update_epochs.empty()) {
            for (int u : cfg.grid_update_epochs) {
                if (u != epoch) continue;
                ForwardCache probe;
                forward(model, adj, graph.features, &probe);
                for (std::size_t l = 0; l < model.kan.size(); ++l)
                    model.kan[l] = update_layer_grid(model.kan[l], probe.layer_inputs[l]);
                break;
            }
        }

        ForwardCache cache;
        forward(model, adj, graph.features, &cache, /*training=*/true, &dropout_rng);
        const double train_loss = masked_cross_entropy(cache.probs, graph.labels, graph.train_mask);
        const double test_loss = masked_cross_entropy(cache.probs, graph.labels, graph.test_mask);
        const double train_acc = accuracy(cache.probs, graph.labels, graph.train_mask);
        const double test_acc = accuracy(cache.probs, graph.labels, graph.test_mask);
        const double val_acc = accuracy(cache.probs, graph.labels, graph.val_mask);

        if (!std::isfinite(train_loss)) {
            record.diverged = true;
            record.diverged_epoch = epoch;
            break;
        }

        if (epoch % cfg.record_every == 0 || epoch == cfg.epochs)
            record.epochs.push_back({epoch, train_loss, test_loss, train_acc, test_acc, val_acc, elapsed()});
        if (val_acc > record.best_val_acc) {
            record.best_val_acc = val_acc;
            record.best_val_epoch = epoch;
            record.test_acc_at_best_val = test_acc;
        }
        record.final_train_loss = train_loss;
        record.final_train_acc = train_acc;
        record.final_val_acc = val_acc;
        record.final_test_acc = test_acc;

        ModelGrads grads = backward(model, adj, cache, graph.labels, graph.train_mask);
        bool finite = true;
        for (const auto& group : grad_groups(grads, model)) {
            for (std::size_t i = 0; i < group.size && finite; ++i)
                finite = std::isfinite(group.data[i]);
            if (!finite) break;
        }
        if (!finite) {
            record.diverged = true;
            record.diverged_epoch = epoch;
            break;
        }

        auto params = param_groups(model);
        auto grad_refs = grad_groups(grads, model);
        optimizer.step(params, grad_refs);
    }

    record.wall_seconds = elapsed();
    return record;
}

/// CSV export, one row per recorded epoch. All columns except wall_s are
/// deterministic for a fixed seed; comparisons that require byte-identical
/// output should strip wall_s (see csv_without_wall_column).
inline void write_csv(const TrainRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path);
    out << "epoch,train_loss,test_loss,train_acc,test_acc,val_acc,wall_s\n";
    char buf[256];
    for (const auto& e : record.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", e.epoch,
                      e.train_loss, e.test_loss, e.train_acc, e.test_acc, e.val_acc, e.wall_s);
        out << buf;
    }
}

/// The CSV text with the trailing wall_s column removed from every row;
/// byte-identical across reruns with the same seed.
inline std::string csv_without_wall_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read csv: " + path);
    std::string result;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.rfind(',');
        result.append(line, 0, pos);
        result.push_back('\n');
    }
    return result;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_digest(const ModelConfig& mc, const TrainConfig& tc) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s|%d|%d|%d|%d|%d|%d|%.17g|%s|%.17g|%.17g|%d|%d",
                  architecture_name(mc.architecture).c_str(), mc.d_input, mc.hidden, mc.num_classes,
                  mc.num_layers, mc.spline ? mc.spline->g : -1, mc.spline ? mc.spline->k : -1,
                  mc.dropout, optimizer_name(tc.optimizer).c_str(), tc.learning_rate,
                  tc.weight_decay, tc.epochs, tc.record_every);
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a(buf)));
    return hash;
}

inline void write_manifest(const TrainRecord& record, const ModelConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    char buf[256];
    out << "config_hash = " << config_digest(config, record.config) << '\n';
    out << "architecture = " << architecture_name(config.architecture) << '\n';
    out << "seed = " << record.seed << '\n';
    out << "param_count = " << record.param_count << '\n';
    out << "epochs_run = " << (record.diverged ? record.diverged_epoch : record.config.epochs) << '\n';
    out << "diverged = " << (record.diverged ? "true" : "false") << '\n';
    std::snprintf(buf, sizeof(buf), "final_train_loss = %.17g\n", record.final_train_loss);
    out << buf;
    std::snprintf(buf, sizeof(buf), "final_train_acc = %.17g\n", record.final_train_acc);
    out << buf;
    std::snprintf(buf, sizeof(buf), "final_val_acc = %.17g\n", record.final_val_acc);
    out << buf;
    std::snprintf(buf, sizeof(buf), "final_test_acc = %.17g\n", record.final_test_acc);
    out << buf;
    std::snprintf(buf, sizeof(buf), "best_val_acc = %.17g\n", record.best_val_acc);
    out << buf;
    out << "best_val_epoch = " << record.best_val_epoch << '\n';
    std::snprintf(buf, sizeof(buf), "test_acc_at_best_val = %.17g\n", record.test_acc_at_best_val);
    out << buf;
    std::snprintf(buf, sizeof(buf), "wall_seconds = %.3f\n", record.wall_seconds);
    out << buf;
}

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Compares the analytic gradient of the masked training loss against central
/// finite differences (step 1e-6) for every trainable scalar. Meant for small
/// instances; cost is two forwards per parameter.
inline GradCheckReport grad_check(const ModelConfig& config, const Graph& graph, double tolerance) {
    if (graph.num_nodes > 64)
        throw std::invalid_argument("grad_check: instance too large (keep N <= 64)");
    Model model = build_model(config);
    const NormalizedAdjacency adj = normalize_adjacency(graph);

    ForwardCache cache;
    forward(model, adj, graph.features, &cache);
    ModelGrads grads = backward(model, adj, cache, graph.labels, graph.train_mask);

    auto loss_now = [&] {
        const Matrix z = forward(model, adj, graph.features);
        return masked_cross_entropy(z, graph.labels, graph.train_mask);
    };

    // Step 1e-5 balances truncation against floating-point roundoff for a
    // loss-scale function; entries below the 1e-5 floor are compared absolutely.
    const double h = 1e-5;
    GradCheckReport report;
    report.tolerance = tolerance;
    auto params = param_groups(model);
    auto analytic = grad_groups(grads, model);
    auto check_scalar = [&](GradCheckGroup& group, double* value, double exact) {
        const double saved = *value;
        *value = saved + h;
        const double up = loss_now();
        *value = saved - h;
        const double down = loss_now();
        *value = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(numeric), std::fabs(exact), 1e-5});
        group.max_rel_error = std::max(group.max_rel_error, std::fabs(numeric - exact) / denom);
    };
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        GradCheckGroup group;
        group.name = params[gi].name;
        for (std::size_t i = 0; i < params[gi].size; ++i)
            check_scalar(group, &params[gi].data[i], analytic[gi].data[i]);
        report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
        report.groups.push_back(std::move(group));
    }
    {
        // Gradient with respect to the node features.
        Matrix features = graph.features;  // mutable copy for the probes
        auto loss_features = [&] {
            const Matrix z = forward(model, adj, features);
            return masked_cross_entropy(z, graph.labels, graph.train_mask);
        };
        GradCheckGroup group;
        group.name = "input";
        for (std::size_t i = 0; i < features.size(); ++i) {
            double& v = features.data()[i];
            const double saved = v;
            v = saved + h;
            const double up = loss_features();
            v = saved - h;
            const double down = loss_features();
            v = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double exact = grads.input.data()[i];
            const double denom = std::max({std::fabs(numeric), std::fabs(exact), 1e-5});
            group.max_rel_error = std::max(group.max_rel_error, std::fabs(numeric - exact) / denom);
        }
        report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
        report.groups.push_back(std::move(group));
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

} // namespace gkan
