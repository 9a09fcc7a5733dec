#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/kan_layer.hpp"
#include "gkan/matrix.hpp"
#include "gkan/rng.hpp"
#include "gkan/splines.hpp"

namespace gkan {

enum class Architecture { GCN, GKAN1, GKAN2 };

inline std::string architecture_name(Architecture a) {
    switch (a) {
        case Architecture::GCN: return "gcn";
        case Architecture::GKAN1: return "gkan1";
        case Architecture::GKAN2: return "gkan2";
    }
    return "?";
}

inline Architecture architecture_from_name(const std::string& name) {
    if (name == "gcn") return Architecture::GCN;
    if (name == "gkan1") return Architecture::GKAN1;
    if (name == "gkan2") return Architecture::GKAN2;
    throw std::invalid_argument("unknown architecture '" + name + "' (gcn | gkan1 | gkan2)");
}

struct SplineSpec {
    int g = 3;
    int k = 1;
};

/// Default spline domain for freshly built GKAN layers. Raw Cora features are
/// 0/1 and SiLU-dominated hidden activations start small, so [-1, 1] covers
/// the inputs; dynamic grid updates can recenter later.
inline constexpr double kDefaultSplineMin = -1.0;
inline constexpr double kDefaultSplineMax = 1.0;

struct ModelConfig {
    Architecture architecture = Architecture::GCN;
    int d_input = 0;
    int hidden = 16;
    int num_classes = 0;
    int num_layers = 2;
    std::optional<SplineSpec> spline;  // present iff architecture is a GKAN variant
    std::uint64_t seed = 0;
    double dropout = 0.0;  // applied to layer inputs during training when > 0
};

/// Layer widths [d_input, hidden, ..., hidden, num_classes].
inline std::vector<int> layer_dims(const ModelConfig& cfg) {
    std::vector<int> dims;
    dims.push_back(cfg.d_input);
    for (int l = 1; l < cfg.num_layers; ++l) dims.push_back(cfg.hidden);
    dims.push_back(cfg.num_classes);
    return dims;
}

inline void validate_config(const ModelConfig& cfg) {
    if (cfg.d_input < 1 || cfg.hidden < 1 || cfg.num_classes < 1)
        throw std::invalid_argument("model config: dimensions must be positive");
    if (cfg.num_layers < 1) throw std::invalid_argument("model config: num_layers must be >= 1");
    const bool is_kan = cfg.architecture != Architecture::GCN;
    if (is_kan != cfg.spline.has_value())
        throw std::invalid_argument("model config: spline settings required for GKAN variants only");
    if (cfg.spline && (cfg.spline->g < 1 || cfg.spline->k < 0))
        throw std::invalid_argument("model config: spline needs g >= 1, k >= 0");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw std::invalid_argument("model config: dropout must lie in [0, 1)");
}

struct DenseLayer {
    Matrix weight;             // n_in x n_out
    std::vector<double> bias;  // n_out
};

struct Model {
    ModelConfig config;
    std::vector<DenseLayer> dense;      // GCN layers
    std::vector<KanLayerParams> kan;    // GKAN layers

    bool is_kan() const { return config.architecture != Architecture::GCN; }
    std::size_t num_layers() const { return is_kan() ? kan.size() : dense.size(); }
};

inline Model build_model(const ModelConfig& cfg) {
    validate_config(cfg);
    Model model;
    model.config = cfg;
    const auto dims = layer_dims(cfg);
    if (cfg.architecture == Architecture::GCN) {
        Rng rng(cfg.seed);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            DenseLayer layer;
            const int n_in = dims[l];
            const int n_out = dims[l + 1];
            layer.weight = Matrix(static_cast<std::size_t>(n_in), static_cast<std::size_t>(n_out));
            const double xavier = std::sqrt(6.0 / (static_cast<double>(n_in) + n_out));
            for (std::size_t i = 0; i < layer.weight.size(); ++i)
                layer.weight.data()[i] = rng.uniform(-xavier, xavier);
            layer.bias.assign(static_cast<std::size_t>(n_out), 0.0);
            model.dense.push_back(std::move(layer));
        }
    } else {
        const SplineGrid grid = build_grid(kDefaultSplineMin, kDefaultSplineMax, cfg.spline->g, cfg.spline->k);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l)
            model.kan.push_back(init_kan_layer(dims[l], dims[l + 1], grid,
                                               cfg.seed + 0x9e3779b97f4a7c15ULL * (l + 1)));
    }
    return model;
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix z(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const double* in = logits.row(r);
        double* out = z.row(r);
        double mx = in[0];
        for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            out[c] = std::exp(in[c] - mx);
            sum += out[c];
        }
        const double inv = 1.0 / sum;
        for (std::size_t c = 0; c < logits.cols(); ++c) out[c] *= inv;
    }
    return z;
}

/// Intermediates retained by forward() for the matching backward().
/// layer_inputs[l] is what layer l's trainable transform consumed:
/// GCN / GKAN2: the layer input H (GCN multiplies by W after aggregating,
/// so it also keeps the aggregated pre-activations); GKAN1: A_hat * H.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;
    std::vector<Matrix> preactivations;  // GCN only: S_l before ReLU/softmax
    std::vector<Matrix> dropout_masks;   // empty unless dropout was active
    Matrix probs;
};

namespace detail {

inline Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.data()[i] < 0.0) out.data()[i] = 0.0;
    return out;
}

inline void apply_dropout(Matrix& h, double rate, Rng& rng, std::vector<Matrix>* masks) {
    Matrix mask(h.rows(), h.cols());
    const double keep = 1.0 - rate;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double m = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
        mask.data()[i] = m;
        h.data()[i] *= m;
    }
    if (masks) masks->push_back(std::move(mask));
}

} // namespace detail

/// Full-batch forward pass. Returns row-stochastic class probabilities.
///   GCN:    Z = softmax(A_hat ReLU(A_hat X W0 + b0) W1 + b1)
///   GKAN-1: H <- KanLayer(A_hat H),  Z = softmax(H_L)
///   GKAN-2: H <- A_hat KanLayer(H),  Z = softmax(H_L)
/// Dropout (if configured) is applied to layer inputs only when `training`.
inline Matrix forward(const Model& model, const NormalizedAdjacency& adj, const Matrix& x,
                      ForwardCache* cache = nullptr, bool training = false,
                      Rng* dropout_rng = nullptr) {
    check_shapes(x.cols() == static_cast<std::size_t>(model.config.d_input), "forward feature width");
    check_shapes(x.rows() == static_cast<std::size_t>(adj.num_nodes), "forward node count");
    const bool use_dropout = training && model.config.dropout > 0.0 && dropout_rng != nullptr;
    const std::size_t num_layers = model.num_layers();

    Matrix h = x;
    Matrix logits;
    for (std::size_t l = 0; l < num_layers; ++l) {
        if (use_dropout)
            detail::apply_dropout(h, model.config.dropout, *dropout_rng, cache ? &cache->dropout_masks : nullptr);
        const bool last = (l + 1 == num_layers);
        switch (model.config.architecture) {
            case Architecture::GCN: {
                if (cache) cache->layer_inputs.push_back(h);
                Matrix s = spmm(adj, matmul(h, model.dense[l].weight));
                add_row_vector(s, model.dense[l].bias);
                if (cache) cache->preactivations.push_back(s);
                h = last ? std::move(s) : detail::relu(s);
                break;
            }
            case Architecture::GKAN1: {
                Matrix aggregated = spmm(adj, h);
                if (cache) cache->layer_inputs.push_back(aggregated);
                h = kan_forward(model.kan[l], aggregated);
                break;
            }
            case Architecture::GKAN2: {
                if (cache) cache->layer_inputs.push_back(h);
                h = spmm(adj, kan_forward(model.kan[l], h));
                break;
            }
        }
        if (last) logits = std::move(h);
    }
    Matrix z = softmax_rows(logits);
    if (cache) cache->probs = z;
    return z;
}

/// Mean of -ln Z[i, labels[i]] over masked nodes; probabilities are floored
/// at 1e-12 before the log.
inline double masked_cross_entropy(const Matrix& z, const std::vector<int>& labels,
                                   const std::vector<std::uint8_t>& mask) {
    check_shapes(z.rows() == labels.size() && z.rows() == mask.size(), "masked_cross_entropy sizes");
    double total = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        if (!mask[i]) continue;
        const double p = std::max(z(i, static_cast<std::size_t>(labels[i])), 1e-12);
        total -= std::log(p);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("masked_cross_entropy: empty mask");
    return total / count;
}

/// Fraction of masked nodes whose argmax row (ties broken toward the lowest
/// class index) matches the label.
inline double accuracy(const Matrix& z, const std::vector<int>& labels,
                       const std::vector<std::uint8_t>& mask) {
    check_shapes(z.rows() == labels.size() && z.rows() == mask.size(), "accuracy sizes");
    int correct = 0;
    int count = 0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        if (!mask[i]) continue;
        const double* row = z.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < z.cols(); ++c)
            if (row[c] > row[best]) best = c;
        correct += (static_cast<int>(best) == labels[i]);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("accuracy: empty mask");
    return static_cast<double>(correct) / count;
}

struct ModelGrads {
    std::vector<DenseLayer> dense;     // same shapes as the model's dense layers
    std::vector<KanLayerGrads> kan;    // same shapes as the model's KAN layers
    Matrix input;                      // gradient with respect to X
};

/// Analytic gradients of masked_cross_entropy(forward(...)) for every
/// trainable scalar. Uses the softmax-with-cross-entropy simplification at
/// the output; the cache must come from a forward() over the same parameters.
inline ModelGrads backward(const Model& model, const NormalizedAdjacency& adj, const ForwardCache& cache,
                           const std::vector<int>& labels, const std::vector<std::uint8_t>& mask) {
    const std::size_t num_layers = model.num_layers();
    if (cache.layer_inputs.size() != num_layers || cache.probs.rows() != labels.size())
        throw std::invalid_argument("backward: cache does not match model/labels");

    int count = 0;
    for (auto m : mask) count += (m != 0);
    if (count == 0) throw std::invalid_argument("backward: empty mask");

    // dL/dlogits = (Z - onehot) / |mask| on masked rows, 0 elsewhere.
    Matrix grad(cache.probs.rows(), cache.probs.cols());
    for (std::size_t i = 0; i < grad.rows(); ++i) {
        if (!mask[i]) continue;
        const double inv = 1.0 / count;
        for (std::size_t c = 0; c < grad.cols(); ++c)
            grad(i, c) = (cache.probs(i, c) - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) * inv;
    }

    ModelGrads grads;
    const bool had_dropout = !cache.dropout_masks.empty();
    if (model.is_kan()) grads.kan.resize(num_layers);
    else grads.dense.resize(num_layers);

    for (std::size_t li = num_layers; li > 0; --li) {
        const std::size_t l = li - 1;
        switch (model.config.architecture) {
            case Architecture::GCN: {
                // S_l = A_hat (H_l W_l) + b_l; grad arrives as dL/dS_l.
                DenseLayer& dg = grads.dense[l];
                dg.bias = column_sums(grad);
                Matrix back = spmm(adj, grad);  // A_hat is symmetric
                dg.weight = matmul_transpose_a(cache.layer_inputs[l], back);
                grad = matmul_transpose_b(back, model.dense[l].weight);
                if (l > 0) {
                    const Matrix& s_prev = cache.preactivations[l - 1];
                    for (std::size_t i = 0; i < grad.size(); ++i)
                        if (s_prev.data()[i] <= 0.0) grad.data()[i] = 0.0;
                }
                break;
            }
            case Architecture::GKAN1: {
                auto [layer_grads, grad_in] = kan_backward(model.kan[l], cache.layer_inputs[l], grad);
                grads.kan[l] = std::move(layer_grads);
                grad = spmm(adj, grad_in);
                break;
            }
            case Architecture::GKAN2: {
                Matrix grad_kan_out = spmm(adj, grad);
                auto [layer_grads, grad_in] =
                    kan_backward(model.kan[l], cache.layer_inputs[l], grad_kan_out);
                grads.kan[l] = std::move(layer_grads);
                grad = std::move(grad_in);
                break;
            }
        }
        if (had_dropout) {
            const Matrix& mask_l = cache.dropout_masks[l];
            for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] *= mask_l.data()[i];
        }
    }
    grads.input = std::move(grad);
    return grads;
}

/// Trainable parameter count from the configuration alone.
///   GCN:  sum_l (n_l * n_{l+1} + n_{l+1})
///   GKAN: sum_l (n_l * n_{l+1} * (g + k + 2) + n_{l+1})
inline long long count_parameters(const ModelConfig& cfg) {
    validate_config(cfg);
    const auto dims = layer_dims(cfg);
    long long total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (cfg.architecture == Architecture::GCN)
            total += static_cast<long long>(dims[l]) * dims[l + 1] + dims[l + 1];
        else
            total += kan_param_count(dims[l], dims[l + 1], cfg.spline->g, cfg.spline->k);
    }
    return total;
}

/// A named view over one trainable tensor, used by the optimizer, the
/// checkpoint writer and the gradient checker. Groups appear in a fixed
/// declaration order.
struct ParamGroupRef {
    std::string name;
    double* data;
    std::size_t size;
    bool weight_decay;  // biases are excluded from decay
};

inline std::vector<ParamGroupRef> param_groups(Model& model) {
    std::vector<ParamGroupRef> groups;
    if (model.is_kan()) {
        for (std::size_t l = 0; l < model.kan.size(); ++l) {
            auto& layer = model.kan[l];
            const std::string prefix = "layer" + std::to_string(l) + ".";
            groups.push_back({prefix + "coeffs", layer.coeffs.data(), layer.coeffs.size(), true});
            groups.push_back({prefix + "w_b", layer.w_b.data(), layer.w_b.size(), true});
            groups.push_back({prefix + "w_s", layer.w_s.data(), layer.w_s.size(), true});
            groups.push_back({prefix + "bias", layer.bias.data(), layer.bias.size(), false});
        }
    } else {
        for (std::size_t l = 0; l < model.dense.size(); ++l) {
            auto& layer = model.dense[l];
            const std::string prefix = "layer" + std::to_string(l) + ".";
            groups.push_back({prefix + "W", layer.weight.data(), layer.weight.size(), true});
            groups.push_back({prefix + "b", layer.bias.data(), layer.bias.size(), false});
        }
    }
    return groups;
}

inline std::vector<ParamGroupRef> grad_groups(ModelGrads& grads, const Model& model) {
    std::vector<ParamGroupRef> groups;
    if (model.is_kan()) {
        for (std::size_t l = 0; l < grads.kan.size(); ++l) {
            auto& layer = grads.kan[l];
            const std::string prefix = "layer" + std::to_string(l) + ".";
            groups.push_back({prefix + "coeffs", layer.coeffs.data(), layer.coeffs.size(), true});
            groups.push_back({prefix + "w_b", layer.w_b.data(), layer.w_b.size(), true});
            groups.push_back({prefix + "w_s", layer.w_s.data(), layer.w_s.size(), true});
            groups.push_back({prefix + "bias", layer.bias.data(), layer.bias.size(), false});
        }
    } else {
        for (std::size_t l = 0; l < grads.dense.size(); ++l) {
            auto& layer = grads.dense[l];
            const std::string prefix = "layer" + std::to_string(l) + ".";
            groups.push_back({prefix + "W", layer.weight.data(), layer.weight.size(), true});
            groups.push_back({prefix + "b", layer.bias.data(), layer.bias.size(), false});
        }
    }
    return groups;
}

inline long long allocated_parameter_count(Model& model) {
    long long total = 0;
    for (const auto& g : param_groups(model)) total += static_cast<long long>(g.size);
    return total;
}

} // namespace gkan
