#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkan/models.hpp"

namespace gkan {

/// Model checkpoints: a short text header (the configuration, plus the spline
/// domain of every KAN layer since grid updates can move it) followed by the
/// raw little-endian 64-bit floats of every parameter group in declaration
/// order. Round trips are bit-exact.
inline constexpr const char* kCheckpointMagic = "GKANCKPT";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void write_doubles_le(std::ostream& out, const double* data, std::size_t count) {
    static_assert(sizeof(double) == 8);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &data[i], 8);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
            out.write(bytes, 8);
        }
    }
}

inline void read_doubles_le(std::istream& in, double* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            char bytes[8];
            in.read(bytes, 8);
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
            std::memcpy(&data[i], &bits, 8);
        }
    }
    if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void save_checkpoint(Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const ModelConfig& cfg = model.config;
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "arch " << architecture_name(cfg.architecture) << '\n';
    out << "d_input " << cfg.d_input << '\n';
    out << "hidden " << cfg.hidden << '\n';
    out << "num_classes " << cfg.num_classes << '\n';
    out << "num_layers " << cfg.num_layers << '\n';
    if (cfg.spline) {
        out << "spline " << cfg.spline->g << ' ' << cfg.spline->k << '\n';
        for (std::size_t l = 0; l < model.kan.size(); ++l)
            out << "grid " << l << ' ' << detail::format_double(model.kan[l].grid.domain_min) << ' '
                << detail::format_double(model.kan[l].grid.domain_max) << '\n';
    }
    out << "seed " << cfg.seed << '\n';
    out << "dropout " << detail::format_double(cfg.dropout) << '\n';
    out << "params " << allocated_parameter_count(model) << '\n';
    out << "DATA\n";
    for (const auto& group : param_groups(model))
        detail::write_doubles_le(out, group.data, group.size);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: empty file");
    {
        std::istringstream head(line);
        std::string magic;
        int version = 0;
        head >> magic >> version;
        if (magic != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
        if (version != kCheckpointVersion)
            throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    ModelConfig cfg;
    long long declared_params = -1;
    std::vector<std::pair<std::size_t, std::pair<double, double>>> grid_domains;
    bool saw_data = false;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string key;
        fields >> key;
        if (key == "DATA") {
            saw_data = true;
            break;
        } else if (key == "arch") {
            std::string name;
            fields >> name;
            cfg.architecture = architecture_from_name(name);
        } else if (key == "d_input") {
            fields >> cfg.d_input;
        } else if (key == "hidden") {
            fields >> cfg.hidden;
        } else if (key == "num_classes") {
            fields >> cfg.num_classes;
        } else if (key == "num_layers") {
            fields >> cfg.num_layers;
        } else if (key == "spline") {
            SplineSpec s;
            fields >> s.g >> s.k;
            cfg.spline = s;
        } else if (key == "grid") {
            std::size_t l = 0;
            double lo = 0.0, hi = 0.0;
            fields >> l >> lo >> hi;
            grid_domains.push_back({l, {lo, hi}});
        } else if (key == "seed") {
            fields >> cfg.seed;
        } else if (key == "dropout") {
            fields >> cfg.dropout;
        } else if (key == "params") {
            fields >> declared_params;
        } else {
            throw std::runtime_error("checkpoint: unknown header field '" + key + "'");
        }
        if (fields.fail()) throw std::runtime_error("checkpoint: bad value for field '" + key + "'");
    }
    if (!saw_data) throw std::runtime_error("checkpoint: missing DATA section");

    Model model = build_model(cfg);
    for (const auto& [l, domain] : grid_domains) {
        if (l >= model.kan.size()) throw std::runtime_error("checkpoint: grid layer index out of range");
        auto& layer = model.kan[l];
        layer.grid = build_grid(domain.first, domain.second, layer.grid.intervals, layer.grid.degree);
    }
    if (declared_params != allocated_parameter_count(model))
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& group : param_groups(model))
        detail::read_doubles_le(in, group.data, group.size);
    return model;
}

} // namespace gkan
