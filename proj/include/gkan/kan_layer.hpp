#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gkan/matrix.hpp"
#include "gkan/rng.hpp"
#include "gkan/splines.hpp"

namespace gkan {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

/// One KAN layer: every (input, output) edge carries a learnable univariate
/// function
///     phi(x) = w_b * silu(x) + w_s * sum_m coeffs[m] * B_m(x)
/// and each output node sums its incoming edges plus a bias. All edges share
/// one non-trainable spline grid. Trainable scalar count is
/// n_in * n_out * (g + k + 2) + n_out.
struct KanLayerParams {
    int n_in = 0;
    int n_out = 0;
    SplineGrid grid;
    std::vector<double> coeffs;  // n_in * n_out * basis_count, index [i][j][m]
    Matrix w_b;                  // n_in x n_out
    Matrix w_s;                  // n_in x n_out
    std::vector<double> bias;    // n_out

    int basis_count() const { return grid.basis_count(); }
    std::size_t coeff_index(int i, int j, int m) const {
        return (static_cast<std::size_t>(i) * n_out + j) * basis_count() + m;
    }
};

/// Gradients with the same shapes as the trainable fields of KanLayerParams.
struct KanLayerGrads {
    std::vector<double> coeffs;
    Matrix w_b;
    Matrix w_s;
    std::vector<double> bias;
};

inline long long kan_param_count(int n_in, int n_out, int g, int k) {
    return static_cast<long long>(n_in) * n_out * (g + k + 2) + n_out;
}

/// Initializes a layer so it starts as (roughly) a scaled SiLU: w_s = 1
/// everywhere, spline coefficients are small uniform noise so spline(x) is
/// near zero, w_b follows the Xavier/Glorot rule, bias is zero.
/// Deterministic given the seed.
inline KanLayerParams init_kan_layer(int n_in, int n_out, const SplineGrid& grid, std::uint64_t seed) {
    if (n_in < 1 || n_out < 1)
        throw std::invalid_argument("init_kan_layer: dimensions must be positive");

    KanLayerParams p;
    p.n_in = n_in;
    p.n_out = n_out;
    p.grid = grid;
    const int m = grid.basis_count();
    p.coeffs.resize(static_cast<std::size_t>(n_in) * n_out * m);
    p.w_b = Matrix(static_cast<std::size_t>(n_in), static_cast<std::size_t>(n_out));
    p.w_s = Matrix(static_cast<std::size_t>(n_in), static_cast<std::size_t>(n_out), 1.0);
    p.bias.assign(static_cast<std::size_t>(n_out), 0.0);

    Rng rng(seed);
    // Basis functions are nonnegative and sum to at most 1, so bounding the
    // coefficients bounds the spline: |spline(x)| < coeff_scale everywhere.
    const double coeff_scale = 0.1 / std::sqrt(static_cast<double>(m));
    for (auto& c : p.coeffs) c = rng.uniform(-coeff_scale, coeff_scale);
    const double xavier = std::sqrt(6.0 / (static_cast<double>(n_in) + n_out));
    for (std::size_t i = 0; i < p.w_b.size(); ++i) p.w_b.data()[i] = rng.uniform(-xavier, xavier);
    return p;
}

/// Forward pass: out[r, j] = bias[j] + sum_i phi_{i,j}(X[r, i]).
/// The spline term sees the input clamped to the grid domain; the SiLU
/// residual sees the raw input and carries the extrapolation.
inline Matrix kan_forward(const KanLayerParams& p, const Matrix& x) {
    check_shapes(x.cols() == static_cast<std::size_t>(p.n_in), "kan_forward input width");
    const int k = p.grid.degree;
    const int m = p.basis_count();
    Matrix out(x.rows(), static_cast<std::size_t>(p.n_out));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double* out_r = out.row(r);
        for (int j = 0; j < p.n_out; ++j) out_r[j] = p.bias[static_cast<std::size_t>(j)];
        for (int i = 0; i < p.n_in; ++i) {
            const double xv = x(r, static_cast<std::size_t>(i));
            const double xc = clamp_to_domain(p.grid, xv);
            const int span = find_span(p.grid, xc);
            double nz[32];
            basis_nonzero(p.grid, xc, span, nz);
            const double base = silu(xv);
            const double* wb_i = p.w_b.row(static_cast<std::size_t>(i));
            const double* ws_i = p.w_s.row(static_cast<std::size_t>(i));
            const double* coeff_i = p.coeffs.data() + static_cast<std::size_t>(i) * p.n_out * m + (span - k);
            for (int j = 0; j < p.n_out; ++j) {
                const double* cj = coeff_i + static_cast<std::size_t>(j) * m;
                double spline = 0.0;
                for (int t = 0; t <= k; ++t) spline += cj[t] * nz[t];
                out_r[j] += wb_i[j] * base + ws_i[j] * spline;
            }
        }
    }
    return out;
}

/// Analytic gradients of sum(grad_out * kan_forward(p, x)) with respect to
/// every trainable field and to x. The spline term contributes no input
/// gradient where the input was clamped; the SiLU term always does.
inline std::pair<KanLayerGrads, Matrix> kan_backward(const KanLayerParams& p, const Matrix& x,
                                                     const Matrix& grad_out) {
    check_shapes(x.cols() == static_cast<std::size_t>(p.n_in), "kan_backward input width");
    check_shapes(grad_out.rows() == x.rows() && grad_out.cols() == static_cast<std::size_t>(p.n_out),
                 "kan_backward grad_out shape");

    const int k = p.grid.degree;
    const int m = p.basis_count();
    KanLayerGrads g;
    g.coeffs.assign(p.coeffs.size(), 0.0);
    g.w_b = Matrix(p.w_b.rows(), p.w_b.cols());
    g.w_s = Matrix(p.w_s.rows(), p.w_s.cols());
    g.bias = column_sums(grad_out);
    Matrix grad_x(x.rows(), x.cols());

    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* go_r = grad_out.row(r);
        for (int i = 0; i < p.n_in; ++i) {
            const double xv = x(r, static_cast<std::size_t>(i));
            const bool clamped = (xv < p.grid.domain_min) || (xv > p.grid.domain_max);
            const double xc = clamp_to_domain(p.grid, xv);
            const int span = find_span(p.grid, xc);
            double nz[32];
            double dnz[32];
            basis_nonzero(p.grid, xc, span, nz);
            basis_derivative_nonzero(p.grid, xc, span, dnz);
            const double base = silu(xv);
            const double dbase = silu_derivative(xv);
            const double* wb_i = p.w_b.row(static_cast<std::size_t>(i));
            const double* ws_i = p.w_s.row(static_cast<std::size_t>(i));
            double* gwb_i = g.w_b.row(static_cast<std::size_t>(i));
            double* gws_i = g.w_s.row(static_cast<std::size_t>(i));
            const std::size_t coeff_base = static_cast<std::size_t>(i) * p.n_out * m + (span - k);
            double gx = 0.0;
            for (int j = 0; j < p.n_out; ++j) {
                const double go = go_r[j];
                const double* cj = p.coeffs.data() + coeff_base + static_cast<std::size_t>(j) * m;
                double* gcj = g.coeffs.data() + coeff_base + static_cast<std::size_t>(j) * m;
                double spline = 0.0;
                double dspline = 0.0;
                for (int t = 0; t <= k; ++t) {
                    spline += cj[t] * nz[t];
                    dspline += cj[t] * dnz[t];
                }
                gwb_i[j] += go * base;
                gws_i[j] += go * spline;
                const double gc = go * ws_i[j];
                for (int t = 0; t <= k; ++t) gcj[t] += gc * nz[t];
                gx += go * wb_i[j] * dbase;
                if (!clamped) gx += go * ws_i[j] * dspline;
            }
            grad_x(r, static_cast<std::size_t>(i)) = gx;
        }
    }
    return {std::move(g), std::move(grad_x)};
}

/// Largest magnitude the spline term contributes to any input gradient over
/// the given inputs: max over (row, i, j) of |w_s[i,j] * d spline_{i,j}/dx|.
/// Identically zero for degree-0 grids.
inline double spline_input_derivative_max(const KanLayerParams& p, const Matrix& x) {
    const int k = p.grid.degree;
    const int m = p.basis_count();
    double worst = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (int i = 0; i < p.n_in; ++i) {
            const double xc = clamp_to_domain(p.grid, x(r, static_cast<std::size_t>(i)));
            const int span = find_span(p.grid, xc);
            double dnz[32];
            basis_derivative_nonzero(p.grid, xc, span, dnz);
            for (int j = 0; j < p.n_out; ++j) {
                const double* cj = p.coeffs.data() + p.coeff_index(i, j, span - k);
                double dspline = 0.0;
                for (int t = 0; t <= k; ++t) dspline += cj[t] * dnz[t];
                worst = std::max(worst, std::fabs(p.w_s(static_cast<std::size_t>(i),
                                                        static_cast<std::size_t>(j)) * dspline));
            }
        }
    }
    return worst;
}

/// Rebuilds the shared grid over the pooled range of the observed activations
/// (same interval count) and refits every edge's coefficients so each edge
/// function is preserved at the activations it actually saw. w_b, w_s and the
/// bias are untouched. Constant activations keep the old domain.
inline KanLayerParams update_layer_grid(const KanLayerParams& p, const Matrix& activations) {
    check_shapes(activations.cols() == static_cast<std::size_t>(p.n_in), "update_layer_grid input width");
    if (activations.rows() == 0) return p;

    const auto [lo, hi] = detail::refit_domain(p.grid, activations.raw());

    KanLayerParams out = p;
    out.grid = build_grid(lo, hi, p.grid.intervals, p.grid.degree);

    const int m = p.basis_count();
    std::vector<double> samples(activations.rows());
    std::vector<double> old_edge(static_cast<std::size_t>(m));
    std::vector<double> targets(activations.rows());
    for (int i = 0; i < p.n_in; ++i) {
        for (std::size_t r = 0; r < activations.rows(); ++r)
            samples[r] = activations(r, static_cast<std::size_t>(i));
        for (int j = 0; j < p.n_out; ++j) {
            for (int mm = 0; mm < m; ++mm)
                old_edge[static_cast<std::size_t>(mm)] = p.coeffs[p.coeff_index(i, j, mm)];
            for (std::size_t r = 0; r < samples.size(); ++r)
                targets[r] = eval_spline(p.grid, old_edge, samples[r]);
            auto [coeffs, rms] = detail::fit_spline_coefficients(out.grid, samples, targets);
            (void)rms;
            for (int mm = 0; mm < m; ++mm)
                out.coeffs[out.coeff_index(i, j, mm)] = coeffs[static_cast<std::size_t>(mm)];
        }
    }
    return out;
}

} // namespace gkan
