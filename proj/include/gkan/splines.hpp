#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gkan/matrix.hpp"

namespace gkan {

/// Uniform B-spline grid of degree k over g intervals.
///
/// The knot vector has g + 2k + 1 entries with k knots extending beyond each
/// end of the domain, so knots[k] == domain_min and knots[k+g] == domain_max.
/// Exactly g + k degree-k basis functions are supported on the domain, and
/// inside the domain they form a partition of unity.
struct SplineGrid {
    int degree = 0;     // k >= 0
    int intervals = 1;  // g >= 1
    double domain_min = -1.0;
    double domain_max = 1.0;
    std::vector<double> knots;  // size g + 2k + 1, non-decreasing, uniform

    int basis_count() const { return intervals + degree; }
    double step() const { return (domain_max - domain_min) / intervals; }
};

inline SplineGrid build_grid(double domain_min, double domain_max, int g, int k) {
    if (g < 1) throw std::invalid_argument("build_grid: intervals g must be >= 1");
    if (k < 0) throw std::invalid_argument("build_grid: degree k must be >= 0");
    if (k > 30) throw std::invalid_argument("build_grid: degree k above supported limit of 30");
    if (!(domain_min < domain_max) || !std::isfinite(domain_min) || !std::isfinite(domain_max))
        throw std::invalid_argument("build_grid: need finite domain_min < domain_max");

    SplineGrid grid;
    grid.degree = k;
    grid.intervals = g;
    grid.domain_min = domain_min;
    grid.domain_max = domain_max;
    grid.knots.resize(static_cast<std::size_t>(g + 2 * k + 1));
    // Affine blend instead of min + i*step so the domain endpoints land
    // exactly on knots[k] and knots[k+g].
    for (int i = 0; i <= g + 2 * k; ++i) {
        const double a = static_cast<double>(g + k - i);
        const double b = static_cast<double>(i - k);
        grid.knots[static_cast<std::size_t>(i)] = (a * domain_min + b * domain_max) / g;
    }
    grid.knots[static_cast<std::size_t>(k)] = domain_min;
    grid.knots[static_cast<std::size_t>(k + g)] = domain_max;
    return grid;
}

inline double clamp_to_domain(const SplineGrid& grid, double x) {
    return std::min(std::max(x, grid.domain_min), grid.domain_max);
}

/// Index j of the knot interval [knots[j], knots[j+1]) containing the clamped
/// x, restricted to the domain intervals j in [k, k+g-1]. The last interval is
/// closed on the right so x == domain_max is valid.
inline int find_span(const SplineGrid& grid, double x) {
    const int k = grid.degree;
    const int g = grid.intervals;
    int j = k + static_cast<int>(std::floor((x - grid.domain_min) / grid.step()));
    j = std::min(std::max(j, k), k + g - 1);
    // Guard against floating-point disagreement with the knot array.
    while (j > k && x < grid.knots[static_cast<std::size_t>(j)]) --j;
    while (j < k + g - 1 && x >= grid.knots[static_cast<std::size_t>(j + 1)]) ++j;
    return j;
}

/// Cox-de Boor recursion, local form: writes the k+1 basis values that are
/// nonzero at x into out[0..k], where out[t] = B_{span-k+t}(x).
inline void basis_nonzero(const SplineGrid& grid, double x, int span, double* out) {
    const int k = grid.degree;
    const double* t = grid.knots.data();
    out[0] = 1.0;
    double left[32];
    double right[32];
    for (int d = 1; d <= k; ++d) {
        left[d] = x - t[span + 1 - d];
        right[d] = t[span + d] - x;
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double tmp = out[r] / (right[r + 1] + left[d - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        out[d] = saved;
    }
}

/// First derivatives of the k+1 nonzero basis functions at x:
/// out[t] = dB_{span-k+t}/dx. Zero for k == 0 (piecewise constants).
inline void basis_derivative_nonzero(const SplineGrid& grid, double x, int span, double* out) {
    const int k = grid.degree;
    if (k == 0) {
        out[0] = 0.0;
        return;
    }
    // Degree k-1 values at the same span, then the standard two-term
    // derivative recurrence.
    double lower[32];
    {
        const double* t = grid.knots.data();
        lower[0] = 1.0;
        double left[32];
        double right[32];
        for (int d = 1; d <= k - 1; ++d) {
            left[d] = x - t[span + 1 - d];
            right[d] = t[span + d] - x;
            double saved = 0.0;
            for (int r = 0; r < d; ++r) {
                const double tmp = lower[r] / (right[r + 1] + left[d - r]);
                lower[r] = saved + right[r + 1] * tmp;
                saved = left[d - r] * tmp;
            }
            lower[d] = saved;
        }
    }
    const double* t = grid.knots.data();
    for (int ti = 0; ti <= k; ++ti) {
        const int i = span - k + ti;  // full basis index
        const double bi = (ti >= 1) ? lower[ti - 1] : 0.0;
        const double bi1 = (ti <= k - 1) ? lower[ti] : 0.0;
        const double term1 = bi / (t[i + k] - t[i]);
        const double term2 = bi1 / (t[i + k + 1] - t[i + 1]);
        out[ti] = k * (term1 - term2);
    }
}

/// All g + k basis values at x. Inputs outside the domain are clamped; inside
/// the domain the values sum to 1.
inline std::vector<double> eval_basis(const SplineGrid& grid, double x) {
    std::vector<double> values(static_cast<std::size_t>(grid.basis_count()), 0.0);
    const double xc = clamp_to_domain(grid, x);
    const int span = find_span(grid, xc);
    double nz[32];
    basis_nonzero(grid, xc, span, nz);
    for (int t = 0; t <= grid.degree; ++t)
        values[static_cast<std::size_t>(span - grid.degree + t)] = nz[t];
    return values;
}

/// All g + k first derivatives at x (zeros for degree 0).
inline std::vector<double> eval_basis_derivative(const SplineGrid& grid, double x) {
    std::vector<double> values(static_cast<std::size_t>(grid.basis_count()), 0.0);
    const double xc = clamp_to_domain(grid, x);
    const int span = find_span(grid, xc);
    double nz[32];
    basis_derivative_nonzero(grid, xc, span, nz);
    for (int t = 0; t <= grid.degree; ++t)
        values[static_cast<std::size_t>(span - grid.degree + t)] = nz[t];
    return values;
}

/// Evaluates the spline sum_i coefficients[i] * B_i(x) (x clamped).
inline double eval_spline(const SplineGrid& grid, const std::vector<double>& coefficients, double x) {
    const double xc = clamp_to_domain(grid, x);
    const int span = find_span(grid, xc);
    double nz[32];
    basis_nonzero(grid, xc, span, nz);
    double acc = 0.0;
    for (int t = 0; t <= grid.degree; ++t)
        acc += coefficients[static_cast<std::size_t>(span - grid.degree + t)] * nz[t];
    return acc;
}

namespace detail {

/// Ridge parameter applied to the least-squares normal equations when
/// refitting spline coefficients; keeps duplicate or clustered samples from
/// making the system rank deficient.
inline constexpr double kRefitRidge = 1e-8;

/// Least-squares fit of spline coefficients on `grid` to targets y at the
/// given sample points. Returns the coefficients and the residual RMS.
inline std::pair<std::vector<double>, double> fit_spline_coefficients(
    const SplineGrid& grid, const std::vector<double>& samples, const std::vector<double>& targets) {
    const int m = grid.basis_count();
    const int k = grid.degree;
    Matrix normal(static_cast<std::size_t>(m), static_cast<std::size_t>(m));
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);

    double nz[32];
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const double xc = clamp_to_domain(grid, samples[s]);
        const int span = find_span(grid, xc);
        basis_nonzero(grid, xc, span, nz);
        const int base = span - k;
        for (int a = 0; a <= k; ++a) {
            const double va = nz[a];
            rhs[static_cast<std::size_t>(base + a)] += va * targets[s];
            for (int b = 0; b <= k; ++b)
                normal(static_cast<std::size_t>(base + a), static_cast<std::size_t>(base + b)) += va * nz[b];
        }
    }
    for (int i = 0; i < m; ++i)
        normal(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) += kRefitRidge;

    CholeskySolver solver(std::move(normal));
    std::vector<double> coeffs = solver.solve(rhs);

    double ss = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const double r = eval_spline(grid, coeffs, samples[s]) - targets[s];
        ss += r * r;
    }
    const double rms = std::sqrt(ss / static_cast<double>(samples.size()));
    return {std::move(coeffs), rms};
}

/// Domain for a rebuilt grid: the sample range extended by 1% of its width on
/// each side. Degenerate (near-constant) samples fall back to the old domain.
inline std::pair<double, double> refit_domain(const SplineGrid& old_grid, const std::vector<double>& samples) {
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double width = hi - lo;
    if (!(width > 1e-12) || !std::isfinite(width))
        return {old_grid.domain_min, old_grid.domain_max};
    const double margin = 0.01 * width;
    return {lo - margin, hi + margin};
}

} // namespace detail

struct RefitResult {
    SplineGrid grid;
    std::vector<double> coefficients;
    double residual_rms = 0.0;
};

/// Rebuilds the grid over the observed sample range (1% margin per side) with
/// new_g intervals and refits the coefficients by regularized least squares so
/// the old spline is reproduced at the sample points.
inline RefitResult refit_grid(const SplineGrid& old_grid, const std::vector<double>& coefficients,
                              const std::vector<double>& samples, int new_g) {
    if (samples.empty()) throw std::invalid_argument("refit_grid: samples must be nonempty");
    if (new_g < 1) throw std::invalid_argument("refit_grid: new_g must be >= 1");
    if (coefficients.size() != static_cast<std::size_t>(old_grid.basis_count()))
        throw std::invalid_argument("refit_grid: coefficient count does not match grid");

    const auto [lo, hi] = detail::refit_domain(old_grid, samples);
    RefitResult result;
    result.grid = build_grid(lo, hi, new_g, old_grid.degree);

    std::vector<double> targets(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s)
        targets[s] = eval_spline(old_grid, coefficients, samples[s]);

    auto [coeffs, rms] = detail::fit_spline_coefficients(result.grid, samples, targets);
    result.coefficients = std::move(coeffs);
    result.residual_rms = rms;
    return result;
}

} // namespace gkan
