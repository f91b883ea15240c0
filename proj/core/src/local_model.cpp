#include "krf/local_model.hpp"
#include "krf/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace krf {

void validate(const LocalModelParams& p) {
    if (p.n < 2)
        throw std::invalid_argument("LocalModelParams: n must be >= 2");
    if (p.k < 1)
        throw std::invalid_argument("LocalModelParams: k must be >= 1");
    if (!(p.c > 0.0))
        throw std::invalid_argument("LocalModelParams: c must be > 0");
}

double section_norm(int k, double r) {
    if (k < 1)
        throw std::invalid_argument("section_norm: k must be >= 1");
    if (r < 0.0)
        throw std::invalid_argument("section_norm: negative radius");
    return std::pow(r, 2 * k);
}

AmbientHessian hat_metric_eigenvalues(const LocalModelParams& p, double r) {
    validate(p);
    if (!(r > 0.0))
        throw std::invalid_argument("hat_metric_eigenvalues: r must be > 0 (cone point)");
    AmbientHessian h;
    const double rpow = std::pow(r, 2 * (p.k - 1));
    h.lambda_rad = static_cast<double>(p.k) * static_cast<double>(p.k) * rpow;
    h.lambda_sph = static_cast<double>(p.k) * rpow + p.c * static_cast<double>(p.k) / (r * r);
    h.det = std::pow(h.lambda_sph, p.n - 1) * h.lambda_rad;
    h.at_rho = 2.0 * std::log(r);
    return h;
}

double gamma_eps(int n, int k, double eps, double r) {
    if (k < 1 || k >= n)
        throw std::invalid_argument("gamma_eps: need 1 <= k <= n-1");
    if (eps < 0.0)
        throw std::invalid_argument("gamma_eps: eps must be >= 0");
    if (r < 0.0)
        throw std::invalid_argument("gamma_eps: negative radius");
    const double base = eps + std::pow(r, 2 * k);
    const double expo = static_cast<double>(n - k) / static_cast<double>(k);
    return std::pow(base, expo);
}

double fubini_type_profile(double b, int k, double rho) {
    if (!(b > 0.0))
        throw std::invalid_argument("fubini_type_profile: b must be > 0");
    if (k < 1)
        throw std::invalid_argument("fubini_type_profile: k must be >= 1");
    // b e^{k rho} / (1 + e^{k rho}) written to stay finite for large rho.
    return b / (1.0 + std::exp(-static_cast<double>(k) * rho));
}

// ---------------------------------------------------------------------------
// Finite-difference Hessian oracle
// ---------------------------------------------------------------------------

namespace {

// The potential as a function of the 2n real coordinates (x_1..x_n, y_1..y_n).
double ambient_potential(const std::function<double(double)>& potential,
                         const std::vector<double>& v) {
    double r2 = 0.0;
    for (double c : v) r2 += c * c;
    return potential(std::log(r2));
}

double second_partial(const std::function<double(double)>& potential,
                      std::vector<double> v, std::size_t a, std::size_t b,
                      double h) {
    if (a == b) {
        const double f0 = ambient_potential(potential, v);
        v[a] += h;
        const double fp = ambient_potential(potential, v);
        v[a] -= 2.0 * h;
        const double fm = ambient_potential(potential, v);
        return (fp - 2.0 * f0 + fm) / (h * h);
    }
    // Mixed partial by the 4-point cross stencil.
    v[a] += h; v[b] += h;
    const double fpp = ambient_potential(potential, v);
    v[b] -= 2.0 * h;
    const double fpm = ambient_potential(potential, v);
    v[a] -= 2.0 * h;
    const double fmm = ambient_potential(potential, v);
    v[b] += 2.0 * h;
    const double fmp = ambient_potential(potential, v);
    return (fpp - fpm - fmp + fmm) / (4.0 * h * h);
}

} // namespace

AmbientHessian hessian_oracle(const std::function<double(double)>& potential,
                              const std::vector<std::complex<double>>& z) {
    const std::size_t n = z.size();
    if (n == 0)
        throw std::invalid_argument("hessian_oracle: empty point");
    double r2 = 0.0;
    for (const auto& zi : z) r2 += std::norm(zi);
    if (!(r2 > 0.0))
        throw std::invalid_argument("hessian_oracle: z must be nonzero");

    // Real coordinates: v = (x_1..x_n, y_1..y_n).
    std::vector<double> v(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = z[i].real();
        v[n + i] = z[i].imag();
    }
    const double h = 1e-5 * std::max(1.0, std::sqrt(r2));

    // Complex Hessian G_{ij} = 1/4 [(F_{x_i x_j} + F_{y_i y_j})
    //                              + i (F_{x_i y_j} - F_{y_i x_j})].
    std::vector<std::complex<double>> G(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double fxx = second_partial(potential, v, i, j, h);
            const double fyy = second_partial(potential, v, n + i, n + j, h);
            const double fxy = second_partial(potential, v, i, n + j, h);
            const double fyx = second_partial(potential, v, n + i, j, h);
            const std::complex<double> gij =
                0.25 * std::complex<double>(fxx + fyy, fxy - fyx);
            G[i * n + j] = gij;
            G[j * n + i] = std::conj(gij); // Hermitian
        }
    }
    for (const auto& g : G)
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
            throw KrfError("hessian_oracle: non-finite differences (singular potential)");

    // Rank-one split: the radial eigenvalue is the quadratic form on z/|z|,
    // the sphere eigenvalue carries the rest of the trace.
    std::complex<double> quad = 0.0;
    std::complex<double> trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        trace += G[i * n + i];
        for (std::size_t j = 0; j < n; ++j)
            quad += G[i * n + j] * z[i] * std::conj(z[j]);
    }
    AmbientHessian out;
    out.lambda_rad = quad.real() / r2;
    out.lambda_sph = n > 1
                         ? (trace.real() - out.lambda_rad) / static_cast<double>(n - 1)
                         : out.lambda_rad;
    out.det = std::pow(out.lambda_sph, static_cast<int>(n) - 1) * out.lambda_rad;
    out.at_rho = std::log(r2);
    return out;
}

} // namespace krf
