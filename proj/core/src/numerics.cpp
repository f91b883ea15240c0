#include "krf/numerics.hpp"
#include "krf/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace krf {

// ---------------------------------------------------------------------------
// Tridiagonal solve
// ---------------------------------------------------------------------------

std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                      std::vector<double> diag,
                                      std::vector<double> upper,
                                      std::vector<double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: band size mismatch");
    if (n == 0) return {};

    // Forward sweep.
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0)
            throw std::runtime_error("solve_tridiagonal: zero pivot");
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0)
        throw std::runtime_error("solve_tridiagonal: zero pivot");

    // Back substitution.
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

double simpson_uniform(const std::vector<double>& samples, double h) {
    const std::size_t n = samples.size();
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument("simpson_uniform: need an odd sample count >= 3");
    double acc = samples.front() + samples.back();
    for (std::size_t i = 1; i + 1 < n; ++i)
        acc += samples[i] * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double gauss_legendre_panels(const std::function<double(double)>& f,
                             double a, double b, std::size_t panels) {
    if (panels == 0)
        throw std::invalid_argument("gauss_legendre_panels: need at least one panel");
    // 5-point Gauss-Legendre nodes/weights on [-1, 1].
    static const double gx[5] = {
        -0.9061798459386639928, -0.5384693101056830910, 0.0,
         0.5384693101056830910,  0.9061798459386639928};
    static const double gw[5] = {
        0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
        0.4786286704993664680, 0.2369268850561890875};

    const double hp = (b - a) / static_cast<double>(panels);
    double acc = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + hp * static_cast<double>(p);
        const double mid = lo + 0.5 * hp;
        const double half = 0.5 * hp;
        for (int q = 0; q < 5; ++q)
            acc += gw[q] * f(mid + half * gx[q]);
    }
    return acc * 0.5 * hp;
}

// ---------------------------------------------------------------------------
// Natural cubic spline
// ---------------------------------------------------------------------------

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw std::invalid_argument("CubicSpline: need >= 2 knots, matching sizes");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("CubicSpline: knots must be strictly increasing");

    m_.assign(n, 0.0); // natural boundary: zero curvature at both ends
    if (n == 2) return;

    // Interior second derivatives from the standard tridiagonal system.
    std::vector<double> lower(n - 2, 0.0), diag(n - 2, 0.0), upper(n - 2, 0.0),
        rhs(n - 2, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x_[i] - x_[i - 1];
        const double hr = x_[i + 1] - x_[i];
        const std::size_t j = i - 1;
        lower[j] = hl / 6.0;
        diag[j] = (hl + hr) / 3.0;
        upper[j] = hr / 6.0;
        rhs[j] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
    }
    const auto interior = solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = interior[i - 1];
}

std::size_t CubicSpline::segment(double xq) const {
    // Rightmost knot with x_[k] <= xq, clamped to a valid segment index.
    std::size_t lo = 0, hi = x_.size() - 1;
    if (xq <= x_[0]) return 0;
    if (xq >= x_[hi]) return hi - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (x_[mid] <= xq ? lo : hi) = mid;
    }
    return lo;
}

double CubicSpline::operator()(double xq) const {
    const std::size_t k = segment(xq);
    const double h = x_[k + 1] - x_[k];
    const double a = (x_[k + 1] - xq) / h;
    const double b = (xq - x_[k]) / h;
    return a * y_[k] + b * y_[k + 1] +
           ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double xq) const {
    const std::size_t k = segment(xq);
    const double h = x_[k + 1] - x_[k];
    const double a = (x_[k + 1] - xq) / h;
    const double b = (xq - x_[k]) / h;
    return (y_[k + 1] - y_[k]) / h +
           ((3.0 * b * b - 1.0) * m_[k + 1] - (3.0 * a * a - 1.0) * m_[k]) * h / 6.0;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

double fd_first_central(const std::vector<double>& f, std::size_t i, double h) {
    return (f[i + 1] - f[i - 1]) / (2.0 * h);
}

double fd_first_left(const std::vector<double>& f, double h) {
    return (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
}

double fd_first_right(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    return (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
}

double fd_second_central(const std::vector<double>& f, std::size_t i, double h) {
    return (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
}

double fd_first_central7(const std::vector<double>& f, std::size_t i, double h) {
    // Coefficients [-1/60, 3/20, -3/4, 0, 3/4, -3/20, 1/60] / h.
    return (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] -
            9.0 * f[i + 2] + f[i + 3]) /
           (60.0 * h);
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    if (n != ys.size())
        throw FitDegeneracy("fit_line: size mismatch");
    if (n < 2)
        throw FitDegeneracy("fit_line: need at least two points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0)
        throw FitDegeneracy("fit_line: zero variance in x");

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;

    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / (static_cast<double>(n - 2) * sxx));
    }
    return fit;
}

} // namespace krf
