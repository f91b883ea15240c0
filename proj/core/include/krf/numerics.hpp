#pragma once

// Small self-contained numerics kit shared by the solver and the
// verification passes: tridiagonal solves, quadrature, splines, finite
// differences, and least squares.  Everything operates on plain
// std::vector<double>; no external linear algebra is used.

#include <cstddef>
#include <functional>
#include <vector>

namespace krf {

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// Solve a tridiagonal system in place (Thomas algorithm).
//   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]
// lower[0] and upper[n-1] are ignored.  Throws std::invalid_argument on a
// size mismatch and std::runtime_error if a pivot vanishes.
std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                      std::vector<double> diag,
                                      std::vector<double> upper,
                                      std::vector<double> rhs);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

// Composite Simpson on a uniformly spaced sample set.  The sample count must
// be odd (even panel count); spacing h.
double simpson_uniform(const std::vector<double>& samples, double h);

// Integrate f over [a, b] with `panels` equal panels, 5-point Gauss-Legendre
// per panel.  Exact for polynomials of degree <= 9 on each panel.
double gauss_legendre_panels(const std::function<double(double)>& f,
                             double a, double b, std::size_t panels);

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

// Natural cubic spline through (x[i], y[i]) with strictly increasing x.
// Evaluation outside [x.front(), x.back()] extrapolates with the boundary
// cubic (callers that need domain control clamp first).
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double xq) const;
    double derivative(double xq) const;

    double x_min() const { return x_.empty() ? 0.0 : x_.front(); }
    double x_max() const { return x_.empty() ? 0.0 : x_.back(); }

private:
    std::size_t segment(double xq) const;

    std::vector<double> x_, y_, m_; // m_ = second derivatives at the knots
};

// ---------------------------------------------------------------------------
// Finite differences on uniform grids
// ---------------------------------------------------------------------------

// Centered first derivative at interior index i (3-point, O(h^2)).
double fd_first_central(const std::vector<double>& f, std::size_t i, double h);

// One-sided second-order first derivative at the left/right endpoint.
double fd_first_left(const std::vector<double>& f, double h);   // at index 0
double fd_first_right(const std::vector<double>& f, double h);  // at index n-1

// Centered second derivative at interior index i (3-point, O(h^2)).
double fd_second_central(const std::vector<double>& f, std::size_t i, double h);

// High-order centered first derivative (7-point, O(h^6)).  Requires
// 3 <= i <= n-4.  Used where residuals must resolve below 1e-8.
double fd_first_central7(const std::vector<double>& f, std::size_t i, double h);

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0; // standard error of the slope estimate
};

// Ordinary least squares line through (x[i], y[i]).  Throws FitDegeneracy on
// fewer than two points or zero variance in x.
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

} // namespace krf
