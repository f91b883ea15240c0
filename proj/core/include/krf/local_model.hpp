#pragma once

// Closed-form reference geometry of the local chart around the exceptional
// divisor and the model potential on the blown-down cone, plus an
// independent finite-difference Hessian oracle used to validate every
// closed form in the test suites.
//
// Convention used throughout the library: the squared length of a tangent
// vector v is 2 * sum_{ij} G_{ij} v^i conj(v^j), where G is the raw complex
// Hessian of the potential.  This affects constants only, never exponents.

#include <complex>
#include <functional>
#include <vector>

namespace krf {

// Parameters of the local reference metric around the divisor:
// ambient complex dimension n, twist k of the normal bundle, and the
// positive mixing constant c of the reference potential e^{k rho} + c k rho.
struct LocalModelParams {
    int n = 2;
    int k = 1;
    double c = 1.0;
};

// Throws std::invalid_argument unless n >= 2, k >= 1, c > 0.
void validate(const LocalModelParams& p);

// Eigenvalue data of a rotationally invariant complex Hessian at a point
// with log-square-radius at_rho: lambda_sph acts on the (n-1)-dimensional
// sphere directions, lambda_rad on the radial complex line, and
// det = lambda_sph^{n-1} * lambda_rad.
struct AmbientHessian {
    double lambda_sph = 0.0;
    double lambda_rad = 0.0;
    double det = 0.0;
    double at_rho = 0.0;
};

// |s|^2 of the tautological section in the local chart: r^{2k}.
// Rejects r < 0 and k < 1.
double section_norm(int k, double r);

// Eigenvalues of the reference (hat) metric  e^{k rho} + c k rho  at radius
// r > 0:
//   lambda_rad = k^2 r^{2(k-1)},   lambda_sph = k r^{2(k-1)} + c k / r^2.
// Both satisfy  k r^{2(k-1)} <= lambda <= (2k-1+ck) / r^2  for r <= 1.
AmbientHessian hat_metric_eigenvalues(const LocalModelParams& p, double r);

// Regularized volume density gamma_eps = (eps + r^{2k})^{(n-k)/k}.
// At eps = 0 this is r^{2(n-k)}.  Requires 1 <= k <= n-1, eps >= 0, r >= 0.
double gamma_eps(int n, int k, double eps, double r);

// Momentum profile of the model metric on the blow-down:
//   phi_Y(rho) = b e^{k rho} / (1 + e^{k rho}),
// strictly increasing from 0 to b.  Requires b > 0, k >= 1.
double fubini_type_profile(double b, int k, double rho);

// Independent validation oracle: computes the complex Hessian of
// P(log|z|^2) by central finite differences in the ambient real
// coordinates (step 1e-5 * max(1,|z|)) and extracts the two eigenvalues
// from the rank-one structure.  Never uses the closed forms above.
AmbientHessian hessian_oracle(const std::function<double(double)>& potential,
                              const std::vector<std::complex<double>>& z);

} // namespace krf
