#pragma once

// Lengths, diameters, completed distances, blow-down correspondence
// distortion, and the integral-geometry identities (line-disk integrals,
// the cone-surface volume closed form, the wedge inequality).
//
// Everything here follows the upper-bound-by-explicit-path architecture:
// every distance or diameter returned is the measured length of a path the
// code actually constructed, so the numbers are certified one-sided.

#include "krf/calabi.hpp"

#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

namespace krf {

// A point of the unit-sphere bundle coordinates over the profile:
// rho = log |z|^2, sigma in [0, pi] the horizontal great-circle angle,
// beta the Hopf fiber angle (taken modulo 2 pi / k on the quotient).
struct SpherePoint {
    double rho = 0.0;
    double sigma = 0.0;
    double beta = 0.0;
};

enum class DistanceMode { UpperBound, LowerBound, Completion };

struct DistanceQuery {
    SpherePoint p, q;
    DistanceMode mode = DistanceMode::UpperBound;
};

// Mesh resolution for the shortest-path searches.  tolerance, when finite,
// makes queries throw MeshResolutionFailure if the reported slack exceeds it.
struct MeshOptions {
    std::size_t rho_stride = 1;
    std::size_t angular_points = 512;
    double tolerance = std::numeric_limits<double>::infinity();
};

struct DistanceResult {
    double bound = 0.0; // upper bound (lower bound in LowerBound mode)
    double slack = 0.0; // mesh discretization allowance
};

struct GhResult {
    double distortion = 0.0; // sup over sampled pairs of |d_t - d_T|
    double slack = 0.0;      // combined mesh slack of both searches
};

// ---------------------------------------------------------------------------
// Structured paths
// ---------------------------------------------------------------------------

// One leg of a structured path.  Radial legs move only in rho at a fixed
// direction; Horizontal and Hopf legs rotate at fixed rho by `angle`
// (Hopf angles are effective quotient angles); LineChord legs run along a
// real chord of an affine complex line at Euclidean distance `a` from the
// origin, from arclength parameter s_a to s_b.
struct PathSegment {
    enum class Kind { Radial, Horizontal, Hopf, LineChord };
    Kind kind = Kind::Radial;
    double rho_a = 0.0, rho_b = 0.0; // Radial
    double rho = 0.0, angle = 0.0;   // Horizontal / Hopf
    double a = 0.0, s_a = 0.0, s_b = 0.0; // LineChord

    static PathSegment radial(double rho_a, double rho_b);
    static PathSegment horizontal(double rho, double angle);
    static PathSegment hopf(double rho, double angle);
    static PathSegment line_chord(double a, double s_a, double s_b);
};

struct PathSpec {
    std::vector<PathSegment> segments;
};

// Total length of the structured path.  Verifies that consecutive segments
// chain in rho (InvalidGeometry otherwise) and that every parameter stays
// inside the grid domain.
double path_length(const RadialProfile& prof, const PathSpec& spec,
                   int quotient_k = 1);

// ---------------------------------------------------------------------------
// Lengths and diameters
// ---------------------------------------------------------------------------

// Integral of sqrt(phi'/2) over [rho_a, rho_b]: the reduced radial line
// element of ds^2 = 2G.  Composite Simpson on a spline of phi'.
double radial_length(const RadialProfile& prof, double rho_a, double rho_b);

// Full-turn Hopf orbit length on the Z_k quotient: 2 pi sqrt(2 phi') / k.
double hopf_circle_length(const RadialProfile& prof, double rho, int quotient_k);

// Length of the two-leg path (horizontal rotation by pi, then a half-turn
// Hopf rotation) joining any two points of the sphere at rho:
// pi sqrt(2 phi) + pi sqrt(2 phi') / k.  A certified diameter upper bound.
double sphere_diameter_upper(const RadialProfile& prof, double rho,
                             int quotient_k);

// Shortest-path distance bound between two bundle points.  UpperBound mode
// searches a (rho x angle) mesh with edge weights from the realized path
// lengths; Completion mode additionally routes through the contracted
// point with the exact radial tail cap sqrt(2 phi(rho_min)); LowerBound
// mode returns the radial projection lower bound.
DistanceResult distance_upper(const RadialProfile& prof, const DistanceQuery& query,
                              const MeshOptions& opts = {});

// Correspondence distortion between the total-space metric at time t and
// the completed blow-down metric: sup over a fixed 12-point sample (66
// pairs) of |d(g(t); x, x') - d(d_T; x, x')|, plus the summed mesh slack.
// Total-space profiles search in UpperBound mode, blow-down profiles in
// Completion mode, so gh_distortion(prof, prof) vanishes identically.
GhResult gh_distortion(const RadialProfile& prof_t, const RadialProfile& prof_T,
                       const MeshOptions& opts = MeshOptions{8, 128,
                           std::numeric_limits<double>::infinity()});

// Diameter estimate of the profile metric over the same fixed 12-point
// sample used by gh_distortion (max pairwise path-length bound).
double sample_diameter(const RadialProfile& prof,
                       const MeshOptions& opts = MeshOptions{8, 128,
                           std::numeric_limits<double>::infinity()});

// The deterministic 12-point correspondence sample: four radii between
// rho_lo and rho_hi crossed with three angular positions (two sharing the
// fiber phase, one a half quotient turn away).
std::vector<SpherePoint> correspondence_sample(double rho_lo, double rho_hi,
                                               int quotient_k);

// All pairwise certified distance bounds between the given sample points,
// each snapped to its nearest mesh node, together with the mesh slack.
// Both the distortion comparison and the exported distance table are
// assembled from this matrix.
std::pair<std::vector<std::vector<double>>, double>
sample_distance_matrix(const RadialProfile& prof,
                       const std::vector<SpherePoint>& pts,
                       const MeshOptions& opts = MeshOptions{8, 128,
                           std::numeric_limits<double>::infinity()});

// ---------------------------------------------------------------------------
// Integral geometry
// ---------------------------------------------------------------------------

// Area (integral of the Kahler form) of the disk of radius a tan(eta_max)
// centered at the closest point of an affine complex line at Euclidean
// distance a = 2 r cos(theta) from the origin.  Nonnegative; throws
// QuadratureFailure when the disk dips below the grid domain.
double line_disk_integral(const RadialProfile& prof, double r, double theta,
                          double eta_max = 0.5);

struct TildeVolume {
    double closed_form = 0.0;
    double quadrature = 0.0;
};

// Induced volume of the cone surface F(r, theta, eta_max) under the conical
// comparison metric  rho^{-2(1-delta)} d rho^2 + g_{S^{2n-1}}:  returns both
// the closed form (2 pi / delta) sin(eta_max) R^delta with
// R = 2 r cos(theta)/cos(eta_max), and an independent surface quadrature
// from a finite-difference embedding.
TildeVolume tilde_volume_F(double r, double theta, double eta_max, double delta);

// ---------------------------------------------------------------------------
// Pointwise Hessian data and the wedge inequality
// ---------------------------------------------------------------------------

// The full complex Hessian at a point: eigenvalue lambda_rad along the
// complex radial direction zhat, lambda_sph on its orthogonal complement.
struct FullHessian {
    int n = 2;
    std::vector<std::complex<double>> zhat; // unit vector, |zhat| = 1
    double lambda_sph = 1.0;
    double lambda_rad = 1.0;
};

// Hessian data of the profile metric at the grid node nearest rho, with the
// radial direction zhat (normalized internally).
FullHessian full_hessian_at(const RadialProfile& prof, double rho,
                            const std::vector<std::complex<double>>& zhat);

// Hermitian inner product, Riemannian metric g = 2 Re<,>, and Kahler form
// omega = -2 Im<,> of the Hessian data.
std::complex<double> hermitian_product(const FullHessian& G,
                                       const std::vector<std::complex<double>>& u,
                                       const std::vector<std::complex<double>>& v);
double metric_g(const FullHessian& G, const std::vector<std::complex<double>>& u,
                const std::vector<std::complex<double>>& v);
double kahler_omega(const FullHessian& G, const std::vector<std::complex<double>>& u,
                    const std::vector<std::complex<double>>& v);

// |omega(e, e')| for a g-orthonormal pair; <= 1 always (the wedge
// inequality), = 1 on complex lines, = 0 on totally real pairs.  Rejects
// non-orthonormal inputs beyond 1e-10 with InvalidGeometry.
double wedge_bound_check(const FullHessian& G,
                         const std::vector<std::complex<double>>& e,
                         const std::vector<std::complex<double>>& e_prime);

} // namespace krf
