#pragma once

// Exception taxonomy for the flow laboratory.  Every failure mode that the
// public API is contractually allowed to signal has its own type here, so
// callers can distinguish "your input was bad" from "the numerics gave up"
// without string matching.

#include <stdexcept>
#include <string>

namespace krf {

// Base class: everything thrown by this library derives from it.
class KrfError : public std::runtime_error {
public:
    explicit KrfError(const std::string& what) : std::runtime_error(what) {}
};

// A profile stopped being a Kahler potential: phi or phi' lost positivity
// somewhere on the grid.  Carries the location and offending value.
class NonKahlerProfile : public KrfError {
public:
    NonKahlerProfile(double rho, double value, const std::string& which)
        : KrfError("profile not Kahler: " + which + " = " + std::to_string(value) +
                   " at rho = " + std::to_string(rho)),
          rho(rho), value(value) {}
    double rho;
    double value;
};

// The explicit scheme would need a time step below the floor to remain
// stable.  Carries the step it wanted.
class CFLFailure : public KrfError {
public:
    explicit CFLFailure(double dt_required)
        : KrfError("stable explicit step would need dt = " + std::to_string(dt_required) +
                   ", below the allowed floor"),
          dt_required(dt_required) {}
    double dt_required;
};

// An operation that only makes sense after the first phase has run to its
// halt (surgery, extinction fitting) was invoked on a trajectory that never
// got there.
class SingularTimeNotReached : public KrfError {
public:
    explicit SingularTimeNotReached(const std::string& what) : KrfError(what) {}
};

// Surgery was asked for under conditions where it is not meaningful: the
// shrinking divisor still carries too much area, or the trajectory has
// already been cut once.
class SurgeryRefused : public KrfError {
public:
    explicit SurgeryRefused(const std::string& what) : KrfError(what) {}
};

// A config file failed validation.  Carries the 1-based line number of the
// offending entry (0 when the problem is a missing key rather than a bad
// line).
class ConfigInvalid : public KrfError {
public:
    ConfigInvalid(int line, const std::string& what)
        : KrfError(line > 0 ? "config line " + std::to_string(line) + ": " + what
                            : "config: " + what),
          line(line) {}
    int line;
};

// A quadrature could not deliver its target accuracy, or its integrand left
// the domain where the profile is defined.
class QuadratureFailure : public KrfError {
public:
    explicit QuadratureFailure(const std::string& what) : KrfError(what) {}
};

// A distance/diameter query could not be certified on the requested mesh
// (for instance the mesh slack exceeds the quantity being measured).
class MeshResolutionFailure : public KrfError {
public:
    explicit MeshResolutionFailure(const std::string& what) : KrfError(what) {}
};

// A regression was asked of data that cannot support it: too few points,
// zero variance in the abscissae, or nonpositive values fed to a log-log fit.
class FitDegeneracy : public KrfError {
public:
    explicit FitDegeneracy(const std::string& what) : KrfError(what) {}
};

// A detector or estimator needed more snapshots/samples than the trajectory
// holds.
class InsufficientData : public KrfError {
public:
    explicit InsufficientData(const std::string& what) : KrfError(what) {}
};

// Geometric sanity violations in user-supplied frames or points
// (non-orthonormal vectors, points outside the chart, ...).
class InvalidGeometry : public KrfError {
public:
    explicit InvalidGeometry(const std::string& what) : KrfError(what) {}
};

} // namespace krf
