#pragma once

#include <functional>

namespace fieldreg {

/// Adaptive Simpson on [a,b] to the given relative tolerance (with a small
/// absolute floor so zero integrals terminate). Deterministic.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int max_depth = 28);

/// Tensor-product adaptive Simpson over the box [lo_1,hi_1] x ... x [lo_d,hi_d].
/// Outer dimensions integrate inner integrals evaluated at a tighter tolerance.
double integrate_box(const std::function<double(const double*)>& f, const double* lo,
                     const double* hi, int d, double rel_tol);

/// Integral of f over (0, upper] where f may blow up (integrably) at 0.
/// Dyadic splitting toward the origin, each piece by adaptive Simpson.
double integrate_to_singular_origin(const std::function<double(double)>& f, double upper,
                                    double rel_tol);

}  // namespace fieldreg
