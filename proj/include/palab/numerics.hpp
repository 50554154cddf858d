#pragma once

#include <functional>

namespace palab::numerics {

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 60);

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
///
/// Evaluated with the modified Lentz continued fraction, using the symmetry
/// I_x(a, b) = 1 - I_{1-x}(b, a) on the slowly converging side. When the
/// fraction fails to converge the value falls back to adaptive Simpson
/// quadrature of the density.
double incomplete_beta(double a, double b, double x);

/// 1 - I_x(a, b), computed without cancellation near x = 1.
double incomplete_beta_complement(double a, double b, double x);

/// Beta function B(a, b).
double beta_function(double a, double b);

}  // namespace palab::numerics
