#pragma once

// Scalar special functions used throughout the library: log-gamma, gamma,
// the regularized lower incomplete gamma function, and digamma.  All of
// them are double precision kernels with no global state; domain errors
// are reported with std::domain_error.

namespace ggtde {

// ln Gamma(x) for x > 0.  Lanczos approximation, better than 1e-12
// relative accuracy over [1e-3, 1e6].
double log_gamma(double x);

// Gamma(x) for x > 0.  exp(log_gamma(x)); overflows to +inf above
// x ~ 171.6 like the underlying exponential.
double gamma_fn(double x);

// Regularized lower incomplete gamma P(a, s) = gamma(a, s) / Gamma(a)
// for a > 0, s >= 0.  Series expansion for s < a + 1, continued
// fraction for the complement otherwise.
double reg_lower_inc_gamma(double a, double s);

// Regularized upper incomplete gamma Q(a, s) = 1 - P(a, s), computed
// directly from the continued fraction when that is the stable branch.
double reg_upper_inc_gamma(double a, double s);

// Digamma psi(x) = d/dx ln Gamma(x) for x > 0.  Upward recurrence to
// x >= 10 followed by the asymptotic expansion.
double digamma(double x);

}  // namespace ggtde
