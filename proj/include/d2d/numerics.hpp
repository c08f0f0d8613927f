#pragma once

#include <functional>

namespace d2d {

struct QuadratureSpec {
    double relative_tolerance = 1e-10;
    int max_subdivisions = 200;  // recursion depth cap
};

// Integrates f over [lo, hi] by adaptive Simpson with Richardson correction.
double adaptive_simpson(const std::function<double(double)>& f, double lo,
                        double hi, QuadratureSpec spec = {});

// Non-regularized lower incomplete gamma: integral of t^{a-1} e^{-t} over
// [0, b]. b may be +infinity, which yields the complete gamma function.
double lower_incomplete_gamma(double a, double b);

// gamma_th^{2/alpha} * integral over [gamma_th^{-2/alpha}, inf) of
// 1/(1+u^{alpha/2}). The infinite tail is mapped onto a finite interval by
// the power substitution v = u^{1-alpha/2}, which keeps the transformed
// integrand bounded for every alpha > 2.
double theta_interference(double alpha, double gamma_th,
                          QuadratureSpec spec = {});

// (gamma_th * power_ratio)^{2/alpha} * integral over [0, inf) of
// 1/(1+u^{alpha/2}); the full-line integral is (2pi/alpha)/sin(2pi/alpha).
double theta_bs(double alpha, double gamma_th, double power_ratio);

// Quadrature evaluation of the same integral, kept as a cross-check of the
// closed form.
double theta_bs_quadrature(double alpha, double gamma_th, double power_ratio,
                           QuadratureSpec spec = {});

// Locates the maximizer of f on [lo, hi] to within tol. Fast path: when f is
// still climbing at hi the answer is hi itself. Otherwise golden-section
// search with a leftmost tie-break, so a constant f yields lo.
double bisect_max(const std::function<double(double)>& f, double lo, double hi,
                  double tol);

double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol);

}  // namespace d2d
