#include "d2d/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace d2d {

namespace {

double simpson_rule(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_recurse(const std::function<double(double)>& f, double a,
                       double fa, double b, double fb, double m, double fm,
                       double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_rule(a, fa, m, fm, flm);
    const double right = simpson_rule(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                           depth - 1) +
           simpson_recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                           depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double lo,
                        double hi, QuadratureSpec spec) {
    if (!(spec.relative_tolerance > 0.0) || spec.max_subdivisions < 1)
        throw std::domain_error("adaptive_simpson: invalid quadrature spec");
    if (lo == hi) return 0.0;
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo), fb = f(hi), fm = f(m);
    const double whole = simpson_rule(lo, fa, hi, fb, fm);
    // tolerance anchored at the first estimate; refined panels split it
    const double scale = std::max(std::abs(whole), 1e-300);
    return simpson_recurse(f, lo, fa, hi, fb, m, fm, whole,
                           spec.relative_tolerance * scale,
                           spec.max_subdivisions);
}

namespace {

constexpr int kGammaMaxIter = 600;
constexpr double kGammaEps = 1e-15;

// regularized P(a,x) by power series, for x < a+1
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kGammaMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// regularized Q(a,x) by Lentz continued fraction, for x >= a+1
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kGammaMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double lower_incomplete_gamma(double a, double b) {
    if (!(a > 0.0)) throw std::domain_error("lower_incomplete_gamma: a <= 0");
    if (std::isnan(b) || b < 0.0)
        throw std::domain_error("lower_incomplete_gamma: b < 0");
    if (b == 0.0) return 0.0;
    if (std::isinf(b)) return std::tgamma(a);
    const double p =
        (b < a + 1.0) ? gamma_p_series(a, b) : 1.0 - gamma_q_cf(a, b);
    return p * std::tgamma(a);
}

namespace {

// integral over [L, 1] of 1/(1+u^p) plus the tail over [1, inf) rewritten via
// v = u^{1-p}; when L >= 1 only the (rescaled) tail piece remains
double interference_integral(double p, double L, const QuadratureSpec& spec) {
    const double q = p / (p - 1.0);
    auto tail = [q](double v) { return 1.0 / (1.0 + std::pow(v, q)); };
    if (L >= 1.0) {
        const double V = std::pow(L, 1.0 - p);
        return adaptive_simpson(tail, 0.0, V, spec) / (p - 1.0);
    }
    auto head = [p](double u) { return 1.0 / (1.0 + std::pow(u, p)); };
    return adaptive_simpson(head, L, 1.0, spec) +
           adaptive_simpson(tail, 0.0, 1.0, spec) / (p - 1.0);
}

}  // namespace

double theta_interference(double alpha, double gamma_th, QuadratureSpec spec) {
    if (!(alpha > 2.0))
        throw std::domain_error("theta_interference: alpha <= 2 diverges");
    if (gamma_th < 0.0)
        throw std::domain_error("theta_interference: gamma_th < 0");
    if (gamma_th == 0.0) return 0.0;
    const double p = 0.5 * alpha;
    const double L = std::pow(gamma_th, -1.0 / p);
    return std::pow(gamma_th, 1.0 / p) * interference_integral(p, L, spec);
}

double theta_bs(double alpha, double gamma_th, double power_ratio) {
    if (!(alpha > 2.0)) throw std::domain_error("theta_bs: alpha <= 2");
    if (gamma_th < 0.0) throw std::domain_error("theta_bs: gamma_th < 0");
    if (!(power_ratio > 0.0))
        throw std::domain_error("theta_bs: power_ratio <= 0");
    if (gamma_th == 0.0) return 0.0;
    const double t = 2.0 * M_PI / alpha;
    return std::pow(gamma_th * power_ratio, 2.0 / alpha) * t / std::sin(t);
}

double theta_bs_quadrature(double alpha, double gamma_th, double power_ratio,
                           QuadratureSpec spec) {
    if (!(alpha > 2.0)) throw std::domain_error("theta_bs: alpha <= 2");
    if (gamma_th < 0.0) throw std::domain_error("theta_bs: gamma_th < 0");
    if (!(power_ratio > 0.0))
        throw std::domain_error("theta_bs: power_ratio <= 0");
    if (gamma_th == 0.0) return 0.0;
    const double p = 0.5 * alpha;
    return std::pow(gamma_th * power_ratio, 1.0 / p) *
           interference_integral(p, 0.0, spec);
}

double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol) {
    if (!(lo < hi)) throw std::domain_error("golden_section_max: lo >= hi");
    if (!(tol > 0.0)) throw std::domain_error("golden_section_max: tol <= 0");
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 >= f2) {  // ties shrink from the right toward lo
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

double bisect_max(const std::function<double(double)>& f, double lo, double hi,
                  double tol) {
    if (!(lo < hi)) throw std::domain_error("bisect_max: lo >= hi");
    if (!(tol > 0.0)) throw std::domain_error("bisect_max: tol <= 0");
    const double flo = f(lo);
    const double fmid = f(0.5 * (lo + hi));
    bool try_fast = fmid >= flo;  // non-monotonicity detected otherwise
    if (try_fast) {
        const double probe = std::max(hi - tol, 0.5 * (lo + hi));
        if (f(hi) > f(probe)) return hi;  // still climbing at the end
    }
    const double x = golden_section_max(f, lo, hi, tol);
    // snap to the best of the bracket ends and the interior estimate,
    // scanning left to right so exact ties resolve to the smaller argument
    double best_x = lo, best_f = flo;
    for (double cand : {x, hi}) {
        const double fc = f(cand);
        if (fc > best_f) {
            best_f = fc;
            best_x = cand;
        }
    }
    return best_x;
}

}  // namespace d2d
