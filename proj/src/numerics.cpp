#include "palab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "palab/errors.hpp"

namespace palab::numerics {

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // Stop once the requested tolerance drops below roundoff of the panel.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, noise)) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
std::optional<double> beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return std::nullopt;
}

double log_prefactor(double a, double b, double x) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
           b * std::log1p(-x);
}

// I_x(a, b) by direct quadrature of the beta density.
double incomplete_beta_quadrature(double a, double b, double x) {
    const double norm = beta_function(a, b);
    auto density = [a, b, norm](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0) / norm;
    };
    return adaptive_simpson(density, 0.0, x, 1e-13);
}

// Returns the pair (I_x(a,b), 1 - I_x(a,b)) with whichever side is small
// computed directly.
std::pair<double, double> incomplete_beta_pair(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta requires a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta requires x in [0, 1]");
    if (x == 0.0) return {0.0, 1.0};
    if (x == 1.0) return {1.0, 0.0};
    const double front = std::exp(log_prefactor(a, b, x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        if (auto cf = beta_continued_fraction(a, b, x)) {
            const double lower = front * *cf / a;
            return {lower, 1.0 - lower};
        }
    } else {
        if (auto cf = beta_continued_fraction(b, a, 1.0 - x)) {
            const double upper = front * *cf / b;
            return {1.0 - upper, upper};
        }
    }
    const double lower = incomplete_beta_quadrature(a, b, x);
    return {lower, 1.0 - lower};
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double beta_function(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double incomplete_beta(double a, double b, double x) { return incomplete_beta_pair(a, b, x).first; }

double incomplete_beta_complement(double a, double b, double x) {
    return incomplete_beta_pair(a, b, x).second;
}

}  // namespace palab::numerics
