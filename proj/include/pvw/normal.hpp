#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace pvw {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Standard normal density.
inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF. Total on the extended reals: Phi(-inf)=0, Phi(+inf)=1.
inline double norm_cdf(double x) {
    if (std::isnan(x)) return x;
    if (x == inf) return 1.0;
    if (x == -inf) return 0.0;
    // erfc keeps relative accuracy in the lower tail, where the weight
    // formulas are exponentially sensitive.
    static const double inv_sqrt2 = 0.7071067811865475244;
    return 0.5 * std::erfc(-x * inv_sqrt2);
}

namespace detail {

// Acklam's rational approximation to the normal quantile (~1e-9 accurate),
// used as the seed for a Halley refinement against norm_cdf.
inline double norm_quantile_approx(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    static const double p_low = 0.02425;

    if (p < p_low) {
        double u = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
               ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    double r = p - 0.5;
    double u = r * r;
    return (((((a[0] * u + a[1]) * u + a[2]) * u + a[3]) * u + a[4]) * u + a[5]) * r /
           (((((b[0] * u + b[1]) * u + b[2]) * u + b[3]) * u + b[4]) * u + 1.0);
}

}  // namespace detail

/// Inverse of norm_cdf on [0,1], with norm_quantile(0) = -inf, norm_quantile(1) = +inf.
inline double norm_quantile(double p) {
    if (std::isnan(p) || p < 0.0 || p > 1.0)
        throw std::domain_error("norm_quantile: p must lie in [0,1]");
    if (p == 0.0) return -inf;
    if (p == 1.0) return inf;
    if (p > 0.5) return -norm_quantile(1.0 - p);

    double x = detail::norm_quantile_approx(p);
    // One Halley step against the CDF.
    double dens = norm_pdf(x);
    if (dens > 0.0 && std::isfinite(x)) {
        double e = norm_cdf(x) - p;
        double u = e / dens;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

/// A sign-changing interval for a scalar root.
struct bracket {
    double lo, hi;
    double f_lo, f_hi;

    bracket(double lo_, double hi_, double f_lo_, double f_hi_)
        : lo(lo_), hi(hi_), f_lo(f_lo_), f_hi(f_hi_) {
        if (!(lo < hi))
            throw std::domain_error("bracket: lo must be < hi");
        if (f_lo * f_hi > 0.0)
            throw std::domain_error("bracket: f(lo) and f(hi) must differ in sign");
    }

    static bracket of(const std::function<double(double)>& f, double lo, double hi) {
        return bracket(lo, hi, f(lo), f(hi));
    }
};

struct convergence_error : std::runtime_error {
    double best;
    convergence_error(const std::string& what, double best_)
        : std::runtime_error(what), best(best_) {}
};

/// Root of a continuous monotone f inside a valid bracket.
///
/// Takes Newton steps when a derivative is supplied (secant otherwise) and
/// falls back to bisection whenever a trial point leaves the bracket, so the
/// iterate never escapes [lo, hi]. Stops when |f(x)| <= ftol or the bracket
/// width drops below xtol * max(1, |x|).
inline double solve_monotone(const std::function<double(double)>& f, bracket br,
                             double ftol = 1e-12, double xtol = 1e-12,
                             int max_iter = 200,
                             const std::function<double(double)>& df = {}) {
    if (br.f_lo == 0.0) return br.lo;
    if (br.f_hi == 0.0) return br.hi;

    double a = br.lo, b = br.hi, fa = br.f_lo, fb = br.f_hi;
    double x = 0.5 * (a + b);
    double fx = f(x);
    double prev_width = b - a;
    int stall = 0;

    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fx) <= ftol) return x;
        if (fx == 0.0) return x;

        // Shrink the bracket around the root.
        if ((fx > 0.0) == (fa > 0.0)) {
            a = x; fa = fx;
        } else {
            b = x; fb = fx;
        }
        if (b - a <= xtol * std::max(1.0, std::abs(x))) return x;

        // Force bisection if two rounds did not halve the bracket.
        if (b - a > 0.5 * prev_width) ++stall; else stall = 0;
        prev_width = b - a;

        double trial = std::numeric_limits<double>::quiet_NaN();
        if (stall < 2) {
            if (df) {
                double d = df(x);
                if (std::isfinite(d) && d != 0.0) trial = x - fx / d;
            }
            if (!std::isfinite(trial) && fb != fa)
                trial = (a * fb - b * fa) / (fb - fa);
        } else {
            stall = 0;
        }
        if (!std::isfinite(trial) || trial <= a || trial >= b)
            trial = 0.5 * (a + b);

        x = trial;
        fx = f(x);
    }
    throw convergence_error("solve_monotone: max_iter exceeded", x);
}

}  // namespace pvw
