#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pvw/normal.hpp"
#include "pvw/types.hpp"

namespace pvw {

/// Optional solver diagnostics for audit logging.
struct solve_diag {
    std::string case_taken;        // "small-q", "general-exact", "general-jump"
    int iterations = 0;
    std::size_t n_breakpoints = 0;
    std::vector<double> lambda_trace;
};

/// The optimal critical value c(eta, gamma; lambda): the smaller root of the
/// stationarity quadratic, i.e. the interior maximizer of
/// f(c) = Phi((c - eta)/gamma) - lambda * Phi(c).
///
/// For eta <= 0 the algebraically equivalent form
///     c = -(eta^2 + 2 gamma^2 log(gamma lambda)) / (gamma sqrt(disc) - eta)
/// is used; it is free of cancellation as sigma -> 0 and reproduces the
/// Spjotvoll limit c = eta/2 + log(lambda)/eta exactly at sigma = 0.
inline double critical_value(const prior_effect& eff, double lambda) {
    if (!(lambda > 0.0))
        throw std::domain_error("critical_value: lambda must be positive");
    const double eta = eff.eta;
    const double g = eff.gamma;
    const double s = eff.sigma2;  // gamma^2 - 1

    if (s <= 0.0) {
        // sigma = 0 limit.
        if (eta < 0.0) return 0.5 * eta + std::log(lambda) / eta;
        const double A0 = eta * eta + 2.0 * std::log(lambda);
        if (A0 > 0.0) return -inf;
        if (A0 < 0.0) return inf;
        return eta == 0.0 ? -1.0 : -inf;
    }

    const double L = std::log(g * lambda);
    double disc = eta * eta + 2.0 * s * L;
    if (disc < 0.0) {
        // Tolerance covers both relative cancellation and the absolute
        // rounding of log(gamma*lambda), which enters scaled by 2s.
        const double scale = eta * eta + std::abs(2.0 * s * L);
        if (disc > -1e-12 * scale - 1e-14 * (1.0 + s) - 1e-300)
            disc = 0.0;  // roundoff at lambda = l(eta, gamma)
        else
            throw std::domain_error(
                "critical_value: negative discriminant (lambda below l(eta,gamma))");
    }
    const double root = g * std::sqrt(disc);

    if (eta <= 0.0) {
        const double num = eta * eta + 2.0 * g * g * L;
        const double den = root - eta;
        if (den > 0.0) return -num / den;
        return -(eta + root) / s;  // eta == 0 and disc == 0
    }
    return -(eta + root) / s;
}

/// l(eta, gamma) = exp(-eta^2 / (2 (gamma^2-1))) / gamma: below this lambda
/// the Lagrangian term has no interior maximum (its supremum sits at +inf).
inline double lower_lambda(const prior_effect& eff) {
    if (!(eff.sigma2 > 0.0))
        throw std::domain_error("lower_lambda: gamma must exceed 1");
    return std::exp(-eff.eta * eff.eta / (2.0 * eff.sigma2)) / eff.gamma;
}

struct condition_check {
    bool holds;
    double slack;  // (1/J) sum Phi(c(eta_i, gamma_i; 1)) - q
};

/// Small-q applicability condition: q <= (1/J) sum_i Phi(c(eta_i, gamma_i; 1)).
inline condition_check check_small_q_condition(const std::vector<prior_effect>& effs,
                                               double q) {
    double sum = 0.0;
    for (const auto& e : effs) sum += norm_cdf(critical_value(e, 1.0));
    const double bound = effs.empty() ? 0.0 : sum / static_cast<double>(effs.size());
    return {q <= bound, bound - q};
}

struct simple_condition_check {
    bool holds;
    double z_abs;  // |z_{alpha/K}|
    int count;     // indices satisfying the two-sided bound
};

/// Sufficient condition for the small-q regime: K distinct indices with
/// negative eta_i and gamma_i^2 log(gamma_i^2)/|z_{alpha/K}| <= |eta_i| <= |z_{alpha/K}|.
inline simple_condition_check check_simple_condition(const std::vector<prior_effect>& effs,
                                                     double alpha, int K) {
    if (!(alpha > 0.0)) throw std::domain_error("check_simple_condition: alpha must be > 0");
    if (K < 1) throw std::domain_error("check_simple_condition: K must be >= 1");
    const double z_abs = std::abs(norm_quantile(alpha / K));
    int count = 0;
    for (const auto& e : effs) {
        if (!(e.eta < 0.0)) continue;
        const double g2 = e.gamma * e.gamma;
        const double lo = g2 * std::log(g2) / z_abs;
        const double abs_eta = -e.eta;
        if (lo <= abs_eta && abs_eta <= z_abs) ++count;
    }
    return {count >= K, z_abs, count};
}

namespace detail {

inline void validate_q(double q, const char* who) {
    if (!(q > 0.0 && q < 1.0))
        throw std::domain_error(std::string(who) + ": q must lie in (0,1)");
}

// Total objective sum_i Phi((Phi^-1(q w_i) - eta_i)/gamma_i).
inline double objective_total(const std::vector<double>& w,
                              const std::vector<prior_effect>& effs, double q) {
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        double p = std::clamp(q * w[i], 0.0, 1.0);
        double c = norm_quantile(p);
        total += norm_cdf((c - effs[i].eta) / effs[i].gamma);
    }
    return total;
}

}  // namespace detail

/// Exact Bayes weights under the small-q condition: w_i = Phi(c(eta_i,gamma_i;lambda))/q
/// with lambda >= 1 the unique dual value making the weights sum to J.
inline weight_solution bayes_weights_small_q(const std::vector<prior_effect>& effs,
                                             double q, solve_diag* diag = nullptr) {
    detail::validate_q(q, "bayes_weights_small_q");
    const std::size_t J = effs.size();
    if (J == 0) return {{}, 1.0, q, true, 0.0};
    const double Jd = static_cast<double>(J);

    auto weight_sum = [&](double lambda) {
        double sum = 0.0;
        for (const auto& e : effs) sum += norm_cdf(critical_value(e, lambda));
        return sum / q;
    };
    auto weight_sum_deriv = [&](double lambda) {
        double sum = 0.0;
        for (const auto& e : effs) {
            const double c1 = critical_value(e, lambda);
            double dc;
            if (e.sigma2 <= 0.0) {
                dc = e.eta < 0.0 ? 1.0 / (lambda * e.eta) : 0.0;
            } else {
                const double disc =
                    e.eta * e.eta + 2.0 * e.sigma2 * std::log(e.gamma * lambda);
                if (disc <= 0.0) return std::numeric_limits<double>::quiet_NaN();
                dc = -e.gamma / (lambda * std::sqrt(disc));
            }
            sum += norm_pdf(c1) * dc;
        }
        return sum / q;
    };

    const double W1 = weight_sum(1.0);
    if (W1 < Jd * (1.0 - 1e-12))
        throw std::domain_error(
            "bayes_weights_small_q: small-q condition fails; use bayes_weights_general");

    const double ftol = 1e-9 * Jd;
    double lambda;
    if (W1 - Jd <= ftol) {
        lambda = 1.0;
    } else {
        double hi = 2.0, Whi = weight_sum(hi);
        while (Whi >= Jd && hi < 1e300) {
            hi *= 2.0;
            Whi = weight_sum(hi);
        }
        auto f = [&](double lam) {
            double v = weight_sum(lam) - Jd;
            if (diag) diag->lambda_trace.push_back(lam);
            return v;
        };
        lambda = solve_monotone(f, bracket(1.0, hi, W1 - Jd, Whi - Jd), ftol, 1e-14,
                                200, weight_sum_deriv);
    }

    weight_solution sol;
    sol.weights.resize(J);
    for (std::size_t i = 0; i < J; ++i)
        sol.weights[i] = norm_cdf(critical_value(effs[i], lambda)) / q;
    sol.lambda = lambda;
    sol.q_star = q;
    sol.exact = true;
    sol.objective = detail::objective_total(sol.weights, effs, q);
    if (diag) {
        diag->case_taken = "small-q";
        diag->iterations = static_cast<int>(diag->lambda_trace.size());
    }
    return sol;
}

/// Breakpoint k(eta, gamma) in [l(eta,gamma), 1]: the dual value at which the
/// interior maximum of the Lagrangian term ties with its value at +inf.
inline double breakpoint_k(const prior_effect& eff) {
    double lo;
    if (eff.sigma2 > 0.0)
        lo = std::max(lower_lambda(eff) * (1.0 + 1e-10), 1e-300);
    else
        lo = 1e-300;

    auto d = [&](double lambda) {
        const double c1 = critical_value(eff, lambda);
        return lambda * norm_cdf(-c1) - norm_cdf(-(c1 - eff.eta) / eff.gamma);
    };
    const double dlo = d(lo);
    if (dlo >= 0.0) return lo;
    const double dhi = d(1.0);
    if (dhi <= 0.0) return 1.0;
    return solve_monotone(d, bracket(lo, 1.0, dlo, dhi), 1e-13, 1e-14, 200);
}

/// Bayes weights for arbitrary q in (0,1). Returns the exact solution when a
/// smooth dual interval contains one; otherwise places lambda at a breakpoint,
/// resolves the tied weight jumps by the cumulative rule, rescales, and
/// reports the nearby level q* with |q* - q| <= 1/(2J).
inline weight_solution bayes_weights_general(const std::vector<prior_effect>& effs,
                                             double q, solve_diag* diag = nullptr) {
    detail::validate_q(q, "bayes_weights_general");
    const std::size_t J = effs.size();
    if (J == 0) return {{}, 1.0, q, true, 0.0};
    const double Jd = static_cast<double>(J);
    const double cap = 1.0 / q;

    if (check_small_q_condition(effs, q).holds)
        return bayes_weights_small_q(effs, q, diag);

    std::vector<double> k(J), r(J);
    for (std::size_t i = 0; i < J; ++i) {
        k[i] = breakpoint_k(effs[i]);
        r[i] = norm_cdf(critical_value(effs[i], k[i])) / q;
    }

    std::vector<double> K(k);
    std::sort(K.begin(), K.end());
    K.erase(std::unique(K.begin(), K.end()), K.end());
    if (diag) diag->n_breakpoints = K.size();

    // Weight sums just right of lambda (tied indices smooth) and just left
    // (tied indices at the cap).
    auto w_minus = [&](double lambda) {
        double sum = 0.0;
        for (std::size_t i = 0; i < J; ++i)
            sum += lambda >= k[i] ? norm_cdf(critical_value(effs[i], lambda)) / q : cap;
        return sum;
    };
    auto w_plus = [&](double lambda) {
        double sum = 0.0;
        for (std::size_t i = 0; i < J; ++i)
            sum += lambda > k[i] ? norm_cdf(critical_value(effs[i], lambda)) / q : cap;
        return sum;
    };

    // Largest breakpoint with W+ still >= J (W+ is non-increasing along K).
    std::size_t lo = 0, hi = K.size() - 1;
    // w_plus(K[0]) = J/q >= J always.
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (w_plus(K[mid]) >= Jd) lo = mid; else hi = mid - 1;
    }
    const std::size_t j = lo;
    const double Kj = K[j];
    const double Wm = w_minus(Kj);

    weight_solution sol;
    sol.weights.resize(J);

    if (Wm >= Jd) {
        // Case 1: the root lies in the smooth interval starting at K[j].
        double b = (j + 1 < K.size()) ? K[j + 1] : std::max(2.0 * Kj, Kj + 1.0);
        double fb = w_minus(b) - Jd;
        while (fb > 0.0 && b < 1e300) {
            b *= 2.0;
            fb = w_minus(b) - Jd;
        }
        auto f = [&](double lam) {
            double v = w_minus(lam) - Jd;
            if (diag) diag->lambda_trace.push_back(lam);
            return v;
        };
        const double ftol = 1e-9 * Jd;
        double lambda = (Wm - Jd <= ftol)
                            ? Kj
                            : solve_monotone(f, bracket(Kj, b, Wm - Jd, fb), ftol, 1e-14, 200);
        for (std::size_t i = 0; i < J; ++i)
            sol.weights[i] =
                lambda >= k[i] ? norm_cdf(critical_value(effs[i], lambda)) / q : cap;
        sol.lambda = lambda;
        sol.q_star = q;
        sol.exact = true;
        if (diag) diag->case_taken = "general-exact";
    } else {
        // Case 2: J falls inside the jump at K[j]. Accumulate the tied jumps
        // in ascending index order until the cumulative sum would pass J.
        std::vector<std::size_t> tied;
        for (std::size_t i = 0; i < J; ++i)
            if (k[i] == Kj) tied.push_back(i);

        std::vector<char> at_cap(J, 0);
        double r_minus = Wm;
        std::size_t next = 0;
        while (next < tied.size()) {
            const double jump = cap - r[tied[next]];
            if (r_minus + jump > Jd) break;
            r_minus += jump;
            at_cap[tied[next]] = 1;
            ++next;
        }
        double w_star = r_minus;
        if (next < tied.size()) {
            const double r_plus = r_minus + (cap - r[tied[next]]);
            // Ties broken toward r_minus: q* <= q is the conservative side.
            if (r_plus - Jd < Jd - r_minus) {
                w_star = r_plus;
                at_cap[tied[next]] = 1;
            }
        }

        for (std::size_t i = 0; i < J; ++i) {
            double w;
            if (k[i] < Kj)
                w = norm_cdf(critical_value(effs[i], Kj)) / q;
            else if (k[i] > Kj)
                w = cap;
            else
                w = at_cap[i] ? cap : r[i];
            sol.weights[i] = w * Jd / w_star;
        }
        sol.lambda = Kj;
        sol.q_star = w_star * q / Jd;
        sol.exact = false;
        if (diag) diag->case_taken = "general-jump";
    }

    sol.objective = detail::objective_total(sol.weights, effs, sol.q_star);
    if (diag) diag->iterations = static_cast<int>(diag->lambda_trace.size());
    return sol;
}

}  // namespace pvw
