#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pvw/normal.hpp"
#include "pvw/types.hpp"

namespace pvw {

/// Spjotvoll weights for exactly known negative means:
/// w(mu) = Phi(mu/2 + c/mu)/q with c normalizing the sum to J.
///
/// The formula presumes mu_i < 0; entries >= 0 are clamped to -1e-8 and
/// counted in *n_clamped when the caller supplies it.
inline weight_solution spjotvoll_weights(std::vector<double> mus, double q,
                                         int* n_clamped = nullptr) {
    if (!(q > 0.0 && q < 1.0))
        throw std::domain_error("spjotvoll_weights: q must lie in (0,1)");
    const std::size_t J = mus.size();
    if (n_clamped) *n_clamped = 0;
    if (J == 0) return {{}, 1.0, q, true, 0.0};
    const double Jd = static_cast<double>(J);

    const std::vector<double> mus_orig = mus;
    for (auto& mu : mus) {
        if (mu >= 0.0) {
            mu = -1e-8;
            if (n_clamped) ++*n_clamped;
        }
    }

    auto weight_sum = [&](double c) {
        double sum = 0.0;
        for (double mu : mus) sum += norm_cdf(0.5 * mu + c / mu);
        return sum / q;
    };
    auto f = [&](double c) { return weight_sum(c) - Jd; };

    // f is decreasing in c: f -> J/q - J >= 0 as c -> -inf, f -> -J as c -> +inf.
    double lo = -1.0, hi = 1.0;
    double flo = f(lo), fhi = f(hi);
    while (flo < 0.0 && lo > -1e300) { lo *= 2.0; flo = f(lo); }
    while (fhi > 0.0 && hi < 1e300) { hi *= 2.0; fhi = f(hi); }
    const double c = solve_monotone(f, bracket(lo, hi, flo, fhi), 1e-9 * Jd, 1e-14, 200);

    weight_solution sol;
    sol.weights.resize(J);
    for (std::size_t i = 0; i < J; ++i)
        sol.weights[i] = norm_cdf(0.5 * mus[i] + c / mus[i]) / q;
    sol.lambda = std::exp(c);  // c = log(lambda) in the sigma -> 0 limit
    sol.q_star = q;
    sol.exact = true;
    double obj = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        double p = std::min(q * sol.weights[i], 1.0);
        obj += norm_cdf(norm_quantile(p) - mus_orig[i]);
    }
    sol.objective = obj;
    return sol;
}

/// Closed-form optimal weights and power for the two-point sparse mixture.
inline sparse_solution sparse_optimal(const sparse_mixture& mix) {
    const double absM = -mix.M;
    const double half = norm_cdf(-0.5 * absM);
    sparse_solution sol{};
    if (mix.pi1 * half > mix.q) {
        sol.w0 = 0.0;
        sol.w1 = 1.0 / mix.pi1;
        sol.power = mix.pi1 * norm_cdf(norm_quantile(mix.q / mix.pi1) + absM);
    } else {
        sol.w0 = (mix.q - mix.pi1 * half) / (mix.q * mix.pi0);
        sol.w1 = half / mix.q;
        sol.power = mix.q + mix.pi1 * (norm_cdf(0.5 * absM) - half);
    }
    return sol;
}

}  // namespace pvw
