#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pvw {

/// Exponential weights w_i proportional to exp(beta |eta_i|), scaled to sum
/// to J, truncated at 1/q with the excess pushed down the descending order.
inline std::vector<double> exponential_weights(const std::vector<double>& etas,
                                               double beta, double q) {
    if (!(beta >= 0.0))
        throw std::domain_error("exponential_weights: beta must be >= 0");
    if (!(q > 0.0 && q < 1.0))
        throw std::domain_error("exponential_weights: q must lie in (0,1)");
    const std::size_t J = etas.size();
    if (J == 0) return {};
    const double Jd = static_cast<double>(J);

    // Shift exponents by the max to avoid overflow before normalizing.
    double max_exp = 0.0;
    for (double eta : etas) max_exp = std::max(max_exp, beta * std::abs(eta));
    std::vector<double> w(J);
    double sum = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        w[i] = std::exp(beta * std::abs(etas[i]) - max_exp);
        sum += w[i];
    }
    for (auto& x : w) x *= Jd / sum;

    // Cap at 1/q, moving excess to the next weight in descending order
    // (ties resolved by ascending index).
    std::vector<std::size_t> order(J);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (w[a] != w[b]) return w[a] > w[b];
        return a < b;
    });
    const double cap = 1.0 / q;
    double excess = 0.0;
    for (std::size_t pos = 0; pos < J; ++pos) {
        double& x = w[order[pos]];
        x += excess;
        excess = 0.0;
        if (x > cap) {
            excess = x - cap;
            x = cap;
        }
    }
    // Cap-sum J/q >= J, so no excess can survive the walk.
    return w;
}

struct filter_spec {
    double threshold_M;
    double q;

    filter_spec(double threshold_M_, double q_) : threshold_M(threshold_M_), q(q_) {
        if (!(threshold_M <= 0.0))
            throw std::domain_error("filter_spec: threshold M must be <= 0");
        if (!(q > 0.0 && q < 1.0))
            throw std::domain_error("filter_spec: q must lie in (0,1)");
    }
};

/// Filtering weights: equal weight J/|S| on the selected set S = {i : eta_i <= M},
/// zero elsewhere. If fewer than ceil(Jq) pass the threshold, the ceil(Jq)
/// smallest eta_i are selected instead (ties by ascending index).
inline std::vector<double> filter_weights(const std::vector<double>& etas,
                                          const filter_spec& spec) {
    const std::size_t J = etas.size();
    if (J == 0) return {};
    const double Jd = static_cast<double>(J);

    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < J; ++i)
        if (etas[i] <= spec.threshold_M) selected.push_back(i);

    const auto min_count = static_cast<std::size_t>(std::ceil(Jd * spec.q - 1e-9));
    if (selected.size() < min_count) {
        std::vector<std::size_t> order(J);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (etas[a] != etas[b]) return etas[a] < etas[b];
            return a < b;
        });
        selected.assign(order.begin(), order.begin() + min_count);
    }

    std::vector<double> w(J, 0.0);
    const double share = Jd / static_cast<double>(selected.size());
    for (std::size_t i : selected) w[i] = share;
    return w;
}

}  // namespace pvw
