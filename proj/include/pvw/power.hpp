#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvw/normal.hpp"
#include "pvw/spjotvoll.hpp"
#include "pvw/types.hpp"

namespace pvw {

struct power_report {
    std::string scheme_name;
    double analytic_power = 0.0;  // per-test average
    std::optional<double> mc_power;
    std::optional<double> mc_se;
    std::optional<int> n_reps;
};

/// Per-test average of Phi(Phi^-1(q w_i) - mu_i): the deterministic power of
/// weighted Bonferroni when the means are known exactly.
inline double deterministic_power(const std::vector<double>& weights,
                                  const std::vector<double>& mus, double q) {
    if (weights.size() != mus.size())
        throw std::domain_error("deterministic_power: length mismatch");
    if (weights.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double p = std::clamp(q * weights[i], 0.0, 1.0);
        sum += norm_cdf(norm_quantile(p) - mus[i]);
    }
    return sum / static_cast<double>(weights.size());
}

/// Per-test average of Phi((Phi^-1(q w_i) - eta_i)/gamma_i): the prior-averaged
/// power of weighted Bonferroni.
inline double average_power(const std::vector<double>& weights,
                            const std::vector<prior_effect>& effs, double q) {
    if (weights.size() != effs.size())
        throw std::domain_error("average_power: length mismatch");
    if (weights.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double p = std::clamp(q * weights[i], 0.0, 1.0);
        sum += norm_cdf((norm_quantile(p) - effs[i].eta) / effs[i].gamma);
    }
    return sum / static_cast<double>(weights.size());
}

/// Power of unweighted Bonferroni in the sparse mixture:
/// pi0 q + pi1 Phi(Phi^-1(q) + |M|).
inline double sparse_power_unweighted(const sparse_mixture& mix) {
    const double absM = -mix.M;
    return mix.pi0 * mix.q + mix.pi1 * norm_cdf(norm_quantile(mix.q) + absM);
}

/// Ratio p*/p_unif over an (M, pi1) grid; rows follow M_grid, columns pi1_grid.
inline std::vector<std::vector<double>> power_ratio_grid(const std::vector<double>& M_grid,
                                                         const std::vector<double>& pi1_grid,
                                                         double q) {
    if (M_grid.empty() || pi1_grid.empty())
        throw std::domain_error("power_ratio_grid: grids must be nonempty");
    std::vector<std::vector<double>> out(M_grid.size(),
                                         std::vector<double>(pi1_grid.size()));
    for (std::size_t i = 0; i < M_grid.size(); ++i) {
        for (std::size_t j = 0; j < pi1_grid.size(); ++j) {
            sparse_mixture mix(pi1_grid[j], M_grid[i], q);
            out[i][j] = sparse_optimal(mix).power / sparse_power_unweighted(mix);
        }
    }
    return out;
}

/// Counter-based generator: every variate is a pure function of
/// (seed, replicate, test, stream), so results are identical under any
/// parallel execution order.
class counter_rng {
  public:
    explicit counter_rng(std::uint64_t seed) : seed_(seed) {}

    double uniform(std::uint64_t rep, std::uint64_t test, std::uint64_t stream) const {
        std::uint64_t h = mix64(seed_ ^ 0x2545F4914F6CDD1DULL);
        h = mix64(h + rep * 0x9E3779B97F4A7C15ULL);
        h = mix64(h + test * 0xD1B54A32D192ED03ULL);
        h = mix64(h + stream);
        return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal(std::uint64_t rep, std::uint64_t test, std::uint64_t stream) const {
        return norm_quantile(uniform(rep, test, stream));
    }

  private:
    static std::uint64_t mix64(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ULL;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBULL;
        x ^= x >> 31;
        return x;
    }

    std::uint64_t seed_;
};

/// Monte-Carlo estimate of the average power: draw mu ~ N(eta, sigma2),
/// T ~ N(mu, 1), reject when Phi(T) <= q w. Deterministic given the seed.
inline power_report monte_carlo_power(const std::vector<double>& weights,
                                      const std::vector<prior_effect>& effs, double q,
                                      int n_reps, std::uint64_t seed,
                                      const std::string& scheme_name = "") {
    if (weights.size() != effs.size())
        throw std::domain_error("monte_carlo_power: length mismatch");
    if (n_reps < 1) throw std::domain_error("monte_carlo_power: n_reps must be >= 1");

    const std::size_t J = weights.size();
    counter_rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (int rep = 0; rep < n_reps; ++rep) {
        std::size_t rejections = 0;
        for (std::size_t i = 0; i < J; ++i) {
            double mu = effs[i].eta;
            if (effs[i].sigma2 > 0.0)
                mu += std::sqrt(effs[i].sigma2) * rng.normal(rep, i, 0);
            const double t = mu + rng.normal(rep, i, 1);
            if (norm_cdf(t) <= q * weights[i]) ++rejections;
        }
        const double x = J == 0 ? 0.0 : static_cast<double>(rejections) / static_cast<double>(J);
        sum += x;
        sum_sq += x * x;
    }

    power_report rep;
    rep.scheme_name = scheme_name;
    const double n = static_cast<double>(n_reps);
    const double mean = sum / n;
    rep.mc_power = mean;
    rep.n_reps = n_reps;
    if (n_reps > 1) {
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        rep.mc_se = std::sqrt(var / n);
    } else {
        rep.mc_se = 0.0;
    }
    rep.analytic_power = average_power(weights, effs, q);
    return rep;
}

}  // namespace pvw
