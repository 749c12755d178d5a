#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pvw {

/// Prior on one test's mean: mu ~ N(eta, sigma2). gamma is the marginal
/// standard deviation of the test statistic, gamma^2 = sigma2 + 1.
struct prior_effect {
    double eta = 0.0;
    double sigma2 = 1.0;
    double gamma = 0.0;

    prior_effect() : gamma(std::sqrt(2.0)) {}
    prior_effect(double eta_, double sigma2_) : eta(eta_), sigma2(sigma2_) {
        if (!(sigma2 >= 0.0))
            throw std::domain_error("prior_effect: sigma2 must be >= 0");
        gamma = std::sqrt(sigma2 + 1.0);
    }
};

/// Result of a weight solver. Weights sum to J; q_star is the per-test level
/// at which the weights are optimal (equals the requested q when exact).
struct weight_solution {
    std::vector<double> weights;
    double lambda = 0.0;
    double q_star = 0.0;
    bool exact = true;
    double objective = 0.0;  // attained value of the expected-power objective
};

/// Two-point mixture of means: fraction pi1 at M < 0, the rest at 0.
struct sparse_mixture {
    double pi1, pi0, M, q;

    sparse_mixture(double pi1_, double M_, double q_) : pi1(pi1_), pi0(1.0 - pi1_), M(M_), q(q_) {
        if (!(pi1 > 0.0 && pi1 < 1.0))
            throw std::domain_error("sparse_mixture: pi1 must lie in (0,1)");
        if (!(M < 0.0))
            throw std::domain_error("sparse_mixture: M must be negative");
        if (!(q > 0.0 && q < 1.0))
            throw std::domain_error("sparse_mixture: q must lie in (0,1)");
    }
};

/// Closed-form optimum for the sparse mixture: weights for the 0-class and
/// the M-class, and the attained per-test power.
struct sparse_solution {
    double w0, w1, power;
};

}  // namespace pvw
