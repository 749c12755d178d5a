// Acceptance gate: one criterion per test case, one printed PASS/FAIL line
// each. Tolerances are pinned here, not in a config file.
#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "pvw/pvw.hpp"

using namespace pvw;

namespace {

void report(int num, const std::string& desc, bool ok) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", num, desc.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

TEST_CASE("criterion 1: oracle equivalence on small instances") {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 gen(101);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> q_d(0.001, 0.3);
    double worst_gap = -inf;
    bool ok = true;
    for (int inst = 0; inst < 200; ++inst) {
        const int J = 2 + inst % 2;
        std::vector<prior_effect> effs;
        for (int i = 0; i < J; ++i) {
            const double s = std::abs(z(gen));
            effs.push_back(prior_effect(z(gen), s * s));
        }
        const double q = q_d(gen);
        auto sol = bayes_weights_general(effs, q);
        const double oracle_best =
            J == 2 ? oracle::grid_max_objective_j2(effs, sol.q_star, 1e-3, 1e-6)
                   : oracle::grid_max_objective_j3(effs, sol.q_star, 1e-3, 1e-6);
        const double gap = oracle_best - sol.objective;
        worst_gap = std::max(worst_gap, gap);
        if (gap > 1e-6) ok = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 120.0) ok = false;
    report(1, "solver matches brute-force oracle on 200 small instances (worst gap " +
                  fmt(worst_gap) + ", " + fmt(secs) + " s)", ok);
    CHECK(ok);
}

TEST_CASE("criterion 2: q* bound, cap and sum invariants on 1000 instances") {
    std::mt19937 gen(202);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> q_d(0.0, 1.0);
    std::uniform_int_distribution<int> J_d(5, 200);
    bool ok = true;
    double worst_qgap = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const int J = J_d(gen);
        std::vector<prior_effect> effs;
        for (int i = 0; i < J; ++i) {
            const double s = std::abs(z(gen));
            effs.push_back(prior_effect(z(gen), std::max(s * s, 1e-8)));
        }
        double q = q_d(gen);
        if (q <= 1e-9 || q >= 1.0 - 1e-9) q = 0.5;
        auto sol = bayes_weights_general(effs, q);
        const double qgap = std::abs(sol.q_star - q) * 2.0 * J;  // in units of 1/(2J)
        worst_qgap = std::max(worst_qgap, qgap);
        if (std::abs(sol.q_star - q) > 0.5 / J + 1e-12) ok = false;
        double sum = 0.0;
        for (double w : sol.weights) {
            if (w < 0.0 || w > (1.0 / sol.q_star) * (1.0 + 1e-9)) ok = false;
            sum += w;
        }
        if (std::abs(sum - J) > 1e-8 * J) ok = false;
    }
    report(2, "|q*-q| <= 1/(2J), weights in [0,1/q*], sum J (worst |q*-q| = " +
                  fmt(worst_qgap) + " x 1/(2J))", ok);
    CHECK(ok);
}

TEST_CASE("criterion 3: KKT stationarity under the small-q condition") {
    std::mt19937 gen(303);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> q_d(0.001, 0.05);
    bool ok = true;
    double worst_rel = 0.0;
    int done = 0;
    while (done < 100) {
        std::vector<prior_effect> effs;
        const int J = 3 + static_cast<int>(gen() % 20);
        for (int i = 0; i < J; ++i) {
            const double s = std::abs(z(gen)) + 0.05;
            effs.push_back(prior_effect(z(gen), s * s));
        }
        const double q = q_d(gen);
        if (!check_small_q_condition(effs, q).holds) continue;
        ++done;
        auto sol = bayes_weights_small_q(effs, q);
        for (int i = 0; i < J; ++i) {
            const double w = sol.weights[i];
            if (!(w > 1e-12 && w < 1.0 / q * (1.0 - 1e-12))) continue;
            const double c = norm_quantile(q * w);
            const double ratio =
                norm_pdf((c - effs[i].eta) / effs[i].gamma) / (effs[i].gamma * norm_pdf(c));
            const double rel = std::abs(ratio - sol.lambda) / sol.lambda;
            worst_rel = std::max(worst_rel, rel);
            if (rel > 1e-6) ok = false;
        }
    }
    report(3, "interior weights satisfy the stationarity ratio = lambda (worst rel err " +
                  fmt(worst_rel) + ")", ok);
    CHECK(ok);
}

TEST_CASE("criterion 4: Spjotvoll limit of the critical value") {
    bool ok = true;
    const double lambda = 2.0;
    double final_err_max = 0.0;
    for (double eta : {-0.5, -1.0, -2.0, -3.0}) {
        const double limit = 0.5 * eta + std::log(lambda) / eta;
        double prev = inf;
        for (double sigma : {1e-1, 1e-2, 1e-3, 1e-4}) {
            const double err =
                std::abs(critical_value(prior_effect(eta, sigma * sigma), lambda) - limit);
            if (err > prev) ok = false;
            prev = err;
        }
        final_err_max = std::max(final_err_max, prev);
        if (prev >= 1e-6) ok = false;
    }
    report(4, "c1 -> eta/2 + log(lambda)/eta monotonically, err < 1e-6 at sigma = 1e-4 "
              "(max final err " + fmt(final_err_max) + ")", ok);
    CHECK(ok);
}

TEST_CASE("criterion 5: sparse-mixture power matches Monte Carlo") {
    const int J = 50, reps = 100000;
    bool ok = true;
    int branch1 = 0, branch2 = 0, point = 0;
    double worst_z = 0.0;
    for (double q : {1e-3, 0.02}) {
        for (double pi1 : {0.02, 0.1, 0.2}) {
            for (double M : {-0.5, -1.0, -2.0, -3.0}) {
                if (point >= 20) break;
                ++point;
                sparse_mixture mix(pi1, M, q);
                auto sol = sparse_optimal(mix);
                (sol.w0 == 0.0 ? branch1 : branch2) += 1;

                const int n1 = static_cast<int>(std::lround(pi1 * J));
                std::vector<prior_effect> effs;
                std::vector<double> w;
                for (int i = 0; i < J; ++i) {
                    effs.push_back(prior_effect(i < n1 ? M : 0.0, 0.0));
                    w.push_back(i < n1 ? sol.w1 : sol.w0);
                }
                auto mc = monte_carlo_power(w, effs, q, reps, 9000 + point);
                const double se = std::max(*mc.mc_se, 1e-12);
                const double zscore = std::abs(*mc.mc_power - sol.power) / se;
                worst_z = std::max(worst_z, zscore);
                if (zscore > 3.0) ok = false;
            }
        }
    }
    if (branch1 < 5 || branch2 < 5) ok = false;
    report(5, "analytic p* within 3 SE of MC at 20 points (" + std::to_string(branch1) +
                  " branch-1, " + std::to_string(branch2) + " branch-2, worst |z| = " +
                  fmt(worst_z) + ")", ok);
    CHECK(ok);
}

TEST_CASE("criterion 6: power-ratio region minimum and hotspot maximum") {
    const auto t0 = std::chrono::steady_clock::now();
    const double q = 1e-3;
    double min_ratio = inf, max_ratio = -inf;
    for (int i = 0; i < 50; ++i) {
        const double M = -2.5 + (2.25 * i) / 49.0;
        for (int j = 0; j < 50; ++j) {
            const double pi1 = 0.4 * (j + 1) / 51.0;  // open interval (0, 0.4)
            sparse_mixture mix(pi1, M, q);
            min_ratio = std::min(min_ratio,
                                 sparse_optimal(mix).power / sparse_power_unweighted(mix));
        }
    }
    for (int i = 0; i < 50; ++i) {
        const double M = -4.0 + (3.92 * i) / 49.0;  // up to -0.08, M < 0 required
        for (int j = 0; j < 50; ++j) {
            const double pi1 = 0.5 * (j + 1) / 51.0;
            sparse_mixture mix(pi1, M, q);
            max_ratio = std::max(max_ratio,
                                 sparse_optimal(mix).power / sparse_power_unweighted(mix));
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok_min = min_ratio >= 1.5;
    const bool ok_max = max_ratio >= 3.0;
    const bool ok = ok_min && ok_max && secs < 10.0;
    report(6, "grid min >= 1.5 (measured " + fmt(min_ratio) + "), wider-grid max >= 3 "
              "(measured " + fmt(max_ratio) + ", " + fmt(secs) + " s)", ok);
    CHECK(ok_min);
    CHECK(ok_max);
    CHECK(secs < 10.0);
}

TEST_CASE("criterion 7: dispersion sweep peaks at the true phi") {
    const std::size_t J = 1000;
    const double q = 1e-2;
    int peak_at_one = 0;
    bool beats_all = true;
    for (int seed = 0; seed < 20; ++seed) {
        counter_rng rng(1000 + seed);
        std::vector<prior_effect> effs;
        std::vector<double> etas(J);
        for (std::size_t i = 0; i < J; ++i) {
            const double eta = rng.normal(0, i, 0);
            const double sigma = std::abs(rng.normal(0, i, 1));
            etas[i] = eta;
            effs.push_back(prior_effect(eta, sigma * sigma));
        }

        double best_phi = -1.0, best_power = -inf, power_at_one = 0.0, power_at_zero = 0.0;
        for (int step = 0; step <= 16; ++step) {
            const double phi = 0.25 * step;
            std::vector<double> w;
            if (phi == 0.0) {
                w = spjotvoll_weights(etas, q).weights;
            } else {
                std::vector<prior_effect> scaled;
                for (const auto& e : effs) scaled.push_back(prior_effect(e.eta, phi * e.sigma2));
                w = bayes_weights_general(scaled, q).weights;
            }
            const double p = average_power(w, effs, q);
            if (p > best_power) { best_power = p; best_phi = phi; }
            if (phi == 1.0) power_at_one = p;
            if (phi == 0.0) power_at_zero = p;
        }
        if (best_phi == 1.0) ++peak_at_one;

        const std::vector<double> ones(J, 1.0);
        const double unweighted = average_power(ones, effs, q);
        double best_exp = -inf, best_fil = -inf;
        for (int step = 0; step <= 8; ++step) {
            const double par = 0.5 * step;
            best_exp = std::max(best_exp,
                                average_power(exponential_weights(etas, par, q), effs, q));
            best_fil = std::max(
                best_fil,
                average_power(filter_weights(etas, filter_spec(-par, q)), effs, q));
        }
        if (!(power_at_one > unweighted && power_at_one > power_at_zero &&
              power_at_one > best_exp && power_at_one > best_fil))
            beats_all = false;
    }
    const bool ok = peak_at_one > 10 && beats_all;
    report(7, "phi = 1 is the sweep argmax in " + std::to_string(peak_at_one) +
                  "/20 seeds and beats unweighted/Spjotvoll/exponential/filter", ok);
    CHECK(ok);
}

TEST_CASE("criterion 8: sparse-design worst-case comparison") {
    const std::size_t J = 1000;
    const double q = 1e-2, m_small = -1e-3, m_large = -2.0;
    bool bayes_safe = true, spj_below = false;
    double worst_drop = 0.0;
    for (int step = 0; step <= 20; ++step) {
        const double pi1 = 0.005 * step;
        const auto n1 = static_cast<std::size_t>(std::lround(pi1 * J));
        std::vector<double> mus(J, m_small);
        for (std::size_t i = 0; i < n1; ++i) mus[i] = m_large;
        std::vector<prior_effect> effs;
        for (double mu : mus) effs.push_back(prior_effect(mu, 1.0));

        const std::vector<double> ones(J, 1.0);
        const auto w_bayes = bayes_weights_general(effs, q).weights;
        const auto w_spj = spjotvoll_weights(mus, q).weights;

        const double drop =
            deterministic_power(ones, mus, q) - deterministic_power(w_bayes, mus, q);
        worst_drop = std::max(worst_drop, drop);
        if (drop > 0.005) bayes_safe = false;
        if (average_power(w_spj, effs, q) < average_power(w_bayes, effs, q) - 1e-4)
            spj_below = true;
    }
    const bool ok = bayes_safe && spj_below;
    report(8, "Bayes never trails unweighted by > 0.005 deterministically (worst drop " +
                  fmt(worst_drop) + "); Spjotvoll falls below Bayes on the sweep", ok);
    CHECK(ok);
}

TEST_CASE("criterion 9: two-million-test weights run completes in 30 s") {
    const std::string in_path = "/tmp/pvw_accept_big.tsv";
    const std::string out_path = "/tmp/pvw_accept_big_w.tsv";
    {
        std::ofstream out(in_path);
        out << "id\tprior_z\tn_prior\tn_current\tp_current\n";
        char buf[128];
        for (int i = 0; i < 2000000; ++i) {
            const double eta = -0.5 - 3.0 * (i % 1000) / 1000.0;
            std::snprintf(buf, sizeof buf, "r%d\t%.4f\t10000\t10000\t0.5\n", i, eta);
            out << buf;
        }
    }
    const std::string cmd = std::string(PVWEIGHT_CLI_PATH) + " weights --input " + in_path +
                            " --output " + out_path + " --q 1e-6 > /dev/null 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ifstream check(out_path);
    std::string first;
    std::getline(check, first);
    const bool ok = rc == 0 && secs <= 30.0 && first.rfind("# q=", 0) == 0;
    report(9, "J = 2e6 weights command: exit " + std::to_string(rc) + ", " + fmt(secs) +
                  " s (limit 30 s)", ok);
    CHECK(ok);
    std::remove(in_path.c_str());
    std::remove(out_path.c_str());
}

TEST_CASE("criterion 10: error control under the global null") {
    const std::size_t J = 50;
    const double q = 0.01;
    const int reps = 10000;
    counter_rng rng(77);
    std::vector<prior_effect> effs;
    std::vector<double> etas(J), true_mu(J);
    for (std::size_t i = 0; i < J; ++i) {
        const double eta = rng.normal(0, i, 10);
        etas[i] = eta;
        effs.push_back(prior_effect(eta, 1.0));
        true_mu[i] = std::abs(eta);  // all true means >= 0: every rejection is false
    }

    bool ok = true;
    std::string detail;
    for (const std::string scheme :
         {"bayes", "spjotvoll", "exponential", "filter", "unweighted"}) {
        std::vector<double> w;
        double q_star = q;
        if (scheme == "bayes") {
            auto sol = bayes_weights_general(effs, q);
            w = sol.weights;
            q_star = sol.q_star;
        } else if (scheme == "spjotvoll") {
            w = spjotvoll_weights(etas, q).weights;
        } else if (scheme == "exponential") {
            w = exponential_weights(etas, 2.0, q);
        } else if (scheme == "filter") {
            w = filter_weights(etas, filter_spec(-1.0, q));
        } else {
            w.assign(J, 1.0);
        }

        double sum = 0.0, sum_sq = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            int rejections = 0;
            for (std::size_t i = 0; i < J; ++i) {
                const double t = true_mu[i] + rng.normal(rep, i, 20);
                if (norm_cdf(t) <= q_star * w[i]) ++rejections;
            }
            sum += rejections;
            sum_sq += static_cast<double>(rejections) * rejections;
        }
        const double mean = sum / reps;
        const double var = std::max(0.0, (sum_sq - reps * mean * mean) / (reps - 1.0));
        const double se = std::sqrt(var / reps);
        const double budget = J * q_star + 3.0 * se;
        if (mean > budget) ok = false;
        detail += scheme + "=" + fmt(mean) + "/" + fmt(J * q_star) + " ";
    }
    report(10, "expected false rejections within J q* + 3 SE for every scheme (" + detail +
                   ")", ok);
    CHECK(ok);
}

TEST_CASE("criterion 11: simple-condition z value") {
    std::vector<prior_effect> effs(10, prior_effect(-1.0, 1.0));
    const double z = check_simple_condition(effs, 0.01, 10).z_abs;
    const bool ok = std::abs(z - 3.7190) <= 1e-3;
    report(11, "|z_{alpha/K}| at K = 10, alpha = 0.01 equals 3.7190 +/- 1e-3 (measured " +
                   fmt(z) + ")", ok);
    CHECK(ok);
}
