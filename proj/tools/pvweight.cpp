// pvweight: p-value weighting for multiple hypothesis testing.
//
// Subcommands:
//   weights          compute a weight vector for a study file
//   test             run weighted Bonferroni / Benjamini-Hochberg on a study file
//   simulate         power-comparison simulation sweeps (CSV output)
//   sparse-power     power ratio of optimal vs unweighted testing on an (M, pi1) grid
//   check-condition  report whether the exact small-q solver applies

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pvw/pvw.hpp"

namespace {

struct options {
    std::string input, output;
    double q = -1.0;
    double alpha = -1.0;
    std::string scheme = "bayes";
    double phi = 1.0;
    double beta = -1.0;
    double filter_M = 1.0;  // sentinel > 0 = unset
    std::string tail = "one";
    std::string procedure = "bonferroni";
    std::string design = "dispersion";
    std::uint64_t seed = 0;
    int reps = 10000;
    int K = 10;
    double n_prior_default = -1.0;
    double n_current_default = -1.0;
    bool verbose = false;
};

double resolve_q(const options& opt, std::size_t J) {
    double q = opt.q;
    if (opt.alpha > 0.0) {
        if (opt.q > 0.0)
            throw CLI::ValidationError("--q and --alpha are mutually exclusive");
        if (J == 0) throw CLI::ValidationError("--alpha requires a nonempty input");
        q = opt.alpha / static_cast<double>(J);
    }
    if (!(q > 0.0 && q < 1.0))
        throw CLI::ValidationError("per-test level q must lie in (0,1); give --q or --alpha");
    return q;
}

void validate_scheme_params(const options& opt) {
    if (opt.beta >= 0.0 && opt.scheme != "exponential")
        throw CLI::ValidationError("--beta only applies to --scheme exponential");
    if (opt.filter_M <= 0.0 && opt.scheme != "filter")
        throw CLI::ValidationError("--filter-M only applies to --scheme filter");
}

pvw::map_config make_map_config(const options& opt) {
    pvw::map_config cfg;
    cfg.phi = opt.phi;
    cfg.tail = opt.tail == "two" ? pvw::tail_mode::two_tailed : pvw::tail_mode::one_tailed;
    if (opt.n_prior_default > 0.0) cfg.default_n_prior = opt.n_prior_default;
    if (opt.n_current_default > 0.0) cfg.default_n_current = opt.n_current_default;
    return cfg;
}

pvw::weight_solution solve_scheme(const options& opt, const std::vector<pvw::prior_effect>& effs,
                                  double q, pvw::solve_diag* diag) {
    const std::size_t J = effs.size();
    if (opt.scheme == "bayes") return pvw::bayes_weights_general(effs, q, diag);

    std::vector<double> etas(J);
    for (std::size_t i = 0; i < J; ++i) etas[i] = effs[i].eta;

    pvw::weight_solution sol;
    sol.q_star = q;
    sol.exact = true;
    if (opt.scheme == "spjotvoll") {
        int clamped = 0;
        sol = pvw::spjotvoll_weights(etas, q, &clamped);
        if (clamped > 0)
            std::cerr << "pvweight: warning: " << clamped
                      << " nonnegative prior mean(s) clamped to -1e-8 for Spjotvoll weights\n";
        return sol;
    }
    if (opt.scheme == "unweighted") {
        sol.weights.assign(J, 1.0);
    } else if (opt.scheme == "exponential") {
        const double beta = opt.beta >= 0.0 ? opt.beta : 2.0;
        sol.weights = pvw::exponential_weights(etas, beta, q);
    } else if (opt.scheme == "filter") {
        const double M = opt.filter_M <= 0.0 ? opt.filter_M : 0.0;
        sol.weights = pvw::filter_weights(etas, pvw::filter_spec(M, q));
    } else {
        throw CLI::ValidationError("unknown scheme '" + opt.scheme + "'");
    }
    sol.objective = static_cast<double>(J) * pvw::average_power(sol.weights, effs, q);
    return sol;
}

void log_diag(const options& opt, const pvw::solve_diag& diag) {
    if (!opt.verbose) return;
    std::cerr << "pvweight: solver=" << diag.case_taken << " iterations=" << diag.iterations
              << " breakpoints=" << diag.n_breakpoints << "\n";
    if (!diag.lambda_trace.empty()) {
        std::cerr << "pvweight: lambda trajectory:";
        for (double l : diag.lambda_trace) std::cerr << ' ' << l;
        std::cerr << "\n";
    }
}

int cmd_weights(const options& opt) {
    validate_scheme_params(opt);
    const auto rows = pvw::read_study(opt.input);
    const auto cfg = make_map_config(opt);
    const auto effs = pvw::map_prior(rows, cfg);
    const double q = resolve_q(opt, effs.size());

    pvw::solve_diag diag;
    const auto sol = solve_scheme(opt, effs, q, &diag);
    log_diag(opt, diag);

    std::vector<std::string> ids;
    ids.reserve(effs.size());
    for (const auto& row : rows) {
        if (cfg.tail == pvw::tail_mode::two_tailed) {
            ids.push_back(row.id + ":+");
            ids.push_back(row.id + ":-");
        } else {
            ids.push_back(row.id);
        }
    }

    pvw::run_metadata meta{q, sol.q_star, opt.phi, sol.lambda, opt.scheme, sol.exact};
    std::ofstream out(opt.output);
    if (!out) throw std::runtime_error("cannot open output '" + opt.output + "'");
    pvw::write_weights(out, ids, sol.weights, meta);
    return 0;
}

int cmd_test(const options& opt) {
    validate_scheme_params(opt);
    const auto rows = pvw::read_study(opt.input);
    const auto cfg = make_map_config(opt);
    const auto effs = pvw::map_prior(rows, cfg);
    const double q = resolve_q(opt, effs.size());

    pvw::solve_diag diag;
    const auto sol = solve_scheme(opt, effs, q, &diag);
    log_diag(opt, diag);

    std::vector<pvw::test_outcome> outcomes;
    if (opt.procedure == "bonferroni") {
        outcomes = pvw::weighted_bonferroni(rows, sol);
    } else if (opt.procedure == "bh") {
        const double q_fdr =
            opt.alpha > 0.0 ? opt.alpha : q * static_cast<double>(effs.size());
        if (!(q_fdr > 0.0 && q_fdr < 1.0))
            throw CLI::ValidationError("BH level Jq must lie in (0,1); give --alpha");
        outcomes = pvw::weighted_bh(rows, sol.weights, q_fdr);
    } else {
        throw CLI::ValidationError("unknown procedure '" + opt.procedure + "'");
    }

    pvw::run_metadata meta{q, sol.q_star, opt.phi, sol.lambda, opt.scheme, sol.exact};
    pvw::write_outcomes(opt.output, outcomes, meta);
    return 0;
}

// Fig.-3-style study: J=1000 random priors, power of each scheme as a function
// of its tuning parameter.
void simulate_dispersion(const options& opt, std::ostream& out) {
    const std::size_t J = 1000;
    const double q = opt.q > 0.0 ? opt.q : 1e-2;
    pvw::counter_rng rng(opt.seed);

    std::vector<pvw::prior_effect> effs;
    std::vector<double> etas(J);
    effs.reserve(J);
    for (std::size_t i = 0; i < J; ++i) {
        const double eta = rng.normal(0, i, 0);
        const double sigma = std::abs(rng.normal(0, i, 1));
        etas[i] = eta;
        effs.emplace_back(eta, sigma * sigma);
    }
    const std::vector<double> ones(J, 1.0);
    const double unweighted = pvw::average_power(ones, effs, q);

    out << "param,unweighted,bayes,exponential,filter\n";
    for (int step = 0; step <= 16; ++step) {
        const double param = 0.25 * step;

        std::vector<double> w_bayes;
        if (param == 0.0) {
            w_bayes = pvw::spjotvoll_weights(etas, q).weights;
        } else {
            std::vector<pvw::prior_effect> scaled;
            scaled.reserve(J);
            for (const auto& e : effs) scaled.emplace_back(e.eta, param * e.sigma2);
            w_bayes = pvw::bayes_weights_general(scaled, q).weights;
        }
        const auto w_exp = pvw::exponential_weights(etas, param, q);
        const auto w_fil = pvw::filter_weights(etas, pvw::filter_spec(-param, q));

        out << param << ',' << unweighted << ',' << pvw::average_power(w_bayes, effs, q)
            << ',' << pvw::average_power(w_exp, effs, q) << ','
            << pvw::average_power(w_fil, effs, q) << '\n';
    }
}

// Fig.-4-style study: sparse means, schemes evaluated under the objective
// they do not maximize.
void simulate_sparse(const options& opt, std::ostream& out) {
    const std::size_t J = 1000;
    const double q = opt.q > 0.0 ? opt.q : 1e-2;
    const double m_small = -1e-3, m_large = -2.0;

    out << "pi1,det_unweighted,det_spjotvoll,det_bayes,avg_unweighted,avg_spjotvoll,avg_bayes\n";
    for (int step = 0; step <= 20; ++step) {
        const double pi1 = 0.005 * step;
        const auto n1 = static_cast<std::size_t>(std::lround(pi1 * J));

        std::vector<double> mus(J, m_small);
        for (std::size_t i = 0; i < n1; ++i) mus[i] = m_large;
        std::vector<pvw::prior_effect> effs;
        effs.reserve(J);
        for (double mu : mus) effs.emplace_back(mu, 1.0);

        const std::vector<double> ones(J, 1.0);
        const auto w_spj = pvw::spjotvoll_weights(mus, q).weights;
        const auto w_bayes = pvw::bayes_weights_general(effs, q).weights;

        out << pi1 << ',' << pvw::deterministic_power(ones, mus, q) << ','
            << pvw::deterministic_power(w_spj, mus, q) << ','
            << pvw::deterministic_power(w_bayes, mus, q) << ','
            << pvw::average_power(ones, effs, q) << ','
            << pvw::average_power(w_spj, effs, q) << ','
            << pvw::average_power(w_bayes, effs, q) << '\n';
    }
}

int cmd_simulate(const options& opt) {
    std::ofstream out(opt.output);
    if (!out) throw std::runtime_error("cannot open output '" + opt.output + "'");
    out.precision(17);
    if (opt.design == "dispersion")
        simulate_dispersion(opt, out);
    else if (opt.design == "sparse")
        simulate_sparse(opt, out);
    else
        throw CLI::ValidationError("unknown design '" + opt.design + "'");
    return 0;
}

int cmd_sparse_power(const options& opt, double m_min, double m_max, double pi1_min,
                     double pi1_max, int grid_n) {
    const double q = opt.q > 0.0 ? opt.q : 1e-3;
    std::ofstream out(opt.output);
    if (!out) throw std::runtime_error("cannot open output '" + opt.output + "'");
    out.precision(17);
    out << "M,pi1,p_star,p_unif,ratio\n";
    for (int i = 0; i < grid_n; ++i) {
        const double M = m_min + (m_max - m_min) * i / std::max(1, grid_n - 1);
        for (int j = 0; j < grid_n; ++j) {
            const double pi1 = pi1_min + (pi1_max - pi1_min) * j / std::max(1, grid_n - 1);
            pvw::sparse_mixture mix(pi1, M, q);
            const double p_star = pvw::sparse_optimal(mix).power;
            const double p_unif = pvw::sparse_power_unweighted(mix);
            out << M << ',' << pi1 << ',' << p_star << ',' << p_unif << ','
                << p_star / p_unif << '\n';
        }
    }
    return 0;
}

int cmd_check_condition(const options& opt) {
    const auto rows = pvw::read_study(opt.input);
    const auto cfg = make_map_config(opt);
    const auto effs = pvw::map_prior(rows, cfg);
    const double q = resolve_q(opt, effs.size());

    const auto cond = pvw::check_small_q_condition(effs, q);
    const double alpha = q * static_cast<double>(effs.size());
    const auto simple = pvw::check_simple_condition(effs, alpha, opt.K);

    std::cout << "tests=" << effs.size() << " q=" << q << "\n"
              << "small_q_condition=" << (cond.holds ? "true" : "false")
              << " slack=" << cond.slack << "\n"
              << "solver=" << (cond.holds ? "small-q (exact)" : "general (near-exact)") << "\n"
              << "simple_condition=" << (simple.holds ? "true" : "false")
              << " K=" << opt.K << " z_abs=" << simple.z_abs
              << " qualifying_indices=" << simple.count << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-value weighting for multiple hypothesis testing"};
    app.require_subcommand(1);

    options opt;
    double m_min = -4.0, m_max = -0.05, pi1_min = 0.005, pi1_max = 0.45;
    int grid_n = 50;

    auto add_shared = [&](CLI::App* cmd, bool needs_input, bool needs_output) {
        auto* in = cmd->add_option("--input", opt.input, "input study TSV");
        auto* outp = cmd->add_option("--output", opt.output, "output file");
        if (needs_input) in->required();
        if (needs_output) outp->required();
        cmd->add_option("--q", opt.q, "per-test significance level q");
        cmd->add_option("--alpha", opt.alpha, "family-wise level alpha; sets q = alpha/J");
        cmd->add_flag("--verbose", opt.verbose, "log solver internals to stderr");
    };
    auto add_scheme = [&](CLI::App* cmd) {
        cmd->add_option("--scheme", opt.scheme, "bayes|spjotvoll|exponential|filter|unweighted")
            ->check(CLI::IsMember({"bayes", "spjotvoll", "exponential", "filter", "unweighted"}));
        cmd->add_option("--phi", opt.phi, "dispersion multiplier on prior variances");
        cmd->add_option("--beta", opt.beta, "exponential tilt (scheme=exponential)");
        cmd->add_option("--filter-M", opt.filter_M, "filter threshold M <= 0 (scheme=filter)");
        cmd->add_option("--tail", opt.tail, "one|two")->check(CLI::IsMember({"one", "two"}));
        cmd->add_option("--n-prior", opt.n_prior_default, "global prior sample size");
        cmd->add_option("--n-current", opt.n_current_default, "global current sample size");
    };

    auto* weights = app.add_subcommand("weights", "compute p-value weights");
    add_shared(weights, true, true);
    add_scheme(weights);

    auto* test = app.add_subcommand("test", "run weighted multiple testing");
    add_shared(test, true, true);
    add_scheme(test);
    test->add_option("--procedure", opt.procedure, "bonferroni|bh")
        ->check(CLI::IsMember({"bonferroni", "bh"}));

    auto* simulate = app.add_subcommand("simulate", "power comparison sweeps");
    add_shared(simulate, false, true);
    simulate->add_option("--design", opt.design, "dispersion|sparse")
        ->check(CLI::IsMember({"dispersion", "sparse"}));
    simulate->add_option("--seed", opt.seed, "random seed")->required();
    simulate->add_option("--reps", opt.reps, "Monte-Carlo replicates");

    auto* sparse = app.add_subcommand("sparse-power", "optimal vs unweighted power ratio grid");
    add_shared(sparse, false, true);
    sparse->add_option("--m-min", m_min, "smallest M");
    sparse->add_option("--m-max", m_max, "largest M (< 0)");
    sparse->add_option("--pi1-min", pi1_min, "smallest pi1");
    sparse->add_option("--pi1-max", pi1_max, "largest pi1");
    sparse->add_option("--grid", grid_n, "grid points per axis");

    auto* check = app.add_subcommand("check-condition", "report which solver applies");
    add_shared(check, true, false);
    add_scheme(check);
    check->add_option("--K", opt.K, "K for the simple sufficient condition");

    CLI11_PARSE(app, argc, argv);

    try {
        if (weights->parsed()) return cmd_weights(opt);
        if (test->parsed()) return cmd_test(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (sparse->parsed())
            return cmd_sparse_power(opt, m_min, m_max, pi1_min, pi1_max, grid_n);
        if (check->parsed()) return cmd_check_condition(opt);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "pvweight: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "pvweight: error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
