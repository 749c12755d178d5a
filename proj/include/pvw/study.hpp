#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvw/normal.hpp"
#include "pvw/types.hpp"

namespace pvw {

/// One hypothesis record from a study file. Exactly one of prior_z / prior_p
/// is populated; sample sizes may come from the file or a global default.
struct study_row {
    std::string id;
    std::optional<double> prior_z;
    std::optional<double> prior_p;
    int prior_sign = 0;  // 0 = unknown, +1 / -1 when a sign column is present
    std::optional<double> n_prior;
    std::optional<double> n_current;
    double p_current = 1.0;
};

struct test_outcome {
    std::string id;
    double weight = 0.0;
    double weighted_threshold = 0.0;
    bool rejected = false;
};

enum class tail_mode { one_tailed, two_tailed };

/// Global fallbacks for per-row sample sizes (meta-analyses often publish a
/// single effective N); per-row values take precedence.
struct map_config {
    double phi = 1.0;
    tail_mode tail = tail_mode::one_tailed;
    std::optional<double> default_n_prior;
    std::optional<double> default_n_current;
};

/// iGWAS mapping of prior summary statistics to prior effects:
/// eta_i = sqrt(N_i/N_0i) T_0i, sigma_i^2 = phi N_i/N_0i. Two-tailed mode
/// duplicates each test with the sign-mirrored mean (pairs are adjacent in
/// the output, + tail first).
inline std::vector<prior_effect> map_prior(const std::vector<study_row>& rows,
                                           const map_config& cfg) {
    if (!(cfg.phi > 0.0)) throw std::domain_error("map_prior: phi must be > 0");

    std::vector<prior_effect> out;
    out.reserve(cfg.tail == tail_mode::two_tailed ? 2 * rows.size() : rows.size());
    for (const auto& row : rows) {
        const double n0 = row.n_prior ? *row.n_prior
                                      : (cfg.default_n_prior ? *cfg.default_n_prior : 0.0);
        const double n1 = row.n_current
                              ? *row.n_current
                              : (cfg.default_n_current ? *cfg.default_n_current : 0.0);
        if (!(n0 > 0.0) || !(n1 > 0.0))
            throw std::domain_error("map_prior: row '" + row.id +
                                    "': sample sizes must be positive");

        double t0;
        if (row.prior_z) {
            t0 = *row.prior_z;
        } else if (row.prior_p) {
            // T_0i = Phi^-1(P_0i / 2): negative magnitude; sign column flips it.
            const double mag = norm_quantile(*row.prior_p / 2.0);
            t0 = row.prior_sign > 0 ? -mag : mag;
        } else {
            throw std::domain_error("map_prior: row '" + row.id +
                                    "' has neither prior_z nor prior_p");
        }

        const double ratio = n1 / n0;
        const double eta = std::sqrt(ratio) * t0;
        const double sigma2 = cfg.phi * ratio;
        out.emplace_back(eta, sigma2);
        if (cfg.tail == tail_mode::two_tailed) out.emplace_back(-eta, sigma2);
    }
    return out;
}

/// Weighted Bonferroni: reject when p <= q* w. With 2 weights per row
/// (two-tailed duplication) a row is rejected if either tail rejects, which is
/// the same as thresholding at the larger of the two weights.
inline std::vector<test_outcome> weighted_bonferroni(const std::vector<study_row>& rows,
                                                     const weight_solution& sol) {
    const std::size_t J = rows.size();
    std::size_t per_row;
    if (sol.weights.size() == J)
        per_row = 1;
    else if (sol.weights.size() == 2 * J)
        per_row = 2;
    else
        throw std::domain_error("weighted_bonferroni: weight count does not match rows");

    std::vector<test_outcome> out(J);
    for (std::size_t i = 0; i < J; ++i) {
        double w = sol.weights[per_row * i];
        if (per_row == 2) w = std::max(w, sol.weights[2 * i + 1]);
        out[i].id = rows[i].id;
        out[i].weight = w;
        out[i].weighted_threshold = sol.q_star * w;
        out[i].rejected = rows[i].p_current <= out[i].weighted_threshold;
    }
    return out;
}

/// Weighted Benjamini-Hochberg step-up on the reweighted p-values P_i/w_i.
/// Zero-weight tests are never rejected.
inline std::vector<test_outcome> weighted_bh(const std::vector<study_row>& rows,
                                             const std::vector<double>& weights,
                                             double q_fdr) {
    const std::size_t J = rows.size();
    std::size_t per_row;
    if (weights.size() == J)
        per_row = 1;
    else if (weights.size() == 2 * J)
        per_row = 2;
    else
        throw std::domain_error("weighted_bh: weight count does not match rows");
    if (!(q_fdr > 0.0 && q_fdr < 1.0))
        throw std::domain_error("weighted_bh: q_fdr must lie in (0,1)");

    const std::size_t n_tests = weights.size();
    const double n = static_cast<double>(n_tests);
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - n) > 1e-6 * n)
        throw std::domain_error("weighted_bh: weights must sum to the number of tests");

    std::vector<double> ratio(n_tests);
    for (std::size_t t = 0; t < n_tests; ++t) {
        const double p = rows[t / per_row].p_current;
        ratio[t] = weights[t] > 0.0 ? p / weights[t] : inf;
    }
    std::vector<double> sorted(ratio);
    std::sort(sorted.begin(), sorted.end());
    std::size_t r = 0;
    for (std::size_t t = n_tests; t > 0; --t) {
        if (sorted[t - 1] <= static_cast<double>(t) * q_fdr / n) {
            r = t;
            break;
        }
    }
    const double cut = r > 0 ? static_cast<double>(r) * q_fdr / n : -1.0;

    std::vector<test_outcome> out(J);
    for (std::size_t i = 0; i < J; ++i) {
        double w = weights[per_row * i];
        bool rej = ratio[per_row * i] <= cut;
        if (per_row == 2) {
            w = std::max(w, weights[2 * i + 1]);
            rej = rej || ratio[2 * i + 1] <= cut;
        }
        out[i].id = rows[i].id;
        out[i].weight = w;
        out[i].weighted_threshold = std::max(0.0, w * cut);
        out[i].rejected = rej;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Delimited file IO

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline double parse_double(const std::string& tok, const std::string& where) {
    double v;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw std::runtime_error(where + ": malformed number '" + tok + "'");
    return v;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Read a study TSV: '#' comment lines, a case-insensitive header, then one
/// row per hypothesis. Errors carry the offending line number.
inline std::vector<study_row> read_study(std::istream& in, const std::string& name = "<stream>") {
    static const char* accepted =
        "id, prior_z, prior_p, prior_sign, n_prior, n_current, p_current";

    std::string line;
    long lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_tabs(line);
        break;
    }
    if (header.empty()) return {};

    int col_id = -1, col_z = -1, col_p = -1, col_sign = -1, col_n0 = -1, col_n1 = -1,
        col_pc = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string h = detail::lower(header[c]);
        if (h == "id") col_id = static_cast<int>(c);
        else if (h == "prior_z") col_z = static_cast<int>(c);
        else if (h == "prior_p") col_p = static_cast<int>(c);
        else if (h == "prior_sign") col_sign = static_cast<int>(c);
        else if (h == "n_prior") col_n0 = static_cast<int>(c);
        else if (h == "n_current") col_n1 = static_cast<int>(c);
        else if (h == "p_current") col_pc = static_cast<int>(c);
        else
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": unknown column '" + header[c] +
                                     "' (accepted: " + accepted + ")");
    }
    if (col_id < 0 || col_pc < 0 || (col_z < 0 && col_p < 0))
        throw std::runtime_error(name + ": header must name id, p_current and one of "
                                        "prior_z / prior_p");
    if (col_z >= 0 && col_p >= 0)
        throw std::runtime_error(name + ": prior_z and prior_p are mutually exclusive");

    std::vector<study_row> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tok = detail::split_tabs(line);
        const std::string where = name + ":" + std::to_string(lineno);
        if (tok.size() != header.size())
            throw std::runtime_error(where + ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(tok.size()));
        study_row row;
        row.id = tok[col_id];
        if (col_z >= 0) row.prior_z = detail::parse_double(tok[col_z], where);
        if (col_p >= 0) {
            row.prior_p = detail::parse_double(tok[col_p], where);
            if (!(*row.prior_p >= 0.0 && *row.prior_p <= 1.0))
                throw std::runtime_error(where + ": row '" + row.id +
                                         "': prior_p outside [0,1]");
        }
        if (col_sign >= 0) {
            const std::string& s = tok[col_sign];
            if (s == "+" || s == "+1") row.prior_sign = 1;
            else if (s == "-" || s == "-1") row.prior_sign = -1;
            else
                throw std::runtime_error(where + ": prior_sign must be one of +, -, +1, -1");
        }
        if (col_n0 >= 0) {
            row.n_prior = detail::parse_double(tok[col_n0], where);
            if (!(*row.n_prior > 0.0))
                throw std::runtime_error(where + ": row '" + row.id +
                                         "': n_prior must be positive");
        }
        if (col_n1 >= 0) {
            row.n_current = detail::parse_double(tok[col_n1], where);
            if (!(*row.n_current > 0.0))
                throw std::runtime_error(where + ": row '" + row.id +
                                         "': n_current must be positive");
        }
        row.p_current = detail::parse_double(tok[col_pc], where);
        if (!(row.p_current >= 0.0 && row.p_current <= 1.0))
            throw std::runtime_error(where + ": row '" + row.id +
                                     "': p_current outside [0,1]");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<study_row> read_study(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_study: cannot open '" + path + "'");
    return read_study(in, path);
}

inline void write_study(std::ostream& out, const std::vector<study_row>& rows) {
    const bool use_z = rows.empty() || rows.front().prior_z.has_value();
    const bool has_sign = !rows.empty() && rows.front().prior_sign != 0;
    out << "id\t" << (use_z ? "prior_z" : "prior_p");
    if (has_sign) out << "\tprior_sign";
    out << "\tn_prior\tn_current\tp_current\n";
    for (const auto& r : rows) {
        out << r.id << '\t'
            << detail::fmt17(use_z ? r.prior_z.value() : r.prior_p.value());
        if (has_sign) out << '\t' << (r.prior_sign > 0 ? "+1" : "-1");
        out << '\t' << detail::fmt17(r.n_prior.value()) << '\t'
            << detail::fmt17(r.n_current.value()) << '\t' << detail::fmt17(r.p_current)
            << '\n';
    }
}

inline void write_study(const std::string& path, const std::vector<study_row>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_study: cannot open '" + path + "'");
    write_study(out, rows);
}

/// Run metadata recorded as '#'-prefixed lines at the top of every output.
struct run_metadata {
    double q = 0.0;
    double q_star = 0.0;
    double phi = 0.0;
    double lambda = 0.0;
    std::string scheme;
    bool exact = true;
};

inline void write_metadata(std::ostream& out, const run_metadata& meta) {
    out << "# q=" << detail::fmt17(meta.q) << " q_star=" << detail::fmt17(meta.q_star)
        << " phi=" << detail::fmt17(meta.phi) << " lambda=" << detail::fmt17(meta.lambda)
        << " scheme=" << meta.scheme << " exact=" << (meta.exact ? "true" : "false")
        << "\n";
}

inline void write_outcomes(std::ostream& out, const std::vector<test_outcome>& outcomes,
                           const run_metadata& meta) {
    write_metadata(out, meta);
    out << "id\tweight\tthreshold\trejected\n";
    for (const auto& o : outcomes)
        out << o.id << '\t' << detail::fmt17(o.weight) << '\t'
            << detail::fmt17(o.weighted_threshold) << '\t' << (o.rejected ? 1 : 0) << '\n';
}

inline void write_outcomes(const std::string& path, const std::vector<test_outcome>& outcomes,
                           const run_metadata& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_outcomes: cannot open '" + path + "'");
    write_outcomes(out, outcomes, meta);
}

inline void write_weights(std::ostream& out, const std::vector<std::string>& ids,
                          const std::vector<double>& weights, const run_metadata& meta) {
    write_metadata(out, meta);
    out << "id\tweight\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << '\t' << detail::fmt17(weights[i]) << '\n';
}

}  // namespace pvw
