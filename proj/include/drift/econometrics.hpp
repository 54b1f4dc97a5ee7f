#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "drift/core.hpp"
#include "drift/table.hpp"

namespace drift::econ {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Integer-coded grouping of observations.
struct Factor {
    std::vector<int> codes;
    int levels = 0;
};

/// Codes in order of first appearance.
inline Factor factorize(const Table::Column& col, std::span<const std::size_t> rows) {
    Factor f;
    f.codes.reserve(rows.size());
    if (col.is_text) {
        std::unordered_map<std::string, int> seen;
        for (auto r : rows) {
            auto [it, ins] = seen.try_emplace(col.text[r], f.levels);
            if (ins) ++f.levels;
            f.codes.push_back(it->second);
        }
    } else {
        std::map<double, int> seen;
        for (auto r : rows) {
            auto [it, ins] = seen.try_emplace(col.num[r], f.levels);
            if (ins) ++f.levels;
            f.codes.push_back(it->second);
        }
    }
    return f;
}

/// Intersection of several groupings (cell of the cross-classification).
inline Factor intersect(std::span<const Factor* const> fs) {
    Factor out;
    if (fs.empty()) return out;
    const std::size_t n = fs[0]->codes.size();
    out.codes.resize(n);
    std::vector<std::int64_t> key(n, 0);
    for (const Factor* f : fs)
        for (std::size_t i = 0; i < n; ++i) key[i] = key[i] * f->levels + f->codes[i];
    std::unordered_map<std::int64_t, int> seen;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, ins] = seen.try_emplace(key[i], out.levels);
        if (ins) ++out.levels;
        out.codes[i] = it->second;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixed-effect absorption

struct Absorbed {
    MatrixXd data;
    int iterations = 0;
    std::size_t singletons = 0;
};

namespace detail {

inline void demean_once(MatrixXd& m, const Factor& f, const VectorXd* w, std::vector<double>& sums,
                        std::vector<double>& wsum) {
    const auto n = m.rows();
    wsum.assign(static_cast<std::size_t>(f.levels), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) wsum[f.codes[i]] += w ? (*w)(i) : 1.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        sums.assign(static_cast<std::size_t>(f.levels), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) sums[f.codes[i]] += (w ? (*w)(i) : 1.0) * m(i, c);
        for (Eigen::Index i = 0; i < n; ++i) m(i, c) -= sums[f.codes[i]] / wsum[f.codes[i]];
    }
}

}  // namespace detail

/// Residualises the columns of `data` on the group indicators of every factor by
/// alternating within-group demeaning. Stops when the largest change in a sweep
/// falls below `tol`; throws after `max_iter` sweeps.
inline Absorbed absorb_fixed_effects(MatrixXd data, std::span<const Factor> fes, const VectorXd* weights = nullptr,
                                     double tol = 1e-10, int max_iter = 10000) {
    Absorbed out;
    for (const auto& f : fes) {
        if (static_cast<Eigen::Index>(f.codes.size()) != data.rows()) fail("absorb_fixed_effects: label count mismatch");
        std::vector<int> count(static_cast<std::size_t>(f.levels), 0);
        for (int c : f.codes) ++count[c];
        for (int c : f.codes) out.singletons += count[c] == 1;
    }
    std::vector<double> sums, wsum;
    if (fes.empty()) {
        out.data = std::move(data);
        return out;
    }
    if (fes.size() == 1) {
        detail::demean_once(data, fes[0], weights, sums, wsum);
        out.data = std::move(data);
        out.iterations = 1;
        return out;
    }
    for (int it = 1; it <= max_iter; ++it) {
        MatrixXd before = data;
        for (const auto& f : fes) detail::demean_once(data, f, weights, sums, wsum);
        const double change = (data - before).cwiseAbs().maxCoeff();
        if (change < tol) {
            out.data = std::move(data);
            out.iterations = it;
            return out;
        }
    }
    fail("absorb_fixed_effects: no convergence after {} sweeps (tol {})", max_iter, tol);
}

// ---------------------------------------------------------------------------
// Least squares

struct OlsFit {
    std::vector<int> kept;     // indices of columns used
    std::vector<int> dropped;  // collinear or empty columns
    VectorXd beta;             // for kept columns
    VectorXd residuals;
    MatrixXd bread;            // (X'X)^-1 over kept columns
};

/// Least squares with sequential collinearity screening: a column is dropped when
/// its residual on the previously kept columns is below `rel_tol` times its
/// reference norm (defaults to its own norm).
inline OlsFit ols(const MatrixXd& X, const VectorXd& y, std::span<const std::string> names = {},
                  std::span<const double> reference_norms = {}, double rel_tol = 1e-9) {
    OlsFit fit;
    const auto n = X.rows();
    MatrixXd Q(n, 0);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        VectorXd r = X.col(j);
        const double ref = reference_norms.empty() ? r.norm() : std::max(reference_norms[j], r.norm());
        for (int pass = 0; pass < 2 && Q.cols() > 0; ++pass) r -= Q * (Q.transpose() * r);
        const double rn = r.norm();
        if (ref == 0.0 || rn <= rel_tol * ref) {
            fit.dropped.push_back(static_cast<int>(j));
            log(LogLevel::warn, "ols: dropping collinear column '{}'",
                names.empty() ? fmt::format("#{}", j) : names[static_cast<std::size_t>(j)]);
            continue;
        }
        Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
        Q.col(Q.cols() - 1) = r / rn;
        fit.kept.push_back(static_cast<int>(j));
    }
    if (fit.kept.empty()) fail("ols: no usable regressor column");
    MatrixXd Xk(n, static_cast<Eigen::Index>(fit.kept.size()));
    for (std::size_t k = 0; k < fit.kept.size(); ++k) Xk.col(static_cast<Eigen::Index>(k)) = X.col(fit.kept[k]);
    Eigen::HouseholderQR<MatrixXd> qr(Xk);
    fit.beta = qr.solve(y);
    fit.residuals = y - Xk * fit.beta;
    const Eigen::Index p = Xk.cols();
    MatrixXd R = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
    fit.bread = Rinv * Rinv.transpose();
    return fit;
}

// ---------------------------------------------------------------------------
// Cluster-robust variance

struct Vcov {
    MatrixXd raw;   // before PSD repair
    MatrixXd vcov;  // reported
    std::vector<int> clusters;  // per dimension
    bool psd_repaired = false;
};

/// One sandwich term: c * B (sum_g s_g s_g') B with CR1 factor
/// c = G/(G-1) * (N-1)/(N-K).
inline MatrixXd sandwich_term(const MatrixXd& X, const VectorXd& e, const MatrixXd& bread, const Factor& g) {
    const auto n = X.rows();
    const auto k = X.cols();
    MatrixXd S = MatrixXd::Zero(g.levels, k);
    for (Eigen::Index i = 0; i < n; ++i) S.row(g.codes[i]) += X.row(i) * e(i);
    const double G = g.levels;
    const double c = G / (G - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k);
    return c * bread * (S.transpose() * S) * bread;
}

/// Cluster-robust VCOV. One dimension gives the CR1 sandwich; several use the
/// inclusion-exclusion sum over all non-empty intersections with sign (-1)^(r+1),
/// followed by truncation of negative eigenvalues. No dimension gives HC1.
inline Vcov cluster_vcov(const MatrixXd& X, const VectorXd& e, const MatrixXd& bread, std::span<const Factor> dims) {
    if (dims.size() > 3) fail("cluster_vcov: at most 3 cluster dimensions");
    Vcov out;
    const auto n = X.rows();
    if (dims.empty()) {
        Factor each;
        each.levels = static_cast<int>(n);
        each.codes.resize(static_cast<std::size_t>(n));
        std::iota(each.codes.begin(), each.codes.end(), 0);
        out.raw = sandwich_term(X, e, bread, each);
        out.vcov = out.raw;
        return out;
    }
    for (const auto& d : dims) {
        if (d.levels < 2) fail("cluster_vcov: a cluster dimension has only {} cluster", d.levels);
        out.clusters.push_back(d.levels);
    }
    const int nd = static_cast<int>(dims.size());
    out.raw = MatrixXd::Zero(X.cols(), X.cols());
    for (int mask = 1; mask < (1 << nd); ++mask) {
        std::vector<const Factor*> members;
        for (int d = 0; d < nd; ++d)
            if (mask & (1 << d)) members.push_back(&dims[static_cast<std::size_t>(d)]);
        const Factor inter = members.size() == 1 ? *members[0] : intersect(members);
        const double sign = members.size() % 2 == 1 ? 1.0 : -1.0;
        out.raw += sign * sandwich_term(X, e, bread, inter);
    }
    out.raw = 0.5 * (out.raw + out.raw.transpose());
    out.vcov = out.raw;
    if (nd > 1) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(out.raw);
        if (es.eigenvalues().minCoeff() < 0.0) {
            VectorXd ev = es.eigenvalues().cwiseMax(0.0);
            out.vcov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
            out.vcov = 0.5 * (out.vcov + out.vcov.transpose());
            out.psd_repaired = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quantile bins

/// Quantile bins of a column. Ascending bin b covers (edge_{b-1}, edge_b]; with
/// `descending` the numbering is reversed so bin 1 holds the largest values.
struct BinSet {
    std::string column;
    int k = 10;
    bool descending = false;
    int reference = 10;
    std::vector<double> edges;  // k-1 inverse-ECDF quantiles, ascending

    int assign(double v) const {
        const int asc = 1 + static_cast<int>(std::count_if(edges.begin(), edges.end(), [v](double e) { return v > e; }));
        return descending ? k + 1 - asc : asc;
    }
};

inline BinSet quantile_bins(std::span<const double> values, int k, bool descending = false,
                            std::optional<int> reference = std::nullopt, std::string column = {}) {
    if (k < 2) fail("quantile_bins: need k >= 2");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const auto distinct = static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
    if (distinct < k)
        fail("quantile_bins: column '{}' has {} distinct values, fewer than {} bins; use a smaller k", column, distinct,
             k);
    s.assign(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    BinSet b;
    b.column = std::move(column);
    b.k = k;
    b.descending = descending;
    b.reference = reference.value_or(k);
    if (b.reference < 1 || b.reference > k) fail("quantile_bins: reference bin {} outside 1..{}", b.reference, k);
    const std::size_t n = s.size();
    for (int q = 1; q < k; ++q) {
        const std::size_t rank = (n * static_cast<std::size_t>(q) + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
        b.edges.push_back(s[std::max<std::size_t>(rank, 1) - 1]);
    }
    return b;
}

/// Indicator columns for every non-reference bin, in bin order.
inline std::vector<std::pair<int, VectorXd>> bin_indicators(const BinSet& b, std::span<const double> values) {
    std::vector<std::pair<int, VectorXd>> out;
    for (int bin = 1; bin <= b.k; ++bin) {
        if (bin == b.reference) continue;
        VectorXd d = VectorXd::Zero(static_cast<Eigen::Index>(values.size()));
        out.emplace_back(bin, std::move(d));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int bin = b.assign(values[i]);
        if (bin == b.reference) continue;
        const int slot = bin < b.reference ? bin - 1 : bin - 2;
        out[static_cast<std::size_t>(slot)].second(static_cast<Eigen::Index>(i)) = 1.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Specifications

struct BinDef {
    std::string column;
    int k = 10;
    bool descending = false;
    std::optional<int> reference;
};

struct RegressionSpec {
    std::string name;
    std::string panel = "births";
    std::string outcome;
    std::vector<std::string> terms;    // col | a:b | i.col | i.col:b
    std::vector<BinDef> bins;
    std::vector<std::string> fe;       // col or a^b
    std::vector<std::string> cluster;  // up to 3
    std::string filter;                // col OP value, OP in > >= < <= == !=
    double scale = 1.0;
    std::string weight;

    void validate() const {
        if (outcome.empty()) fail("spec '{}': outcome is required", name);
        if (terms.empty()) fail("spec '{}': at least one term is required", name);
        if (cluster.size() > 3) fail("spec '{}': at most 3 cluster columns", name);
        for (const auto& f : fe)
            if (f.empty()) fail("spec '{}': empty fixed-effect label", name);
    }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& x : out) {
        while (!x.empty() && std::isspace(static_cast<unsigned char>(x.front()))) x.erase(0, 1);
        while (!x.empty() && std::isspace(static_cast<unsigned char>(x.back()))) x.pop_back();
    }
    std::erase_if(out, [](const std::string& x) { return x.empty(); });
    return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
    return s;
}

}  // namespace detail

/// Parses the key = value spec format. `{source}` expands to `source`.
inline RegressionSpec parse_spec(std::string_view text, std::string_view source = "local") {
    RegressionSpec s;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::replace_all(line, "{source}", source);
        auto eq = line.find('=');
        auto trimmed = detail::split_list(line, '\n');
        if (trimmed.empty()) continue;
        if (eq == std::string::npos) fail("spec line {}: expected key = value", line_no);
        auto key = detail::split_list(line.substr(0, eq), ',');
        const std::string value = line.substr(eq + 1);
        if (key.size() != 1) fail("spec line {}: malformed key", line_no);
        const auto& k = key[0];
        auto list = detail::split_list(value, ',');
        auto scalar = [&] { return list.empty() ? std::string{} : list[0]; };
        if (k == "name") s.name = scalar();
        else if (k == "panel") s.panel = scalar();
        else if (k == "outcome") s.outcome = scalar();
        else if (k == "terms") s.terms = list;
        else if (k == "fe") s.fe = list;
        else if (k == "cluster") s.cluster = list;
        else if (k == "filter") s.filter = scalar();
        else if (k == "weight") s.weight = scalar();
        else if (k == "scale") {
            auto v = parse_double(scalar());
            if (!v) fail("spec line {}: scale must be a number", line_no);
            s.scale = *v;
        } else if (k == "bins") {
            for (const auto& item : list) {
                auto parts = detail::split_list(item, ':');
                if (parts.empty()) fail("spec line {}: malformed bins entry", line_no);
                BinDef b;
                b.column = parts[0];
                for (std::size_t i = 1; i < parts.size(); ++i) {
                    if (parts[i] == "desc") b.descending = true;
                    else if (parts[i] == "asc") b.descending = false;
                    else if (parts[i].rfind("ref=", 0) == 0) b.reference = std::stoi(parts[i].substr(4));
                    else b.k = std::stoi(parts[i]);
                }
                s.bins.push_back(b);
            }
        } else {
            fail("spec line {}: unknown key '{}'", line_no, k);
        }
    }
    s.validate();
    return s;
}

/// Shipped specifications. `{source}` selects the exposure source.
inline const std::map<std::string, std::string>& presets() {
    static const std::map<std::string, std::string> p = {
        {"eq1",
         "name = eq1\npanel = births\noutcome = lbw\nterms = log_mp_{source}_pregnancy\n"
         "fe = admin1, country_month\ncluster = admin1\nscale = 1000\n"},
        {"eq2",
         "name = eq2\npanel = births\noutcome = lbw\n"
         "terms = log_mp_{source}_preconception, log_mp_{source}_trimester1, log_mp_{source}_trimester2, "
         "log_mp_{source}_trimester3, log_mp_{source}_postpartum\n"
         "fe = admin1, country_month\ncluster = admin1\nscale = 1000\n"},
        {"eq5",
         "name = eq5\npanel = passthrough\noutcome = log_mp_receiver\nbins = score:10:desc\n"
         "terms = i.score:log_mp_sender, i.score, log_mp_sender\nfe = pair, month\n"
         "cluster = sender, receiver, month\nfilter = score>0\nscale = 1\n"},
        {"table2_seafood",
         "name = table2_seafood\npanel = births\noutcome = lbw\n"
         "terms = log_mp_{source}_pregnancy, log_mp_{source}_pregnancy:log_seafood_spending, log_seafood_spending\n"
         "fe = admin1, country_month\ncluster = admin1\nscale = 1000\n"},
        {"table2_fishing",
         "name = table2_fishing\npanel = births\noutcome = lbw\n"
         "terms = log_mp_{source}_pregnancy, log_mp_{source}_pregnancy:log_fishing_hours, log_fishing_hours\n"
         "fe = admin1, country_month\ncluster = admin1\nscale = 1000\n"},
        {"table3_aod",
         "name = table3_aod\npanel = coastal\noutcome = log_aod\n"
         "terms = log_mp_{source}, log_mp_{source}:log_evaporation, log_evaporation\n"
         "fe = cell, country_month\ncluster = cell\nscale = 1\n"},
        {"appx_t1_exporters",
         "name = appx_t1_exporters\npanel = births\noutcome = lbw\n"
         "terms = log_mp_{source}_pregnancy, log_mp_exporters_pregnancy\n"
         "fe = admin1, country_month\ncluster = admin1\nscale = 1000\n"},
    };
    return p;
}

inline RegressionSpec preset(std::string_view name, std::string_view source = "local") {
    auto it = presets().find(std::string(name));
    if (it == presets().end()) {
        std::string names;
        for (const auto& [k, v] : presets()) names += (names.empty() ? "" : ", ") + k;
        fail("unknown regression spec '{}'; available presets: {}", name, names);
    }
    return parse_spec(it->second, source);
}

// ---------------------------------------------------------------------------
// Estimation

struct Coefficient {
    std::string term;
    double estimate = 0.0;
    double se = 0.0;
    double t = 0.0;
    double p = 0.0;
};

struct RegressionResult {
    std::string spec;
    std::vector<Coefficient> coefficients;
    std::vector<std::string> dropped;
    MatrixXd vcov;
    std::size_t n = 0;
    std::vector<int> clusters;
    int fe_iterations = 0;
    std::size_t singletons = 0;
    double r2_within = 0.0;
    bool degenerate = false;
    bool psd_repaired = false;
    std::map<std::string, BinSet> bins;

    const Coefficient& coef(std::string_view term) const {
        for (const auto& c : coefficients)
            if (c.term == term) return c;
        fail("result '{}': no coefficient for term '{}'", spec, term);
    }
    bool has(std::string_view term) const {
        return std::any_of(coefficients.begin(), coefficients.end(), [&](const auto& c) { return c.term == term; });
    }

    std::string to_csv() const {
        std::string out = "term,estimate,se,t,p,n,clusters_dim1,clusters_dim2,clusters_dim3\n";
        for (const auto& c : coefficients) {
            out += fmt::format("{},{},{},{},{},{}", c.term, format_double(c.estimate), format_double(c.se),
                               std::isnan(c.t) ? std::string("NA") : format_double(c.t),
                               std::isnan(c.p) ? std::string("NA") : format_double(c.p), n);
            for (int d = 0; d < 3; ++d)
                out += "," + (d < static_cast<int>(clusters.size()) ? std::to_string(clusters[d]) : std::string());
            out += '\n';
        }
        return out;
    }
};

namespace detail {

inline bool row_passes(const Table& t, std::string_view filter, std::size_t r) {
    static constexpr std::string_view ops[] = {">=", "<=", "==", "!=", ">", "<"};
    for (auto op : ops) {
        auto pos = filter.find(op);
        if (pos == std::string_view::npos) continue;
        auto col_name = split_list(filter.substr(0, pos), ',');
        auto val = split_list(filter.substr(pos + op.size()), ',');
        if (col_name.size() != 1 || val.size() != 1) fail("filter '{}': malformed", filter);
        const auto& col = t.get(col_name[0]);
        if (col.is_text) {
            if (op == "==") return col.text[r] == val[0];
            if (op == "!=") return col.text[r] != val[0];
            fail("filter '{}': only == and != apply to text columns", filter);
        }
        auto v = parse_double(val[0]);
        if (!v) fail("filter '{}': value is not numeric", filter);
        const double x = col.num[r];
        if (op == ">=") return x >= *v;
        if (op == "<=") return x <= *v;
        if (op == "==") return x == *v;
        if (op == "!=") return x != *v;
        if (op == ">") return x > *v;
        return x < *v;
    }
    fail("filter '{}': no comparison operator", filter);
}

inline double two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return std::nan("");
    if (!(df >= 1)) df = 1;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace detail

/// Builds the design, absorbs fixed effects, fits OLS and computes the clustered
/// VCOV. The outcome is multiplied by `spec.scale` before fitting, so estimates and
/// standard errors are reported on that scale.
inline RegressionResult run_spec(const Table& panel, const RegressionSpec& spec, double fe_tol = 1e-10,
                                 int fe_max_iter = 10000) {
    spec.validate();
    // Columns referenced by the spec.
    std::vector<std::string> numeric_cols = {spec.outcome};
    auto add_numeric = [&](const std::string& c) {
        if (std::find(numeric_cols.begin(), numeric_cols.end(), c) == numeric_cols.end()) numeric_cols.push_back(c);
    };
    std::vector<std::vector<std::string>> term_parts;
    for (const auto& term : spec.terms) {
        auto parts = detail::split_list(term, ':');
        if (parts.empty() || parts.size() > 2) fail("spec '{}': malformed term '{}'", spec.name, term);
        for (const auto& p : parts) add_numeric(p.rfind("i.", 0) == 0 ? p.substr(2) : p);
        term_parts.push_back(parts);
    }
    if (!spec.weight.empty()) add_numeric(spec.weight);
    std::vector<std::vector<std::string>> fe_parts;
    for (const auto& f : spec.fe) fe_parts.push_back(detail::split_list(f, '^'));

    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        bool ok = spec.filter.empty() || detail::row_passes(panel, spec.filter, r);
        for (const auto& c : numeric_cols) {
            if (!ok) break;
            ok = !std::isnan(panel.numeric(c)[r]);
        }
        if (ok) rows.push_back(r);
    }
    if (rows.empty()) fail("spec '{}': empty sample after filtering", spec.name);
    const auto n = static_cast<Eigen::Index>(rows.size());
    auto gather = [&](const std::string& c) {
        const auto& src = panel.numeric(c);
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = src[rows[static_cast<std::size_t>(i)]];
        return v;
    };

    RegressionResult res;
    res.spec = spec.name;
    res.n = rows.size();

    // Bin indicator sets.
    std::map<std::string, std::vector<std::pair<int, VectorXd>>> indicators;
    for (const auto& b : spec.bins) {
        VectorXd v = gather(b.column);
        auto set = quantile_bins(std::span<const double>(v.data(), static_cast<std::size_t>(n)), b.k, b.descending,
                                 b.reference, b.column);
        indicators[b.column] = bin_indicators(set, std::span<const double>(v.data(), static_cast<std::size_t>(n)));
        res.bins[b.column] = set;
    }

    std::vector<std::string> names;
    std::vector<VectorXd> cols;
    for (const auto& parts : term_parts) {
        // Expand each factor into (name, column) lists, then take products.
        std::vector<std::vector<std::pair<std::string, VectorXd>>> expanded;
        for (const auto& p : parts) {
            std::vector<std::pair<std::string, VectorXd>> e;
            if (p.rfind("i.", 0) == 0) {
                const auto base = p.substr(2);
                auto it = indicators.find(base);
                if (it == indicators.end()) fail("spec '{}': term '{}' has no bins definition", spec.name, p);
                for (const auto& [bin, ind] : it->second) e.emplace_back(fmt::format("{}_bin{}", base, bin), ind);
            } else {
                e.emplace_back(p, gather(p));
            }
            expanded.push_back(std::move(e));
        }
        if (expanded.size() == 1) {
            for (auto& [nm, c] : expanded[0]) {
                names.push_back(nm);
                cols.push_back(std::move(c));
            }
        } else {
            for (auto& [na, ca] : expanded[0])
                for (auto& [nb, cb] : expanded[1]) {
                    names.push_back(na + ":" + nb);
                    cols.push_back(ca.cwiseProduct(cb));
                }
        }
    }

    const bool intercept = spec.fe.empty();
    if (intercept) {
        names.insert(names.begin(), "(intercept)");
        cols.insert(cols.begin(), VectorXd::Ones(n));
    }
    const auto p = static_cast<Eigen::Index>(cols.size());
    MatrixXd data(n, p + 1);
    data.col(0) = gather(spec.outcome) * spec.scale;
    for (Eigen::Index j = 0; j < p; ++j) data.col(j + 1) = cols[static_cast<std::size_t>(j)];
    std::vector<double> ref_norms;
    for (Eigen::Index j = 0; j < p; ++j) ref_norms.push_back(data.col(j + 1).norm());

    std::optional<VectorXd> w;
    if (!spec.weight.empty()) {
        w = gather(spec.weight);
        if ((w->array() <= 0).any()) fail("spec '{}': weights must be positive", spec.name);
    }

    std::vector<Factor> fes;
    for (const auto& parts : fe_parts) {
        std::vector<Factor> pieces;
        for (const auto& c : parts) pieces.push_back(factorize(panel.get(c), rows));
        if (pieces.size() == 1) {
            fes.push_back(std::move(pieces[0]));
        } else {
            std::vector<const Factor*> ptrs;
            for (const auto& f : pieces) ptrs.push_back(&f);
            fes.push_back(intersect(ptrs));
        }
    }
    auto absorbed = absorb_fixed_effects(std::move(data), fes, w ? &*w : nullptr, fe_tol, fe_max_iter);
    res.fe_iterations = absorbed.iterations;
    res.singletons = absorbed.singletons;
    MatrixXd& dm = absorbed.data;
    if (w) {
        const VectorXd sw = w->cwiseSqrt();
        for (Eigen::Index j = 0; j < dm.cols(); ++j) dm.col(j) = dm.col(j).cwiseProduct(sw);
    }
    VectorXd y = dm.col(0);
    MatrixXd X = dm.rightCols(p);

    const double yscale = std::max(1.0, gather(spec.outcome).cwiseAbs().maxCoeff() * std::abs(spec.scale));
    const double ymax = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
    if (ymax <= 1e-12 * yscale) {
        res.degenerate = true;
        y.setZero();
        log(LogLevel::warn, "spec '{}': outcome has no variation after fixed effects; slopes and SEs are zero",
            spec.name);
    }

    auto fit = ols(X, y, names, ref_norms);
    for (int d : fit.dropped) res.dropped.push_back(names[static_cast<std::size_t>(d)]);
    MatrixXd Xk(n, static_cast<Eigen::Index>(fit.kept.size()));
    for (std::size_t k = 0; k < fit.kept.size(); ++k) Xk.col(static_cast<Eigen::Index>(k)) = X.col(fit.kept[k]);

    std::vector<Factor> cl;
    for (const auto& c : spec.cluster) cl.push_back(factorize(panel.get(c), rows));
    auto vc = cluster_vcov(Xk, fit.residuals, fit.bread, cl);
    res.vcov = vc.vcov;
    res.clusters = vc.clusters;
    res.psd_repaired = vc.psd_repaired;
    if (vc.psd_repaired) log(LogLevel::warn, "spec '{}': multi-way VCOV was not PSD; negative eigenvalues truncated", spec.name);

    double df = static_cast<double>(n) - static_cast<double>(fit.kept.size());
    if (!vc.clusters.empty()) df = *std::min_element(vc.clusters.begin(), vc.clusters.end()) - 1.0;
    for (std::size_t k = 0; k < fit.kept.size(); ++k) {
        Coefficient c;
        c.term = names[static_cast<std::size_t>(fit.kept[k])];
        c.estimate = fit.beta(static_cast<Eigen::Index>(k));
        c.se = std::sqrt(std::max(0.0, vc.vcov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
        if (c.se > 0) {
            c.t = c.estimate / c.se;
            c.p = detail::two_sided_p(c.t, df);
        } else {
            c.t = c.p = std::nan("");
        }
        res.coefficients.push_back(c);
    }
    const double sst = y.squaredNorm();
    res.r2_within = sst > 0 ? 1.0 - fit.residuals.squaredNorm() / sst : 0.0;
    return res;
}

}  // namespace drift::econ
