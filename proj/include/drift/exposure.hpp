#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "drift/core.hpp"
#include "drift/grid.hpp"
#include "drift/table.hpp"
#include "drift/transport.hpp"

namespace drift {

enum class Provenance { local, transported_all, transported_200km };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::local: return "local";
        case Provenance::transported_all: return "transported_all";
        case Provenance::transported_200km: return "transported_200km";
    }
    return "?";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "local") return Provenance::local;
    if (s == "transported_all") return Provenance::transported_all;
    if (s == "transported_200km") return Provenance::transported_200km;
    fail("unknown exposure source '{}' (expected local|transported_all|transported_200km)", s);
}

/// Monthly exposure at one receiver cell over a contiguous month range.
struct ExposureSeries {
    Cell receiver = 0;
    Provenance provenance = Provenance::local;
    Month first;
    std::vector<double> values;  // NaN = missing

    double at(Month m) const {
        const int k = m - first;
        if (k < 0 || k >= static_cast<int>(values.size())) return kMissing;
        return values[static_cast<std::size_t>(k)];
    }
};

/// The receiver's own monthly concentration.
inline ExposureSeries local_series(const ConcentrationSeries& mp, Cell receiver) {
    if (mp.kind != PeriodKind::month) fail("local_series: concentration must be monthly");
    ExposureSeries s;
    s.receiver = receiver;
    s.provenance = Provenance::local;
    if (mp.periods.empty()) return s;
    s.first = Month{mp.periods.front()};
    for (Month m = s.first; m.serial <= mp.periods.back(); ++m) s.values.push_back(mp.at(m, receiver));
    return s;
}

struct TransportedSeries {
    std::map<Cell, ExposureSeries> by_receiver;
    std::size_t missing_mp = 0;  // sender-months skipped for missing concentration

    /// Series for `receiver`; receivers absent from the matrix receive zeros.
    ExposureSeries get(Cell receiver, const ScoreMatrix& matrix, Provenance prov) const {
        if (auto it = by_receiver.find(receiver); it != by_receiver.end()) return it->second;
        ExposureSeries s;
        s.receiver = receiver;
        s.provenance = prov;
        if (!matrix.months.empty()) {
            s.first = matrix.months.front();
            s.values.assign(static_cast<std::size_t>(matrix.months.back() - s.first + 1), 0.0);
        }
        return s;
    }
};

/// Sum over senders of monthly score times sender concentration, per receiver.
/// When `sender_subset` is given only those senders contribute.
inline TransportedSeries transported_series(const ScoreMatrix& matrix, const ConcentrationSeries& mp,
                                            Provenance prov = Provenance::transported_all,
                                            const std::set<Cell>* sender_subset = nullptr) {
    if (mp.kind != PeriodKind::month) fail("transported_series: concentration must be monthly");
    TransportedSeries out;
    if (matrix.months.empty()) return out;
    const Month first = matrix.months.front();
    const auto len = static_cast<std::size_t>(matrix.months.back() - first + 1);
    for (std::size_t pi = 0; pi < matrix.pairs.size(); ++pi) {
        const auto [sender, receiver] = matrix.pairs[pi];
        auto& s = out.by_receiver[receiver];
        if (s.values.empty()) {
            s.receiver = receiver;
            s.provenance = prov;
            s.first = first;
            s.values.assign(len, kMissing);
            for (Month m : matrix.months) s.values[static_cast<std::size_t>(m - first)] = 0.0;
        }
        if (sender_subset && !sender_subset->count(sender)) continue;
        for (std::size_t mi = 0; mi < matrix.months.size(); ++mi) {
            const double sc = matrix.values[pi][mi];
            const double conc = mp.at(matrix.months[mi], sender);
            if (is_missing(conc)) {
                ++out.missing_mp;
                continue;
            }
            s.values[static_cast<std::size_t>(matrix.months[mi] - first)] += sc * conc;
        }
    }
    return out;
}

/// Calendar-month window [from, to] relative to the birth month.
struct Window {
    std::string name;
    int from = 0;
    int to = 0;
};

inline std::vector<Window> standard_windows() {
    return {{"preconception", -12, -10}, {"trimester1", -9, -7}, {"trimester2", -6, -4},
            {"trimester3", -3, -1},      {"postpartum", 0, 2},   {"pregnancy", -9, -1}};
}

inline Window find_window(std::string_view name) {
    for (auto& w : standard_windows())
        if (w.name == name) return w;
    fail("unknown exposure window '{}'", name);
}

enum class WindowStatus { ok, missing_month, nonpositive_sum };

struct WindowValue {
    WindowStatus status = WindowStatus::ok;
    double value = kMissing;  // log of the window sum when ok
    double sum = kMissing;
};

/// Log of the sum of monthly values over birth+from .. birth+to.
template <typename Series>
WindowValue window_exposure(const Series& series, Month birth, const Window& w) {
    const int lo = std::min(w.from, w.to), hi = std::max(w.from, w.to);
    double sum = 0.0;
    for (int k = lo; k <= hi; ++k) {
        const double v = series.at(birth + k);
        if (is_missing(v)) return {WindowStatus::missing_month, kMissing, kMissing};
        sum += v;
    }
    if (!(sum > 0.0)) return {WindowStatus::nonpositive_sum, kMissing, sum};
    return {WindowStatus::ok, std::log(sum), sum};
}

// ---------------------------------------------------------------------------
// Trade-weighted exporter exposure

struct TradeFlow {
    std::string importer;
    std::string exporter;
    Month month;
    double value = 0.0;
};

inline std::vector<TradeFlow> load_trade(const std::string& path) {
    CsvReader r(path, "importer,exporter,month,value");
    std::vector<TradeFlow> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        auto m = parse_month(f[2]);
        if (!m) fail("{}: row {}: malformed month '{}'", path, r.row(), f[2]);
        const double v = r.number(f, 3);
        if (!(v >= 0)) fail("{}: row {}: trade value must be >= 0", path, r.row());
        out.push_back({f[0], f[1], *m, v});
    }
    return out;
}

/// Trade-value-weighted mean of exporter concentrations. NaN when total imports
/// are zero or any weighted exporter lacks a value.
template <typename CountryMp>
double exporter_weighted_mp(std::span<const TradeFlow> flows, CountryMp&& country_mp) {
    double num = 0.0, den = 0.0;
    for (const auto& f : flows) {
        if (f.value == 0.0) continue;
        const double mp = country_mp(f.exporter, f.month);
        if (is_missing(mp)) return kMissing;
        num += f.value * mp;
        den += f.value;
    }
    if (!(den > 0.0)) return kMissing;
    return num / den;
}

/// Shoreline points per exporting country, CSV `country,lon,lat`.
inline std::map<std::string, std::vector<geo::LonLat>> load_shorelines(const std::string& path) {
    CsvReader r(path, "country,lon,lat");
    std::map<std::string, std::vector<geo::LonLat>> out;
    std::vector<std::string> f;
    while (r.next(f)) out[f[0]].push_back({r.number(f, 1), r.number(f, 2)});
    return out;
}

/// Monthly exporter concentration, keyed by country then month serial.
using CountryMonthly = std::map<std::string, std::map<int, double>>;

inline CountryMonthly country_buffer_mp(const ConcentrationSeries& mp,
                                        const std::map<std::string, std::vector<geo::LonLat>>& shorelines,
                                        double buffer_km) {
    CountryMonthly out;
    for (const auto& [country, pts] : shorelines) {
        auto vals = shoreline_buffer_mean(mp, pts, buffer_km);
        for (std::size_t pi = 0; pi < mp.periods.size(); ++pi) out[country][mp.periods[pi]] = vals[pi];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Births

struct BirthRecord {
    std::string id;
    double lon = 0.0;
    double lat = 0.0;
    std::string admin1;
    std::string country;
    Month birth_month;
    int lbw = 0;
    std::vector<double> covariates;  // aligned with BirthSet::covariate_names
};

struct BirthSet {
    std::vector<std::string> covariate_names;
    std::vector<BirthRecord> births;
};

inline constexpr std::string_view kBirthHeader = "id,lon,lat,admin1,country,birth_month,lbw";

inline BirthSet load_births(const std::string& path) {
    CsvReader r(path, "");
    const auto& h = r.header();
    const auto fixed = CsvReader::split(kBirthHeader);
    if (h.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), h.begin()))
        fail("{}: header must start with '{}'", path, kBirthHeader);
    BirthSet out;
    out.covariate_names.assign(h.begin() + static_cast<long>(fixed.size()), h.end());
    std::vector<std::string> f;
    while (r.next(f)) {
        BirthRecord b;
        b.id = f[0];
        b.lon = r.number(f, 1);
        b.lat = r.number(f, 2);
        b.admin1 = f[3];
        b.country = f[4];
        auto m = parse_month(f[5]);
        if (!m) fail("{}: row {}: malformed birth_month '{}'", path, r.row(), f[5]);
        b.birth_month = *m;
        if (f[6] != "0" && f[6] != "1") fail("{}: row {}: lbw must be 0 or 1", path, r.row());
        b.lbw = f[6] == "1";
        for (std::size_t i = fixed.size(); i < f.size(); ++i)
            b.covariates.push_back(is_missing_token(f[i]) ? kMissing : r.number(f, i));
        out.births.push_back(std::move(b));
    }
    return out;
}

inline std::string export_births_csv(const BirthSet& set) {
    std::string out{kBirthHeader};
    for (const auto& n : set.covariate_names) out += "," + n;
    out += '\n';
    for (const auto& b : set.births) {
        out += fmt::format("{},{},{},{},{},{},{}", b.id, format_double(b.lon), format_double(b.lat), b.admin1, b.country,
                           to_string(b.birth_month), b.lbw);
        for (double c : b.covariates) out += "," + (is_missing(c) ? std::string("NA") : format_double(c));
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Panel assembly

/// Exposure inputs for panel assembly. Only `mp` is required.
struct ExposureSources {
    const ConcentrationSeries* mp = nullptr;        // monthly concentration (local source)
    const ScoreMatrix* matrix = nullptr;            // transported sources
    std::set<Cell> far_senders;                     // subset used for transported_200km
    const std::vector<TradeFlow>* trade = nullptr;  // importer = birth admin1
    const CountryMonthly* exporter_mp = nullptr;
};

struct PanelOptions {
    std::vector<Window> windows = standard_windows();
    std::vector<Provenance> provenances = {Provenance::local};
    /// Gridded monthly covariates entered as logged pregnancy-window means.
    std::map<std::string, const ConcentrationSeries*> covariate_grids;
    bool exporter_exposure = false;
};

struct ExclusionReport {
    std::size_t input = 0;
    std::size_t retained = 0;
    std::map<std::string, std::size_t> excluded;

    std::string to_csv() const {
        std::string out = "reason,count\n";
        out += fmt::format("retained,{}\n", retained);
        for (const auto& [k, v] : excluded) out += fmt::format("{},{}\n", k, v);
        out += fmt::format("input,{}\n", input);
        return out;
    }
};

struct Panel {
    Table table;
    ExclusionReport report;
};

inline std::string exposure_column(Provenance p, const Window& w) {
    return fmt::format("log_mp_{}_{}", to_string(p), w.name);
}

/// One row per retained birth, in input order. A birth is excluded, with the first
/// failing reason counted, when any requested exposure window or covariate is
/// missing or nonpositive.
inline Panel assemble_panel(const BirthSet& births, const ExposureSources& src, const PanelOptions& opt) {
    if (!src.mp) fail("assemble_panel: local concentration series is required");
    const auto& mp = *src.mp;
    if (mp.kind != PeriodKind::month) fail("assemble_panel: concentration must be monthly");

    TransportedSeries all, far;
    const bool want_all = std::count(opt.provenances.begin(), opt.provenances.end(), Provenance::transported_all) > 0;
    const bool want_far = std::count(opt.provenances.begin(), opt.provenances.end(), Provenance::transported_200km) > 0;
    if ((want_all || want_far) && !src.matrix) fail("assemble_panel: transported sources need a score matrix");
    if (want_all) all = transported_series(*src.matrix, mp, Provenance::transported_all);
    if (want_far) far = transported_series(*src.matrix, mp, Provenance::transported_200km, &src.far_senders);
    if (opt.exporter_exposure && (!src.trade || !src.exporter_mp))
        fail("assemble_panel: exporter exposure needs trade flows and exporter concentrations");

    std::map<std::pair<std::string, int>, std::vector<TradeFlow>> flows_by_key;
    if (opt.exporter_exposure)
        for (const auto& f : *src.trade) flows_by_key[{f.importer, f.month.serial}].push_back(f);
    auto exporter_value = [&](const std::string& importer, Month m) {
        auto it = flows_by_key.find({importer, m.serial});
        if (it == flows_by_key.end()) return kMissing;
        return exporter_weighted_mp(std::span<const TradeFlow>(it->second), [&](const std::string& c, Month mo) {
            auto ci = src.exporter_mp->find(c);
            if (ci == src.exporter_mp->end()) return kMissing;
            auto mi = ci->second.find(mo.serial);
            return mi == ci->second.end() ? kMissing : mi->second;
        });
    };
    struct ExporterSeries {
        const std::string* importer;
        decltype(exporter_value)* fn;
        double at(Month m) const { return (*fn)(*importer, m); }
    };

    std::map<std::pair<double, double>, Cell> cell_cache;
    std::map<std::pair<Cell, int>, ExposureSeries> series_cache;
    auto series_for = [&](Cell c, Provenance p) -> const ExposureSeries& {
        auto key = std::pair(c, static_cast<int>(p));
        auto it = series_cache.find(key);
        if (it != series_cache.end()) return it->second;
        ExposureSeries s = p == Provenance::local             ? local_series(mp, c)
                           : p == Provenance::transported_all ? all.get(c, *src.matrix, p)
                                                              : far.get(c, *src.matrix, p);
        return series_cache.emplace(key, std::move(s)).first->second;
    };

    std::vector<std::string> names;
    for (auto p : opt.provenances)
        for (const auto& w : opt.windows) names.push_back(exposure_column(p, w));
    if (opt.exporter_exposure)
        for (const auto& w : opt.windows) names.push_back("log_mp_exporters_" + w.name);
    for (const auto& [n, g] : opt.covariate_grids) names.push_back("log_" + n);
    for (const auto& n : births.covariate_names) names.push_back("log_" + n);

    std::vector<std::vector<double>> values(names.size());
    std::vector<double> lbw;
    std::vector<std::string> id, admin1, country, bmonth, cm, cell_label;
    ExclusionReport rep;
    rep.input = births.births.size();
    const Window pregnancy = find_window("pregnancy");

    std::vector<double> row(names.size());
    for (const auto& b : births.births) {
        auto [cit, inserted] = cell_cache.try_emplace({b.lon, b.lat}, 0);
        if (inserted) cit->second = nearest_ocean_cell(b.lon, b.lat, mp.spec, mp.ocean);
        const Cell cell = cit->second;

        std::string reason;
        std::size_t k = 0;
        auto take_window = [&](const WindowValue& wv) {
            if (!reason.empty()) return;
            if (wv.status == WindowStatus::missing_month) reason = "missing_window";
            else if (wv.status == WindowStatus::nonpositive_sum) reason = "nonpositive_window";
            else row[k] = wv.value;
        };
        for (auto p : opt.provenances)
            for (const auto& w : opt.windows) {
                take_window(window_exposure(series_for(cell, p), b.birth_month, w));
                ++k;
            }
        if (opt.exporter_exposure)
            for (const auto& w : opt.windows) {
                ExporterSeries es{&b.admin1, &exporter_value};
                auto wv = window_exposure(es, b.birth_month, w);
                if (reason.empty() && wv.status == WindowStatus::missing_month) reason = "missing_exporter";
                take_window(wv);
                ++k;
            }
        for (const auto& [n, g] : opt.covariate_grids) {
            if (reason.empty()) {
                double sum = 0.0;
                for (int off = pregnancy.from; off <= pregnancy.to; ++off) {
                    const double v = g->at(b.birth_month + off, cell);
                    if (is_missing(v)) {
                        reason = "missing_covariate";
                        break;
                    }
                    sum += v;
                }
                const double mean = sum / (pregnancy.to - pregnancy.from + 1);
                if (reason.empty() && !(mean > 0)) reason = "nonpositive_covariate";
                if (reason.empty()) row[k] = std::log(mean);
            }
            ++k;
        }
        for (double c : b.covariates) {
            if (reason.empty()) {
                if (is_missing(c)) reason = "missing_covariate";
                else if (!(c > 0)) reason = "nonpositive_covariate";
                else row[k] = std::log(c);
            }
            ++k;
        }
        if (!reason.empty()) {
            ++rep.excluded[reason];
            continue;
        }
        for (std::size_t i = 0; i < names.size(); ++i) values[i].push_back(row[i]);
        id.push_back(b.id);
        lbw.push_back(b.lbw);
        admin1.push_back(b.admin1);
        country.push_back(b.country);
        bmonth.push_back(to_string(b.birth_month));
        cm.push_back(b.country + "^" + to_string(b.birth_month));
        const auto ll = mp.spec.center(cell);
        cell_label.push_back(format_double(ll.lon) + "_" + format_double(ll.lat));
    }
    rep.retained = id.size();
    if (id.empty()) fail("assemble_panel: no birth retained ({} input)", rep.input);

    Panel panel;
    panel.report = rep;
    auto& t = panel.table;
    t.add_text("id", std::move(id));
    t.add_numeric("lbw", std::move(lbw));
    t.add_text("admin1", std::move(admin1));
    t.add_text("country", std::move(country));
    t.add_text("birth_month", std::move(bmonth));
    t.add_text("country_month", std::move(cm));
    t.add_text("cell", std::move(cell_label));
    for (std::size_t i = 0; i < names.size(); ++i) t.add_numeric(names[i], std::move(values[i]));
    return panel;
}

/// Cell-month panel for the coastal receivers: logged local and transported
/// concentration plus logged gridded covariates at the cell itself.
inline Table coastal_panel(std::span<const Cell> receivers, const ConcentrationSeries& mp, const ScoreMatrix* matrix,
                           const std::set<Cell>& far_senders,
                           const std::map<std::string, const ConcentrationSeries*>& covariate_grids,
                           const std::map<Cell, std::string>& cell_country) {
    TransportedSeries all, far;
    if (matrix) {
        all = transported_series(*matrix, mp, Provenance::transported_all);
        far = transported_series(*matrix, mp, Provenance::transported_200km, &far_senders);
    }
    std::vector<std::string> cell_col, country, month, cm;
    std::vector<std::string> names = {"log_mp_local"};
    if (matrix) {
        names.push_back("log_mp_transported_all");
        names.push_back("log_mp_transported_200km");
    }
    for (const auto& [n, g] : covariate_grids) names.push_back("log_" + n);
    std::vector<std::vector<double>> vals(names.size());
    for (Cell c : receivers) {
        auto loc = local_series(mp, c);
        ExposureSeries sa, sf;
        if (matrix) {
            sa = all.get(c, *matrix, Provenance::transported_all);
            sf = far.get(c, *matrix, Provenance::transported_200km);
        }
        auto ci = cell_country.find(c);
        const std::string ctry = ci == cell_country.end() ? std::string("all") : ci->second;
        const auto ll = mp.spec.center(c);
        for (int serial : mp.periods) {
            const Month m{serial};
            std::vector<double> raw = {loc.at(m)};
            if (matrix) {
                raw.push_back(sa.at(m));
                raw.push_back(sf.at(m));
            }
            for (const auto& [n, g] : covariate_grids) raw.push_back(g->at(m, c));
            bool ok = true;
            for (double v : raw) ok = ok && !is_missing(v) && v > 0;
            if (!ok) continue;
            for (std::size_t i = 0; i < raw.size(); ++i) vals[i].push_back(std::log(raw[i]));
            cell_col.push_back(format_double(ll.lon) + "_" + format_double(ll.lat));
            country.push_back(ctry);
            month.push_back(to_string(m));
            cm.push_back(ctry + "^" + to_string(m));
        }
    }
    Table t;
    t.add_text("cell", std::move(cell_col));
    t.add_text("country", std::move(country));
    t.add_text("month", std::move(month));
    t.add_text("country_month", std::move(cm));
    for (std::size_t i = 0; i < names.size(); ++i) t.add_numeric(names[i], std::move(vals[i]));
    return t;
}

/// Pair-month panel relating receiver and sender log concentrations to the
/// monthly score. Rows with missing or nonpositive concentrations are dropped.
inline Table passthrough_panel(const ScoreMatrix& matrix, const ConcentrationSeries& sender_mp,
                               const ConcentrationSeries& receiver_mp) {
    std::vector<std::string> sender, receiver, pair, month;
    std::vector<double> score, lms, lmr;
    for (std::size_t pi = 0; pi < matrix.pairs.size(); ++pi) {
        const auto s = matrix.spec.center(matrix.pairs[pi].sender);
        const auto r = matrix.spec.center(matrix.pairs[pi].receiver);
        const auto sl = format_double(s.lon) + "_" + format_double(s.lat);
        const auto rl = format_double(r.lon) + "_" + format_double(r.lat);
        for (std::size_t mi = 0; mi < matrix.months.size(); ++mi) {
            const double a = sender_mp.at(matrix.months[mi], matrix.pairs[pi].sender);
            const double b = receiver_mp.at(matrix.months[mi], matrix.pairs[pi].receiver);
            if (is_missing(a) || is_missing(b) || !(a > 0) || !(b > 0)) continue;
            sender.push_back(sl);
            receiver.push_back(rl);
            pair.push_back(sl + ">" + rl);
            month.push_back(to_string(matrix.months[mi]));
            score.push_back(matrix.values[pi][mi]);
            lms.push_back(std::log(a));
            lmr.push_back(std::log(b));
        }
    }
    Table t;
    t.add_text("sender", std::move(sender));
    t.add_text("receiver", std::move(receiver));
    t.add_text("pair", std::move(pair));
    t.add_text("month", std::move(month));
    t.add_numeric("score", std::move(score));
    t.add_numeric("log_mp_sender", std::move(lms));
    t.add_numeric("log_mp_receiver", std::move(lmr));
    return t;
}

}  // namespace drift
