#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "drift/core.hpp"
#include "drift/exposure.hpp"
#include "drift/grid.hpp"
#include "drift/transport.hpp"

namespace drift::synth {

/// Portable random stream: std::mt19937_64 (fully specified by the C++ standard)
/// with explicit transforms. uniform() = (x >> 11) * 2^-53; normal() uses the
/// Box-Muller cosine branch with a fresh pair of uniforms on every call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    /// Integer in [0, n).
    int below(int n) { return static_cast<int>(uniform() * n); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
};

enum class FieldKind { uniform, gyre, random_divfree };

inline FieldKind parse_field_kind(std::string_view s) {
    if (s == "uniform") return FieldKind::uniform;
    if (s == "gyre") return FieldKind::gyre;
    if (s == "random_divfree") return FieldKind::random_divfree;
    fail("unknown field kind '{}' (expected uniform|gyre|random_divfree)", s);
}

struct DgpConfig {
    std::uint64_t seed = 1;
    GridSpec grid{0.0, -5.0, 0.25, 0.25, 40, 40, -37.0, 37.0};
    int coast_width = 4;        // land columns on the western edge
    double coast_wiggle = 2.0;  // amplitude (cells) of the coastline meander
    Day start = Day::from_ymd(2016, 1, 1);
    Day end = Day::from_ymd(2018, 12, 31);

    FieldKind kind = FieldKind::gyre;
    double magnitude = 0.3;       // m/s
    double direction_deg = 180.0; // uniform field heading (0 = east)
    double temporal_amp = 0.4;    // day-to-day modulation amplitude
    double period_days = 45.0;

    double rho = 0.5;         // AR(1) coefficient of log concentration
    double sigma = 0.5;       // innovation sd of log concentration
    double mean_log = 0.0;
    double spatial_sd = 0.5;  // sd of per-cell log level

    int births = 20000;
    int cells_per_admin1 = 2;
    int countries = 4;
    double base = 0.0276;
    /// True effects per 1,000 births per log exposure, keyed by window name.
    std::map<std::string, double> beta = {{"pregnancy", 0.37}};
    Provenance truth_source = Provenance::local;
    double admin1_sd = 0.003;
    double country_month_sd = 0.003;
    double noise_sd = 0.002;

    void validate() const {
        grid.validate();
        if (!(rho >= 0.0 && rho < 1.0)) fail("synth: rho must lie in [0, 1)");
        if (!(sigma >= 0.0)) fail("synth: sigma must be >= 0");
        if (end < start) fail("synth: end before start");
        if (births < 1) fail("synth: births must be >= 1");
    }
};

/// Land on the western edge with a sinusoidal coastline; everything else ocean.
inline OceanMask gen_mask(const DgpConfig& cfg) {
    const auto& g = cfg.grid;
    OceanMask m(static_cast<std::size_t>(g.cells()), 1);
    for (int j = 0; j < g.nlat; ++j) {
        const int width = cfg.coast_width +
                          static_cast<int>(std::lround(cfg.coast_wiggle * std::sin(2.0 * std::numbers::pi * j / 24.0)));
        for (int i = 0; i < std::min(width, g.nlon); ++i) m[g.index(i, j)] = 0;
    }
    return m;
}

namespace detail {

struct Mode {
    double kx, ky, phase, amp;
};

inline std::vector<Mode> random_modes(Rng& rng, int count) {
    std::vector<Mode> modes;
    for (int k = 0; k < count; ++k) {
        const double wavelength = 6.0 + 14.0 * rng.uniform();
        const double angle = 2.0 * std::numbers::pi * rng.uniform();
        const double kk = 2.0 * std::numbers::pi / wavelength;
        modes.push_back({kk * std::cos(angle), kk * std::sin(angle), 2.0 * std::numbers::pi * rng.uniform(),
                         0.5 + rng.uniform()});
    }
    return modes;
}

inline double stream(const std::vector<Mode>& modes, double x, double y) {
    double s = 0.0;
    for (const auto& m : modes) s += m.amp * std::sin(m.kx * x + m.ky * y + m.phase);
    return s;
}

}  // namespace detail

/// Daily current field on the DGP grid. `mask` defaults to gen_mask(cfg).
inline VectorFieldSeries gen_current_field(const DgpConfig& cfg, std::optional<OceanMask> mask = std::nullopt) {
    cfg.validate();
    const auto& g = cfg.grid;
    Rng rng(cfg.seed ^ 0x5eedf1e1dULL);
    VectorFieldSeries s;
    s.spec = g;
    s.ocean = mask ? *mask : gen_mask(cfg);
    const auto ncell = static_cast<std::size_t>(g.cells());
    const double omega = 2.0 * std::numbers::pi / cfg.period_days;

    // Stream functions on an index grid padded by one cell on every side.
    std::vector<detail::Mode> modes_a, modes_b;
    double divfree_scale = 1.0;
    if (cfg.kind == FieldKind::random_divfree) {
        modes_a = detail::random_modes(rng, 6);
        modes_b = detail::random_modes(rng, 6);
        double vmax = 0.0;
        for (int j = 0; j < g.nlat; ++j)
            for (int i = 0; i < g.nlon; ++i) {
                const double u = -(detail::stream(modes_a, i, j + 1) - detail::stream(modes_a, i, j - 1)) / 2.0;
                const double v = (detail::stream(modes_a, i + 1, j) - detail::stream(modes_a, i - 1, j)) / 2.0;
                vmax = std::max(vmax, std::hypot(u, v));
            }
        divfree_scale = vmax > 0 ? cfg.magnitude / vmax : 0.0;
    }
    const double ci = (g.nlon - 1) / 2.0, cj = (g.nlat - 1) / 2.0;
    const double rim = 0.35 * std::min(g.nlon - 1, g.nlat - 1);

    for (Day d = cfg.start; d <= cfg.end; ++d) {
        const int k = d - cfg.start;
        const double mod = cfg.temporal_amp * std::sin(omega * k);
        std::vector<double> u(ncell, 0.0), v(ncell, 0.0);
        std::vector<double> psi;
        const int pw = g.nlon + 2, ph = g.nlat + 2;
        if (cfg.kind == FieldKind::random_divfree) {
            psi.resize(static_cast<std::size_t>(pw * ph));
            const double ca = std::cos(omega * k), sb = std::sin(omega * k);
            for (int j = -1; j <= g.nlat; ++j)
                for (int i = -1; i <= g.nlon; ++i)
                    psi[static_cast<std::size_t>((j + 1) * pw + (i + 1))] =
                        divfree_scale * (ca * detail::stream(modes_a, i, j) + sb * detail::stream(modes_b, i, j));
        }
        auto P = [&](int i, int j) { return psi[static_cast<std::size_t>((j + 1) * pw + (i + 1))]; };
        for (int j = 0; j < g.nlat; ++j)
            for (int i = 0; i < g.nlon; ++i) {
                const Cell c = g.index(i, j);
                if (!s.ocean[c]) continue;
                switch (cfg.kind) {
                    case FieldKind::uniform: {
                        const double th = cfg.direction_deg * geo::kDegToRad + mod;
                        u[c] = cfg.magnitude * std::cos(th);
                        v[c] = cfg.magnitude * std::sin(th);
                        break;
                    }
                    case FieldKind::gyre: {
                        const double dx = i - ci, dy = j - cj;
                        const double r = std::hypot(dx, dy);
                        if (r == 0.0) break;
                        const double speed = cfg.magnitude * (1.0 + mod) * (r <= rim ? r / rim : rim / r);
                        u[c] = -speed * dy / r;
                        v[c] = speed * dx / r;
                        break;
                    }
                    case FieldKind::random_divfree:
                        u[c] = -(P(i, j + 1) - P(i, j - 1)) / 2.0;
                        v[c] = (P(i + 1, j) - P(i - 1, j)) / 2.0;
                        break;
                }
            }
        s.days.push_back(d);
        s.u.push_back(std::move(u));
        s.v.push_back(std::move(v));
    }
    return s;
}

/// Per-cell lognormal AR(1) monthly concentration:
/// ln MP = mean_log + level_c + x_m, x_m = rho x_{m-1} + sigma e_m, stationary start.
inline ConcentrationSeries gen_mp_field(const DgpConfig& cfg, std::optional<OceanMask> mask = std::nullopt,
                                        std::uint64_t stream = 0) {
    cfg.validate();
    Rng rng(cfg.seed ^ (0xc0ffee00ULL + stream * 0x9e3779b97f4a7c15ULL));
    ConcentrationSeries s;
    s.spec = cfg.grid;
    s.kind = PeriodKind::month;
    s.ocean = mask ? *mask : gen_mask(cfg);
    const Month m0 = Month::of(cfg.start), m1 = Month::of(cfg.end);
    for (Month m = m0; m <= m1; ++m) s.periods.push_back(m.serial);
    const auto ncell = static_cast<std::size_t>(cfg.grid.cells());
    s.values.assign(s.periods.size(), std::vector<double>(ncell, kMissing));
    const double sd0 = cfg.sigma / std::sqrt(1.0 - cfg.rho * cfg.rho);
    for (std::size_t c = 0; c < ncell; ++c) {
        if (!s.ocean[c]) continue;
        const double level = cfg.spatial_sd * rng.normal();
        double x = sd0 * rng.normal();
        for (std::size_t mi = 0; mi < s.periods.size(); ++mi) {
            if (mi > 0) x = cfg.rho * x + cfg.sigma * rng.normal();
            s.values[mi][c] = std::exp(cfg.mean_log + level + x);
        }
    }
    return s;
}

/// Administrative layout of the coastal receivers: consecutive coastal cells (by
/// flat index) form an admin1 region, consecutive regions form a country.
struct Regions {
    std::vector<Cell> cells;
    std::map<Cell, std::string> admin1;
    std::map<Cell, std::string> country;

    std::string to_csv(const GridSpec& g) const {
        std::string out = "lon,lat,admin1,country\n";
        for (Cell c : cells) {
            auto ll = g.center(c);
            out += fmt::format("{},{},{},{}\n", format_double(ll.lon), format_double(ll.lat), admin1.at(c), country.at(c));
        }
        return out;
    }
};

inline Regions gen_regions(const DgpConfig& cfg, const OceanMask& mask) {
    Regions r;
    r.cells = coastal_cells(cfg.grid, mask);
    const int nadmin = std::max<int>(1, (static_cast<int>(r.cells.size()) + cfg.cells_per_admin1 - 1) / cfg.cells_per_admin1);
    const int per_country = std::max(1, (nadmin + cfg.countries - 1) / cfg.countries);
    for (std::size_t k = 0; k < r.cells.size(); ++k) {
        const int a = static_cast<int>(k) / cfg.cells_per_admin1;
        r.admin1[r.cells[k]] = fmt::format("A{:03d}", a);
        r.country[r.cells[k]] = fmt::format("C{}", a / per_country);
    }
    return r;
}

inline Regions load_regions(const std::string& path, const GridSpec& g) {
    CsvReader rd(path, "lon,lat,admin1,country");
    Regions r;
    std::vector<std::string> f;
    while (rd.next(f)) {
        auto c = g.cell_at(rd.number(f, 0), rd.number(f, 1));
        if (!c) fail("{}: row {}: coordinate is not a cell centre", path, rd.row());
        r.cells.push_back(*c);
        r.admin1[*c] = f[2];
        r.country[*c] = f[3];
    }
    return r;
}

inline const std::vector<std::string>& birth_covariates() {
    static const std::vector<std::string> names = {"temperature", "precipitation",    "aerosol",      "chlorophyll",
                                                   "evaporation", "seafood_spending", "fishing_hours"};
    return names;
}

struct BirthPanelOutput {
    BirthSet births;
    std::vector<std::pair<std::string, double>> truth;  // term, true value (per 1,000)
    std::size_t clamped = 0;
};

/// Linear-probability births at the coastal receivers. Exposure for the DGP comes
/// from `series_for(cell)`, which returns an object with `at(Month)`.
template <typename SeriesFor>
BirthPanelOutput gen_birth_panel(const DgpConfig& cfg, const Regions& regions, SeriesFor&& series_for, Month first,
                                 Month last) {
    cfg.validate();
    if (regions.cells.empty()) fail("synth: no coastal receiver cells for births");
    Rng rng(cfg.seed ^ 0xb1f7b1f7ULL);
    const Month lo = first + 12, hi = last - 2;
    if (hi < lo) fail("synth: exposure months {}..{} too short for 15-month windows", to_string(first), to_string(last));
    const int nmonths = hi - lo + 1;

    std::map<std::string, double> admin_fx, cm_fx;
    for (Cell c : regions.cells) {
        auto [it, ins] = admin_fx.try_emplace(regions.admin1.at(c), 0.0);
        if (ins) it->second = cfg.admin1_sd * rng.normal();
    }

    std::vector<Window> windows;
    std::vector<double> betas;
    for (const auto& [name, b] : cfg.beta) {
        windows.push_back(find_window(name));
        betas.push_back(b / 1000.0);
    }

    struct Draft {
        Cell cell;
        Month m;
        std::vector<double> x;
    };
    std::vector<Draft> drafts;
    drafts.reserve(static_cast<std::size_t>(cfg.births));
    std::vector<double> xbar(windows.size(), 0.0);
    for (int b = 0; b < cfg.births; ++b) {
        Draft d;
        d.cell = regions.cells[static_cast<std::size_t>(rng.below(static_cast<int>(regions.cells.size())))];
        d.m = lo + rng.below(nmonths);
        const auto& series = series_for(d.cell);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            auto wv = window_exposure(series, d.m, windows[w]);
            if (wv.status != WindowStatus::ok) fail("synth: exposure window unavailable for DGP");
            d.x.push_back(wv.value);
            xbar[w] += wv.value;
        }
        drafts.push_back(std::move(d));
    }
    for (auto& v : xbar) v /= cfg.births;

    BirthPanelOutput out;
    out.births.covariate_names = birth_covariates();
    const auto& g = cfg.grid;
    for (int b = 0; b < cfg.births; ++b) {
        const auto& d = drafts[static_cast<std::size_t>(b)];
        const auto& admin = regions.admin1.at(d.cell);
        const auto& country = regions.country.at(d.cell);
        auto [cit, ins] = cm_fx.try_emplace(country + "^" + to_string(d.m), 0.0);
        if (ins) cit->second = cfg.country_month_sd * rng.normal();
        double p = cfg.base + admin_fx[admin] + cit->second + cfg.noise_sd * rng.normal();
        for (std::size_t w = 0; w < windows.size(); ++w) p += betas[w] * (d.x[w] - xbar[w]);
        if (p < 0.0 || p > 1.0) {
            ++out.clamped;
            p = std::clamp(p, 0.0, 1.0);
        }
        BirthRecord r;
        r.id = fmt::format("b{:07d}", b);
        const auto ll = g.center(d.cell);
        r.lon = ll.lon - 0.1;
        r.lat = ll.lat;
        r.admin1 = admin;
        r.country = country;
        r.birth_month = d.m;
        r.lbw = rng.bernoulli(p) ? 1 : 0;
        r.covariates = {295.0 + 3.0 * rng.normal(), std::exp(rng.normal(4.0, 0.5)), std::exp(rng.normal(-1.5, 0.3)),
                        std::exp(rng.normal(-0.5, 0.4)), std::exp(rng.normal(1.0, 0.3)), std::exp(rng.normal(3.0, 0.6)),
                        std::exp(rng.normal(2.0, 0.8))};
        out.births.births.push_back(std::move(r));
    }
    for (const auto& [name, b] : cfg.beta)
        out.truth.emplace_back(fmt::format("log_mp_{}_{}", to_string(cfg.truth_source), name), b);
    if (out.clamped * 1000 >= static_cast<std::size_t>(cfg.births))
        log(LogLevel::warn, "synth: {} of {} birth probabilities clamped", out.clamped, cfg.births);
    return out;
}

/// Receiver concentration equal to the transported mixture plus a lognormal
/// background: MP_r = sum_i Current_{i->r,m} MP_{i,m} + exp(bg_log + bg_sd e).
inline ConcentrationSeries gen_receiver_mixture(const ScoreMatrix& matrix, const ConcentrationSeries& sender_mp,
                                                std::uint64_t seed, double bg_log = -2.0, double bg_sd = 0.5) {
    Rng rng(seed ^ 0x313a7e5ULL);
    auto tr = transported_series(matrix, sender_mp);
    ConcentrationSeries out;
    out.spec = matrix.spec;
    out.kind = PeriodKind::month;
    out.ocean.assign(static_cast<std::size_t>(matrix.spec.cells()), 0);
    for (Month m : matrix.months) out.periods.push_back(m.serial);
    out.values.assign(out.periods.size(), std::vector<double>(out.ocean.size(), kMissing));
    for (const auto& [cell, series] : tr.by_receiver) {
        out.ocean[cell] = 1;
        for (std::size_t mi = 0; mi < matrix.months.size(); ++mi)
            out.values[mi][cell] = series.at(matrix.months[mi]) + std::exp(rng.normal(bg_log, bg_sd));
    }
    return out;
}

/// Gridded covariates for the aerosolization channel. Log evaporation is iid
/// normal; log AOD = a + b_mp ln MP + b_int ln MP ln evap + b_evap ln evap + noise.
struct AerosolOutput {
    ConcentrationSeries aod;
    ConcentrationSeries evaporation;
    std::vector<std::pair<std::string, double>> truth;
};

inline AerosolOutput gen_aerosol(const DgpConfig& cfg, const ConcentrationSeries& mp, double b_mp = 0.3,
                                 double b_int = 0.2, double b_evap = 0.1, double noise_sd = 0.3) {
    Rng rng(cfg.seed ^ 0xae7050ULL);
    AerosolOutput out;
    out.aod = mp;
    out.evaporation = mp;
    for (std::size_t pi = 0; pi < mp.periods.size(); ++pi)
        for (std::size_t c = 0; c < mp.ocean.size(); ++c) {
            if (!mp.ocean[c]) continue;
            const double le = rng.normal(0.0, 0.3);
            const double lm = std::log(mp.values[pi][c]);
            out.evaporation.values[pi][c] = std::exp(le);
            out.aod.values[pi][c] = std::exp(-1.0 + b_mp * lm + b_int * lm * le + b_evap * le + noise_sd * rng.normal());
        }
    out.truth = {{"aod/log_mp_local", b_mp}, {"aod/log_mp_local:log_evaporation", b_int}, {"aod/log_evaporation", b_evap}};
    return out;
}

struct TradeOutput {
    std::vector<TradeFlow> flows;
    std::map<std::string, std::vector<geo::LonLat>> shorelines;

    std::string flows_csv() const {
        std::string out = "importer,exporter,month,value\n";
        for (const auto& f : flows)
            out += fmt::format("{},{},{},{}\n", f.importer, f.exporter, to_string(f.month), format_double(f.value));
        return out;
    }
    std::string shorelines_csv() const {
        std::string out = "country,lon,lat\n";
        for (const auto& [c, pts] : shorelines)
            for (const auto& p : pts) out += fmt::format("{},{},{}\n", c, format_double(p.lon), format_double(p.lat));
        return out;
    }
};

/// Seafood imports by admin1 from three exporters whose shorelines are land cells
/// bordering the coast in the southern, middle and northern thirds of the grid.
inline TradeOutput gen_trade(const DgpConfig& cfg, const OceanMask& mask, const Regions& regions) {
    Rng rng(cfg.seed ^ 0x7eade5ULL);
    const auto& g = cfg.grid;
    TradeOutput out;
    for (Cell c = 0; c < g.cells(); ++c) {
        if (mask[c]) continue;
        const int i = g.col(c), j = g.row(c);
        const bool shore = i + 1 < g.nlon && mask[g.index(i + 1, j)];
        if (!shore) continue;
        const int third = std::min(2, 3 * j / g.nlat);
        out.shorelines[fmt::format("E{}", third + 1)].push_back(g.center(c));
    }
    std::set<std::string> importers;
    for (const auto& [c, a] : regions.admin1) importers.insert(a);
    for (const auto& imp : importers)
        for (Month m = Month::of(cfg.start); m <= Month::of(cfg.end); ++m)
            for (const auto& [exp, pts] : out.shorelines) out.flows.push_back({imp, exp, m, std::exp(rng.normal(2.0, 1.0))});
    return out;
}

}  // namespace drift::synth
