#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "drift/core.hpp"
#include "drift/geo.hpp"

namespace drift {

using Cell = std::int32_t;
using OceanMask = std::vector<std::uint8_t>;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Regular lon/lat lattice of cell centres. Cell (i, j) has flat index j*nlon + i,
/// so flat order is lexicographic in (lat-index, lon-index).
struct GridSpec {
    double lon0 = 0.0;
    double lat0 = 0.0;
    double dlon = 0.25;
    double dlat = 0.25;
    int nlon = 1;
    int nlat = 1;
    double lat_min = -37.0;
    double lat_max = 37.0;

    void validate() const {
        if (!(dlon > 0) || !(dlat > 0)) fail("grid: cell size must be positive (dlon={}, dlat={})", dlon, dlat);
        if (nlon < 1 || nlat < 1) fail("grid: need at least one cell (nlon={}, nlat={})", nlon, nlat);
        const double top = lat0 + (nlat - 1) * dlat;
        if (lat0 < lat_min - 1e-9 || top > lat_max + 1e-9)
            fail("grid: cell centres [{}, {}] leave the coverage band [{}, {}]", lat0, top, lat_min, lat_max);
    }

    Cell cells() const { return static_cast<Cell>(nlon) * nlat; }
    Cell index(int i, int j) const { return static_cast<Cell>(j) * nlon + i; }
    int col(Cell c) const { return c % nlon; }
    int row(Cell c) const { return c / nlon; }
    double lon_at(int i) const { return lon0 + i * dlon; }
    double lat_at(int j) const { return lat0 + j * dlat; }
    geo::LonLat center(Cell c) const { return {lon_at(col(c)), lat_at(row(c))}; }

    /// Cell whose centre coincides with (lon, lat), if any.
    std::optional<Cell> cell_at(double lon, double lat) const {
        const double fi = (lon - lon0) / dlon;
        const double fj = (lat - lat0) / dlat;
        const double ri = std::round(fi), rj = std::round(fj);
        if (std::abs(fi - ri) > 1e-6 || std::abs(fj - rj) > 1e-6) return std::nullopt;
        if (ri < 0 || rj < 0 || ri >= nlon || rj >= nlat) return std::nullopt;
        return index(static_cast<int>(ri), static_cast<int>(rj));
    }
};

/// Daily current vectors (m/s) on the ocean cells of a grid.
struct VectorFieldSeries {
    GridSpec spec;
    std::vector<Day> days;             // strictly increasing
    OceanMask ocean;                   // per cell, 1 = ocean
    std::vector<std::vector<double>> u;  // [day][cell], 0 on land
    std::vector<std::vector<double>> v;

    std::optional<std::size_t> day_index(Day d) const {
        auto it = std::lower_bound(days.begin(), days.end(), d);
        if (it == days.end() || *it != d) return std::nullopt;
        return static_cast<std::size_t>(it - days.begin());
    }
    bool is_ocean(Cell c) const { return ocean[static_cast<std::size_t>(c)] != 0; }
    std::size_t ocean_count() const { return static_cast<std::size_t>(std::count(ocean.begin(), ocean.end(), 1)); }
};

enum class PeriodKind { month, day };

/// Per-cell nonnegative concentrations by month or by day. Missing values are NaN.
struct ConcentrationSeries {
    GridSpec spec;
    PeriodKind kind = PeriodKind::month;
    std::vector<int> periods;                 // Month or Day serials, strictly increasing
    std::vector<std::vector<double>> values;  // [period][cell]
    OceanMask ocean;                          // cells that carry any value

    std::optional<std::size_t> period_index(int serial) const {
        auto it = std::lower_bound(periods.begin(), periods.end(), serial);
        if (it == periods.end() || *it != serial) return std::nullopt;
        return static_cast<std::size_t>(it - periods.begin());
    }

    /// Monthly value, NaN when the month is absent or the value missing.
    double at(Month m, Cell c) const {
        if (kind != PeriodKind::month) fail("concentration series is daily; convert with to_monthly()");
        auto idx = period_index(m.serial);
        if (!idx) return kMissing;
        return values[*idx][static_cast<std::size_t>(c)];
    }
};

struct SenderConfig {
    double buffer_km = 200.0;
    double spacing_km = 250.0;

    double resolution_deg() const { return spacing_km / geo::kKmPerDegreeEquator; }
    void validate() const {
        if (!(buffer_km >= 0)) fail("senders: buffer_km must be >= 0");
        if (!(spacing_km > 0)) fail("senders: spacing_km must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline Cell locate_cell(const GridSpec& spec, const CsvReader& r, double lon, double lat) {
    if (!(lat >= -90.0 && lat <= 90.0)) fail("{}: row {}: latitude out of range ({})", r.path(), r.row(), lat);
    if (!(lon >= -180.0 && lon <= 360.0)) fail("{}: row {}: longitude out of range ({})", r.path(), r.row(), lon);
    auto c = spec.cell_at(lon, lat);
    if (!c) fail("{}: row {}: coordinate ({}, {}) is not a cell centre of the grid", r.path(), r.row(), lon, lat);
    return *c;
}

}  // namespace detail

/// Reads an optional mask file (`lon,lat,ocean`). Cells not listed are land.
inline OceanMask load_mask(const std::string& path, const GridSpec& spec) {
    spec.validate();
    CsvReader r(path, "lon,lat,ocean");
    OceanMask mask(static_cast<std::size_t>(spec.cells()), 0);
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::string> f;
    while (r.next(f)) {
        Cell c = detail::locate_cell(spec, r, r.number(f, 0), r.number(f, 1));
        if (f[2] != "0" && f[2] != "1") fail("{}: row {}: ocean flag must be 0 or 1, got '{}'", path, r.row(), f[2]);
        if (seen[c]) fail("{}: row {}: duplicate cell", path, r.row());
        seen[c] = 1;
        mask[c] = f[2] == "1" ? 1 : 0;
    }
    return mask;
}

/// Reads a vector CSV (`lon,lat,date,u,v`). Cells without rows are land unless
/// `mask` is given, in which case the mask decides and rows on land are dropped.
inline VectorFieldSeries load_vector_field(const std::string& path, const GridSpec& spec,
                                           const std::optional<OceanMask>& mask = std::nullopt) {
    spec.validate();
    CsvReader r(path, "lon,lat,date,u,v");
    struct Row {
        Cell cell;
        Day day;
        double u, v;
        int line;
    };
    std::vector<Row> rows;
    std::vector<std::string> f;
    while (r.next(f)) {
        Cell c = detail::locate_cell(spec, r, r.number(f, 0), r.number(f, 1));
        auto d = parse_day(f[2]);
        if (!d) fail("{}: row {}: malformed date '{}' (expected YYYY-MM-DD)", path, r.row(), f[2]);
        double u = r.number(f, 3), v = r.number(f, 4);
        if (!std::isfinite(u) || !std::isfinite(v)) fail("{}: row {}: non-finite current vector", path, r.row());
        rows.push_back({c, *d, u, v, r.row()});
    }
    if (rows.empty()) fail("{}: no data rows", path);

    VectorFieldSeries s;
    s.spec = spec;
    std::set<Day> day_set;
    for (const auto& row : rows) day_set.insert(row.day);
    s.days.assign(day_set.begin(), day_set.end());

    const auto ncell = static_cast<std::size_t>(spec.cells());
    s.u.assign(s.days.size(), std::vector<double>(ncell, 0.0));
    s.v.assign(s.days.size(), std::vector<double>(ncell, 0.0));
    std::vector<std::vector<std::uint8_t>> seen(s.days.size(), std::vector<std::uint8_t>(ncell, 0));
    OceanMask has_data(ncell, 0);
    for (const auto& row : rows) {
        auto di = *s.day_index(row.day);
        if (seen[di][row.cell]) fail("{}: row {}: duplicate entry for cell and day {}", path, row.line, to_string(row.day));
        seen[di][row.cell] = 1;
        has_data[row.cell] = 1;
        s.u[di][row.cell] = row.u;
        s.v[di][row.cell] = row.v;
    }
    s.ocean = mask ? *mask : has_data;
    if (s.ocean.size() != ncell) fail("mask size does not match grid");
    for (std::size_t c = 0; c < ncell; ++c) {
        if (!s.ocean[c]) {
            for (std::size_t di = 0; di < s.days.size(); ++di) s.u[di][c] = s.v[di][c] = 0.0;
            continue;
        }
        for (std::size_t di = 0; di < s.days.size(); ++di)
            if (!seen[di][c]) {
                auto ll = spec.center(static_cast<Cell>(c));
                fail("{}: ocean cell ({}, {}) has no vector for {}", path, ll.lon, ll.lat, to_string(s.days[di]));
            }
    }
    for (std::size_t i = 1; i < s.days.size(); ++i)
        if (s.days[i] - s.days[i - 1] != 1)
            log(LogLevel::warn, "{}: gap between {} and {}; traces crossing it are truncated", path,
                to_string(s.days[i - 1]), to_string(s.days[i]));
    return s;
}

/// Canonical vector CSV: rows ordered by (date, lat index, lon index), ocean cells only.
inline std::string export_vector_csv(const VectorFieldSeries& s) {
    std::string out = "lon,lat,date,u,v\n";
    for (std::size_t di = 0; di < s.days.size(); ++di) {
        const auto date = to_string(s.days[di]);
        for (Cell c = 0; c < s.spec.cells(); ++c) {
            if (!s.is_ocean(c)) continue;
            auto ll = s.spec.center(c);
            out += fmt::format("{},{},{},{},{}\n", format_double(ll.lon), format_double(ll.lat), date,
                               format_double(s.u[di][c]), format_double(s.v[di][c]));
        }
    }
    return out;
}

inline std::string export_mask_csv(const GridSpec& spec, const OceanMask& ocean) {
    std::string out = "lon,lat,ocean\n";
    for (Cell c = 0; c < spec.cells(); ++c) {
        auto ll = spec.center(c);
        out += fmt::format("{},{},{}\n", format_double(ll.lon), format_double(ll.lat), ocean[c] ? 1 : 0);
    }
    return out;
}

/// Reads a concentration CSV (`lon,lat,period,value`). `NA` or an empty value marks
/// a missing observation, which stays distinct from zero.
inline ConcentrationSeries load_concentration(const std::string& path, const GridSpec& spec) {
    spec.validate();
    CsvReader r(path, "lon,lat,period,value");
    struct Row {
        Cell cell;
        int period;
        double value;
        int line;
    };
    std::vector<Row> rows;
    std::optional<PeriodKind> kind;
    std::vector<std::string> f;
    while (r.next(f)) {
        Cell c = detail::locate_cell(spec, r, r.number(f, 0), r.number(f, 1));
        PeriodKind k;
        int serial;
        if (auto m = parse_month(f[2])) {
            k = PeriodKind::month;
            serial = m->serial;
        } else if (auto d = parse_day(f[2])) {
            k = PeriodKind::day;
            serial = d->serial;
        } else {
            fail("{}: row {}: malformed period '{}' (expected YYYY-MM or YYYY-MM-DD)", path, r.row(), f[2]);
        }
        if (kind && *kind != k) fail("{}: row {}: mixed monthly and daily periods", path, r.row());
        kind = k;
        double v = kMissing;
        if (!is_missing_token(f[3])) {
            v = r.number(f, 3);
            if (!(v >= 0.0) || !std::isfinite(v)) fail("{}: row {}: concentration must be finite and >= 0", path, r.row());
        }
        rows.push_back({c, serial, v, r.row()});
    }
    if (rows.empty()) fail("{}: no data rows", path);

    ConcentrationSeries s;
    s.spec = spec;
    s.kind = *kind;
    std::set<int> ps;
    for (const auto& row : rows) ps.insert(row.period);
    s.periods.assign(ps.begin(), ps.end());
    const auto ncell = static_cast<std::size_t>(spec.cells());
    s.values.assign(s.periods.size(), std::vector<double>(ncell, kMissing));
    std::vector<std::vector<std::uint8_t>> seen(s.periods.size(), std::vector<std::uint8_t>(ncell, 0));
    s.ocean.assign(ncell, 0);
    for (const auto& row : rows) {
        auto pi = *s.period_index(row.period);
        if (seen[pi][row.cell]) fail("{}: row {}: duplicate entry for cell and period", path, row.line);
        seen[pi][row.cell] = 1;
        s.values[pi][row.cell] = row.value;
        s.ocean[row.cell] = 1;
    }
    return s;
}

inline std::string export_concentration_csv(const ConcentrationSeries& s) {
    std::string out = "lon,lat,period,value\n";
    for (std::size_t pi = 0; pi < s.periods.size(); ++pi) {
        const auto period =
            s.kind == PeriodKind::month ? to_string(Month{s.periods[pi]}) : to_string(Day{s.periods[pi]});
        for (Cell c = 0; c < s.spec.cells(); ++c) {
            if (!s.ocean[c]) continue;
            auto ll = s.spec.center(c);
            const double v = s.values[pi][c];
            out += fmt::format("{},{},{},{}\n", format_double(ll.lon), format_double(ll.lat), period,
                               is_missing(v) ? std::string("NA") : format_double(v));
        }
    }
    return out;
}

/// Monthly means of a daily series over the days observed in each month.
inline ConcentrationSeries to_monthly(const ConcentrationSeries& daily) {
    if (daily.kind == PeriodKind::month) return daily;
    ConcentrationSeries m;
    m.spec = daily.spec;
    m.kind = PeriodKind::month;
    m.ocean = daily.ocean;
    const auto ncell = daily.ocean.size();
    std::map<int, std::pair<std::vector<double>, std::vector<int>>> acc;
    for (std::size_t pi = 0; pi < daily.periods.size(); ++pi) {
        auto& [sum, n] = acc.try_emplace(Month::of(Day{daily.periods[pi]}).serial,
                                         std::vector<double>(ncell, 0.0), std::vector<int>(ncell, 0))
                             .first->second;
        for (std::size_t c = 0; c < ncell; ++c) {
            if (is_missing(daily.values[pi][c])) continue;
            sum[c] += daily.values[pi][c];
            ++n[c];
        }
    }
    for (auto& [serial, sn] : acc) {
        m.periods.push_back(serial);
        std::vector<double> row(ncell, kMissing);
        for (std::size_t c = 0; c < ncell; ++c)
            if (sn.second[c] > 0) row[c] = sn.first[c] / sn.second[c];
        m.values.push_back(std::move(row));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Geometry on the mask

/// Ocean cell whose centre is closest to (lon, lat) on the sphere. Ties go to the
/// lowest flat index, i.e. lexicographically smallest (lat-index, lon-index).
inline Cell nearest_ocean_cell(double lon, double lat, const GridSpec& spec, const OceanMask& ocean) {
    Cell best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const geo::LonLat p{lon, lat};
    for (Cell c = 0; c < spec.cells(); ++c) {
        if (!ocean[c]) continue;
        const double d = geo::haversine_km(p, spec.center(c));
        if (d < best_d - 1e-9) {
            best_d = d;
            best = c;
        }
    }
    if (best < 0) fail("nearest_ocean_cell: mask contains no ocean cell");
    return best;
}

/// Ocean cells with at least one land cell among their 8 neighbours.
inline std::vector<Cell> coastal_cells(const GridSpec& spec, const OceanMask& ocean) {
    std::vector<Cell> out;
    for (Cell c = 0; c < spec.cells(); ++c) {
        if (!ocean[c]) continue;
        const int i = spec.col(c), j = spec.row(c);
        bool coast = false;
        for (int dj = -1; dj <= 1 && !coast; ++dj)
            for (int di = -1; di <= 1 && !coast; ++di) {
                const int ii = i + di, jj = j + dj;
                if (ii < 0 || jj < 0 || ii >= spec.nlon || jj >= spec.nlat) continue;
                if (!ocean[spec.index(ii, jj)]) coast = true;
            }
        if (coast) out.push_back(c);
    }
    return out;
}

inline std::vector<Cell> ocean_cells(const OceanMask& ocean) {
    std::vector<Cell> out;
    for (std::size_t c = 0; c < ocean.size(); ++c)
        if (ocean[c]) out.push_back(static_cast<Cell>(c));
    return out;
}

/// Great-circle distance from a cell centre to the nearest land cell centre
/// (infinity when the grid holds no land).
inline double distance_to_land_km(Cell c, const GridSpec& spec, const OceanMask& ocean) {
    double best = std::numeric_limits<double>::infinity();
    const auto p = spec.center(c);
    for (Cell l = 0; l < spec.cells(); ++l)
        if (!ocean[l]) best = std::min(best, geo::haversine_km(p, spec.center(l)));
    return best;
}

/// Ocean cells on the lattice of pitch `cfg.resolution_deg()` anchored at the first
/// cell centre, keeping those at least `cfg.buffer_km` from land. Sorted by cell.
inline std::vector<Cell> select_senders(const GridSpec& spec, const OceanMask& ocean, const SenderConfig& cfg) {
    cfg.validate();
    const double res = cfg.resolution_deg();
    auto lattice_indices = [res](int n, double d) {
        std::vector<int> idx;
        const double extent = (n - 1) * d;
        const int steps = static_cast<int>(std::floor(extent / res + 1e-9));
        for (int k = 0; k <= steps; ++k) {
            const int i = static_cast<int>(std::lround(k * res / d));
            if (idx.empty() || idx.back() != i) idx.push_back(std::min(i, n - 1));
        }
        return idx;
    };
    const auto cols = lattice_indices(spec.nlon, spec.dlon);
    const auto rows = lattice_indices(spec.nlat, spec.dlat);
    std::vector<Cell> out;
    for (int j : rows) {
        if (spec.lat_at(j) < spec.lat_min || spec.lat_at(j) > spec.lat_max) continue;
        for (int i : cols) {
            const Cell c = spec.index(i, j);
            if (!ocean[c]) continue;
            if (distance_to_land_km(c, spec, ocean) >= cfg.buffer_km) out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty())
        log(LogLevel::warn, "select_senders: no lattice cell is {} km or more from land (warnings: 1)", cfg.buffer_km);
    return out;
}

/// Per-period unweighted mean over the ocean cells lying within `buffer_km` of any
/// shoreline point. Missing observations are skipped; a period with no usable cell
/// yields NaN.
inline std::vector<double> shoreline_buffer_mean(const ConcentrationSeries& conc, std::span<const geo::LonLat> shoreline,
                                                 double buffer_km) {
    if (shoreline.empty()) fail("shoreline_buffer_mean: country has no shoreline cell");
    std::vector<Cell> in_buffer;
    for (Cell c = 0; c < conc.spec.cells(); ++c) {
        if (!conc.ocean[c]) continue;
        const auto p = conc.spec.center(c);
        for (const auto& s : shoreline)
            if (geo::haversine_km(p, s) <= buffer_km) {
                in_buffer.push_back(c);
                break;
            }
    }
    std::vector<double> out(conc.periods.size(), kMissing);
    for (std::size_t pi = 0; pi < conc.periods.size(); ++pi) {
        double sum = 0.0;
        int n = 0;
        for (Cell c : in_buffer) {
            const double v = conc.values[pi][c];
            if (is_missing(v)) continue;
            sum += v;
            ++n;
        }
        if (n > 0) out[pi] = sum / n;
    }
    return out;
}

}  // namespace drift
