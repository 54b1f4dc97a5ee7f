#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "drift/core.hpp"
#include "drift/geo.hpp"
#include "drift/grid.hpp"

namespace drift {

enum class AdvectMetric { faithful, spherical };

inline AdvectMetric parse_advect_metric(std::string_view s) {
    if (s == "faithful") return AdvectMetric::faithful;
    if (s == "spherical") return AdvectMetric::spherical;
    fail("unknown advect metric '{}' (expected faithful|spherical)", s);
}

/// Decay coefficients and search-radius schedule for streamline scoring.
struct TransportParams {
    double alpha = 0.8;
    double beta = 0.49;
    double gamma = 0.23;
    double rad0 = 1.0;      // degrees
    double rad_step = 0.05; // degrees per step
    int max_steps = 90;
    double theta_cutoff = 0.4;  // radians
    AdvectMetric metric = AdvectMetric::faithful;

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0 || rad0 < 0 || rad_step < 0 || theta_cutoff < 0)
            fail("transport: parameters must be nonnegative");
        if (max_steps < 1) fail("transport: max_steps must be >= 1");
    }
    double radius(int t) const { return rad0 + t * rad_step; }
};

struct Vec2 {
    double u = 0.0;
    double v = 0.0;
};

// ---------------------------------------------------------------------------
// Interpolation on the local hull of ocean cell centres

/// Weights over the (up to four) ocean cell centres enclosing a point. The support
/// is the convex hull of the enclosing ocean centres: a rectangle, triangle, segment
/// or single node depending on how many corners are ocean.
struct Stencil {
    std::array<Cell, 4> cells{};
    std::array<double, 4> weights{};
    int n = 0;
};

inline std::optional<Stencil> locate(const GridSpec& spec, const OceanMask& ocean, geo::LonLat p) {
    constexpr double eps = 1e-9;
    double fx = (p.lon - spec.lon0) / spec.dlon;
    double fy = (p.lat - spec.lat0) / spec.dlat;
    if (!(fx >= -eps && fx <= spec.nlon - 1 + eps && fy >= -eps && fy <= spec.nlat - 1 + eps)) return std::nullopt;
    fx = std::clamp(fx, 0.0, static_cast<double>(spec.nlon - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(spec.nlat - 1));
    const int i0 = spec.nlon == 1 ? 0 : std::min(static_cast<int>(std::floor(fx)), spec.nlon - 2);
    const int j0 = spec.nlat == 1 ? 0 : std::min(static_cast<int>(std::floor(fy)), spec.nlat - 2);
    const int i1 = spec.nlon == 1 ? i0 : i0 + 1;
    const int j1 = spec.nlat == 1 ? j0 : j0 + 1;
    const double tx = spec.nlon == 1 ? 0.0 : fx - i0;
    const double ty = spec.nlat == 1 ? 0.0 : fy - j0;

    // Distinct corners in unit-square coordinates.
    struct Corner {
        Cell cell;
        double x, y;
    };
    std::array<Corner, 4> all{};
    int ncorner = 0;
    auto add = [&](int i, int j, double x, double y) {
        const Cell c = spec.index(i, j);
        for (int k = 0; k < ncorner; ++k)
            if (all[k].cell == c) return;
        if (ocean[c]) all[ncorner++] = {c, x, y};
    };
    add(i0, j0, 0, 0);
    add(i1, j0, 1, 0);
    add(i0, j1, 0, 1);
    add(i1, j1, 1, 1);

    Stencil s;
    s.n = ncorner;
    for (int k = 0; k < ncorner; ++k) s.cells[k] = all[k].cell;

    if (ncorner == 4) {
        s.weights = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
        return s;
    }
    if (ncorner == 3) {
        const auto& a = all[0];
        const auto& b = all[1];
        const auto& c = all[2];
        const double v0x = b.x - a.x, v0y = b.y - a.y;
        const double v1x = c.x - a.x, v1y = c.y - a.y;
        const double v2x = tx - a.x, v2y = ty - a.y;
        const double den = v0x * v1y - v1x * v0y;
        const double lb = (v2x * v1y - v1x * v2y) / den;
        const double lc = (v0x * v2y - v2x * v0y) / den;
        const double la = 1.0 - lb - lc;
        if (la < -eps || lb < -eps || lc < -eps) return std::nullopt;
        s.weights = {la, lb, lc, 0.0};
        return s;
    }
    if (ncorner == 2) {
        const auto& a = all[0];
        const auto& b = all[1];
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        const double t = ((tx - a.x) * dx + (ty - a.y) * dy) / len2;
        const double px = a.x + t * dx - tx, py = a.y + t * dy - ty;
        if (t < -eps || t > 1 + eps || std::hypot(px, py) > eps) return std::nullopt;
        s.weights = {1.0 - t, t, 0.0, 0.0};
        return s;
    }
    if (ncorner == 1) {
        if (std::hypot(tx - all[0].x, ty - all[0].y) > eps) return std::nullopt;
        s.weights = {1.0, 0.0, 0.0, 0.0};
        return s;
    }
    return std::nullopt;
}

/// Current vector at `p` on day index `day`; nullopt signals that `p` lies outside
/// the hull of the surrounding ocean cell centres.
inline std::optional<Vec2> interpolate_current(const VectorFieldSeries& field, std::size_t day, geo::LonLat p) {
    auto st = locate(field.spec, field.ocean, p);
    if (!st) return std::nullopt;
    Vec2 c;
    for (int k = 0; k < st->n; ++k) {
        c.u += st->weights[k] * field.u[day][st->cells[k]];
        c.v += st->weights[k] * field.v[day][st->cells[k]];
    }
    return c;
}

/// One-day displacement. Faithful mode divides both axis displacements by the
/// length of a longitude degree at the current latitude; spherical mode uses the
/// meridian degree length for the latitude displacement. Returns nullopt when
/// |lat| > 85 (polar singularity).
inline std::optional<geo::LonLat> advect(geo::LonLat p, Vec2 c, AdvectMetric metric = AdvectMetric::faithful) {
    if (std::abs(p.lat) > 85.0) return std::nullopt;
    constexpr double seconds = 24.0 * 3600.0;
    const double lon_len = geo::metres_per_lon_degree(p.lat);
    const double lat_len = metric == AdvectMetric::faithful ? lon_len : geo::metres_per_lat_degree();
    return geo::LonLat{p.lon + seconds * c.u / lon_len, p.lat + seconds * c.v / lat_len};
}

// ---------------------------------------------------------------------------
// Scoring

struct TraceState {
    Cell sender = 0;
    Day start;
    int t = 0;
    geo::LonLat p;
    double rad = 0.0;
    Vec2 c;
};

struct StepScore {
    Cell sender = 0;
    Cell receiver = 0;
    Day start;
    int t = 0;
    double value = 0.0;

    Day arrival() const { return start + t; }
};

/// Exponential-decay intensity of `receiver` at one streamline step. Distances are
/// arc degrees from p_t; the angle cutoff tests the unsigned angle between the
/// current and the p_t->receiver vector, while the exponent uses the absolute
/// projection of that (unnormalised) vector on the unit normal to the current.
inline double score_step(const TraceState& s, geo::LonLat receiver, const TransportParams& prm) {
    const double dist = geo::arc_degrees(receiver, s.p);
    if (dist > s.rad) return 0.0;
    const double speed = std::hypot(s.c.u, s.c.v);
    if (speed == 0.0) return dist == 0.0 ? std::exp(-prm.alpha * s.rad) : 0.0;
    const double lx = geo::wrap_lon_delta(receiver.lon - s.p.lon);
    const double ly = receiver.lat - s.p.lat;
    const double lnorm = std::hypot(lx, ly);
    if (lnorm > 0.0) {
        const double cosang = std::clamp((lx * s.c.u + ly * s.c.v) / (lnorm * speed), -1.0, 1.0);
        if (std::acos(cosang) > prm.theta_cutoff) return 0.0;
    }
    const double theta = std::abs((s.c.v * lx - s.c.u * ly) / speed);
    return std::exp(-prm.alpha * s.rad - prm.beta * theta - prm.gamma * dist);
}

/// Cell-indexed lookup of receivers within an arc-degree radius.
class ReceiverIndex {
public:
    ReceiverIndex(const GridSpec& spec, std::span<const Cell> receivers)
        : spec_(spec), receivers_(receivers.begin(), receivers.end()), slot_(static_cast<std::size_t>(spec.cells()), -1) {
        std::sort(receivers_.begin(), receivers_.end());
        receivers_.erase(std::unique(receivers_.begin(), receivers_.end()), receivers_.end());
        for (std::size_t k = 0; k < receivers_.size(); ++k) slot_[receivers_[k]] = static_cast<int>(k);
    }

    const std::vector<Cell>& receivers() const { return receivers_; }
    int slot(Cell c) const { return slot_[c]; }

    /// Calls fn(cell, centre, arc_degrees) for every receiver within `radius` of p,
    /// in increasing cell order.
    template <typename Fn>
    void for_each_within(geo::LonLat p, double radius, Fn&& fn) const {
        const double lat_lo = p.lat - radius, lat_hi = p.lat + radius;
        int j_lo = static_cast<int>(std::floor((lat_lo - spec_.lat0) / spec_.dlat)) - 1;
        int j_hi = static_cast<int>(std::ceil((lat_hi - spec_.lat0) / spec_.dlat)) + 1;
        j_lo = std::max(j_lo, 0);
        j_hi = std::min(j_hi, spec_.nlat - 1);
        int i_lo = 0, i_hi = spec_.nlon - 1;
        const double max_lat = std::abs(p.lat) + radius;
        if (max_lat < 89.0) {
            const double half = 1.1 * radius / std::cos(max_lat * geo::kDegToRad);
            i_lo = std::max(i_lo, static_cast<int>(std::floor((p.lon - half - spec_.lon0) / spec_.dlon)) - 1);
            i_hi = std::min(i_hi, static_cast<int>(std::ceil((p.lon + half - spec_.lon0) / spec_.dlon)) + 1);
        }
        for (int j = j_lo; j <= j_hi; ++j)
            for (int i = i_lo; i <= i_hi; ++i) {
                const Cell c = spec_.index(i, j);
                if (slot_[c] < 0) continue;
                const auto rc = spec_.center(c);
                const double d = geo::arc_degrees(rc, p);
                if (d <= radius) fn(c, rc, d);
            }
    }

private:
    GridSpec spec_;
    std::vector<Cell> receivers_;
    std::vector<int> slot_;
};

enum class TraceStop { completed, hull_exit, coverage_end, polar_singularity };

inline const char* to_string(TraceStop s) {
    switch (s) {
        case TraceStop::completed: return "completed";
        case TraceStop::hull_exit: return "hull_exit";
        case TraceStop::coverage_end: return "coverage_end";
        case TraceStop::polar_singularity: return "polar_singularity";
    }
    return "?";
}

struct TracePoint {
    int t;
    geo::LonLat p;
    double rad;
    Vec2 c;
};

struct Trace {
    std::vector<TracePoint> path;
    std::vector<StepScore> scores;
    TraceStop stop = TraceStop::completed;
};

/// Follows the daily currents from `sender` starting on `start`, scoring every
/// receiver in the growing search disk at each step.
inline Trace trace_streamline(Cell sender, Day start, const VectorFieldSeries& field, const TransportParams& prm,
                              const ReceiverIndex& receivers) {
    if (!field.is_ocean(sender)) {
        auto ll = field.spec.center(sender);
        fail("trace_streamline: sender ({}, {}) is on land", ll.lon, ll.lat);
    }
    Trace tr;
    TraceState st;
    st.sender = sender;
    st.start = start;
    st.p = field.spec.center(sender);
    for (int t = 0; t < prm.max_steps; ++t) {
        auto di = field.day_index(start + t);
        if (!di) {
            tr.stop = TraceStop::coverage_end;
            return tr;
        }
        auto c = interpolate_current(field, *di, st.p);
        if (!c) {
            tr.stop = TraceStop::hull_exit;
            return tr;
        }
        st.t = t;
        st.c = *c;
        st.rad = prm.radius(t);
        tr.path.push_back({t, st.p, st.rad, st.c});
        receivers.for_each_within(st.p, st.rad, [&](Cell r, geo::LonLat rc, double) {
            const double s = score_step(st, rc, prm);
            if (s > 0.0) tr.scores.push_back({sender, r, start, t, s});
        });
        if (t + 1 == prm.max_steps) break;
        auto next = advect(st.p, st.c, prm.metric);
        if (!next) {
            tr.stop = TraceStop::polar_singularity;
            return tr;
        }
        if (!locate(field.spec, field.ocean, *next)) {
            tr.stop = TraceStop::hull_exit;
            return tr;
        }
        st.p = *next;
    }
    tr.stop = TraceStop::completed;
    return tr;
}

// ---------------------------------------------------------------------------
// Aggregation

struct DailyKey {
    Cell sender;
    Cell receiver;
    Day arrival;
    auto operator<=>(const DailyKey&) const = default;
};

using DailyScores = std::map<DailyKey, double>;

/// Sums step scores by (sender, receiver, arrival day). Scores are summed in
/// (sender, receiver, arrival, start, step) order so the result does not depend on
/// input order.
inline DailyScores aggregate_daily(std::span<const StepScore> scores) {
    std::vector<StepScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [](const StepScore& a, const StepScore& b) {
        return std::tuple(a.sender, a.receiver, a.arrival(), a.start, a.t, a.value) <
               std::tuple(b.sender, b.receiver, b.arrival(), b.start, b.t, b.value);
    });
    DailyScores out;
    for (const auto& s : sorted) out[{s.sender, s.receiver, s.arrival()}] += s.value;
    return out;
}

/// Months starting at least `lead_days` after `first` and ending on or before `last`.
inline std::vector<Month> complete_months(Day first, Day last, int lead_days) {
    std::vector<Month> out;
    for (Month m = Month::of(first); m.first_day() <= last; ++m) {
        if (m.first_day() - first < lead_days) continue;
        if (m.first_day() + (m.days_in_month() - 1) > last) continue;
        out.push_back(m);
    }
    return out;
}

struct ScorePair {
    Cell sender;
    Cell receiver;
    auto operator<=>(const ScorePair&) const = default;
};

/// Monthly downstream intensity per (sender, receiver) pair. Every pair carries a
/// value for every complete month; `filled` marks zero-filled entries.
struct ScoreMatrix {
    GridSpec spec;
    std::vector<Month> months;
    std::vector<ScorePair> pairs;
    std::vector<std::vector<double>> values;           // [pair][month]
    std::vector<std::vector<std::uint8_t>> filled;     // [pair][month]

    std::optional<std::size_t> month_index(Month m) const {
        auto it = std::lower_bound(months.begin(), months.end(), m);
        if (it == months.end() || *it != m) return std::nullopt;
        return static_cast<std::size_t>(it - months.begin());
    }
};

/// Averages daily values over the calendar days of each complete month, treating
/// absent days as zero. Pairs seen on any day get an entry in every complete month.
inline ScoreMatrix aggregate_monthly(const DailyScores& daily, const GridSpec& spec, Day first, Day last,
                                     int lead_days) {
    ScoreMatrix m;
    m.spec = spec;
    m.months = complete_months(first, last, lead_days);
    for (const auto& [k, v] : daily) {
        ScorePair p{k.sender, k.receiver};
        if (m.pairs.empty() || m.pairs.back() != p) m.pairs.push_back(p);
    }
    m.values.assign(m.pairs.size(), std::vector<double>(m.months.size(), 0.0));
    m.filled.assign(m.pairs.size(), std::vector<std::uint8_t>(m.months.size(), 1));
    std::size_t pi = 0;
    for (const auto& [k, v] : daily) {
        while (m.pairs[pi] != ScorePair{k.sender, k.receiver}) ++pi;
        auto mi = m.month_index(Month::of(k.arrival));
        if (!mi) continue;
        m.values[pi][*mi] += v;
        m.filled[pi][*mi] = 0;
    }
    for (auto& row : m.values)
        for (std::size_t mi = 0; mi < m.months.size(); ++mi) row[mi] /= m.months[mi].days_in_month();
    return m;
}

inline std::string export_score_matrix_csv(const ScoreMatrix& m) {
    std::string out = "sender_lon,sender_lat,receiver_lon,receiver_lat,month,score\n";
    for (std::size_t pi = 0; pi < m.pairs.size(); ++pi) {
        const auto s = m.spec.center(m.pairs[pi].sender);
        const auto r = m.spec.center(m.pairs[pi].receiver);
        const auto prefix = fmt::format("{},{},{},{}", format_double(s.lon), format_double(s.lat),
                                        format_double(r.lon), format_double(r.lat));
        for (std::size_t mi = 0; mi < m.months.size(); ++mi)
            out += fmt::format("{},{},{}\n", prefix, to_string(m.months[mi]), format_double(m.values[pi][mi]));
    }
    return out;
}

/// Reads a score matrix CSV back; zero-valued rows are marked as filled.
inline ScoreMatrix load_score_matrix(const std::string& path, const GridSpec& spec) {
    CsvReader r(path, "sender_lon,sender_lat,receiver_lon,receiver_lat,month,score");
    std::map<ScorePair, std::map<Month, double>> rows;
    std::set<Month> months;
    std::vector<std::string> f;
    while (r.next(f)) {
        auto s = spec.cell_at(r.number(f, 0), r.number(f, 1));
        auto c = spec.cell_at(r.number(f, 2), r.number(f, 3));
        if (!s || !c) fail("{}: row {}: coordinate is not a cell centre of the grid", path, r.row());
        auto mo = parse_month(f[4]);
        if (!mo) fail("{}: row {}: malformed month '{}'", path, r.row(), f[4]);
        const double v = r.number(f, 5);
        if (!(v >= 0)) fail("{}: row {}: negative score", path, r.row());
        if (!rows[{*s, *c}].emplace(*mo, v).second) fail("{}: row {}: duplicate pair-month", path, r.row());
        months.insert(*mo);
    }
    ScoreMatrix m;
    m.spec = spec;
    m.months.assign(months.begin(), months.end());
    for (const auto& [p, byMonth] : rows) {
        if (byMonth.size() != m.months.size())
            fail("{}: pair is missing months ({} of {})", path, byMonth.size(), m.months.size());
        m.pairs.push_back(p);
        std::vector<double> vals;
        std::vector<std::uint8_t> fl;
        for (const auto& [mo, v] : byMonth) {
            vals.push_back(v);
            fl.push_back(v == 0.0 ? 1 : 0);
        }
        m.values.push_back(std::move(vals));
        m.filled.push_back(std::move(fl));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Runs

/// Traces every sender from every day in [first, last] and returns daily sums.
/// Senders are distributed across `workers` threads; each sender's traces are
/// accumulated in start-day order, which reproduces the sorted summation of
/// aggregate_daily exactly for any worker count.
inline DailyScores score_run(const VectorFieldSeries& field, std::span<const Cell> senders,
                             const ReceiverIndex& receivers, const TransportParams& prm, Day first, Day last,
                             int workers = 1) {
    prm.validate();
    const int ndays = (last - first) + 1;
    if (ndays < 1) return {};
    const int span_days = ndays + prm.max_steps;
    const auto nrec = receivers.receivers().size();

    struct SenderResult {
        std::vector<double> acc;           // [receiver slot][arrival offset]
        std::vector<std::uint8_t> touched;
    };
    std::vector<SenderResult> results(senders.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= senders.size()) return;
            auto& res = results[k];
            res.acc.assign(nrec * span_days, 0.0);
            res.touched.assign(nrec * span_days, 0);
            for (Day d = first; d <= last; ++d) {
                if (!field.day_index(d)) continue;
                auto tr = trace_streamline(senders[k], d, field, prm, receivers);
                for (const auto& s : tr.scores) {
                    const std::size_t idx = static_cast<std::size_t>(receivers.slot(s.receiver)) * span_days +
                                            static_cast<std::size_t>(s.arrival() - first);
                    res.acc[idx] += s.value;
                    res.touched[idx] = 1;
                }
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(senders.size())));
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < nthreads; ++w) pool.emplace_back(work);
    }

    DailyScores out;
    for (std::size_t k = 0; k < senders.size(); ++k)
        for (std::size_t r = 0; r < nrec; ++r)
            for (int off = 0; off < span_days; ++off) {
                const std::size_t idx = r * span_days + off;
                if (results[k].touched[idx])
                    out.emplace(DailyKey{senders[k], receivers.receivers()[r], first + off}, results[k].acc[idx]);
            }
    return out;
}

/// Per-cell sum of step scores of one trace, for heat-map diagnostics.
inline std::vector<double> heatmap(const Trace& tr, const GridSpec& spec) {
    std::vector<double> grid(static_cast<std::size_t>(spec.cells()), 0.0);
    for (const auto& s : tr.scores) grid[s.receiver] += s.value;
    return grid;
}

inline std::string export_heatmap_csv(const std::vector<double>& grid, const GridSpec& spec, const OceanMask& ocean) {
    std::string out = "lon,lat,score_sum\n";
    for (Cell c = 0; c < spec.cells(); ++c) {
        if (!ocean[c]) continue;
        auto ll = spec.center(c);
        out += fmt::format("{},{},{}\n", format_double(ll.lon), format_double(ll.lat), format_double(grid[c]));
    }
    return out;
}

inline std::string export_trace_csv(const Trace& tr, Cell sender, Day start, const GridSpec& spec) {
    std::string out;
    const auto s = spec.center(sender);
    for (const auto& pt : tr.path)
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", format_double(s.lon), format_double(s.lat), to_string(start),
                           pt.t, format_double(pt.p.lon), format_double(pt.p.lat), format_double(pt.rad),
                           format_double(pt.c.u), format_double(pt.c.v));
    return out;
}

inline constexpr const char* kTraceCsvHeader = "sender_lon,sender_lat,start_day,step,lon,lat,rad,u,v\n";

}  // namespace drift
