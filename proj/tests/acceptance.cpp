// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "drift/config.hpp"
#include "drift/econometrics.hpp"
#include "drift/exposure.hpp"
#include "drift/synth.hpp"
#include "drift/transport.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace drift;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testutil::TempDir;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

synth::DgpConfig shipped_dgp(const std::string& name) {
    auto cfg = load_run_config(std::string(DRIFT_SOURCE_DIR) + "/configs/" + name);
    if (!cfg.synth) fail("{}: no [synth] section", name);
    return *cfg.synth;
}

// ---------------------------------------------------------------------------
// Brute-force transport

constexpr double kEarthRadiusM = 6371000.0;

struct Pt {
    double lon, lat;
};

// Current on the hull of the ocean corners around p, computed in degree
// coordinates. nullopt when p is outside the hull.
std::optional<std::pair<double, double>> brute_current(const VectorFieldSeries& f, std::size_t day, Pt p) {
    const auto& g = f.spec;
    const double tol = 1e-9;
    double fx = (p.lon - g.lon0) / g.dlon, fy = (p.lat - g.lat0) / g.dlat;
    if (fx < -tol || fy < -tol || fx > g.nlon - 1 + tol || fy > g.nlat - 1 + tol) return std::nullopt;
    fx = std::clamp(fx, 0.0, g.nlon - 1.0);
    fy = std::clamp(fy, 0.0, g.nlat - 1.0);
    const int i0 = std::min(static_cast<int>(std::floor(fx)), g.nlon - 2);
    const int j0 = std::min(static_cast<int>(std::floor(fy)), g.nlat - 2);
    struct Node {
        double x, y, u, v;
    };
    std::vector<Node> nodes;
    for (auto [di, dj] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
        const Cell c = g.index(i0 + di, j0 + dj);
        if (!f.ocean[c]) continue;
        nodes.push_back({g.lon0 + (i0 + di) * g.dlon, g.lat0 + (j0 + dj) * g.dlat, f.u[day][c], f.v[day][c]});
    }
    const double x = p.lon, y = p.lat;
    if (nodes.size() == 4) {
        const double tx = (x - nodes[0].x) / g.dlon, ty = (y - nodes[0].y) / g.dlat;
        auto lerp = [&](double a, double b, double c, double d) {
            return a * (1 - tx) * (1 - ty) + b * tx * (1 - ty) + c * (1 - tx) * ty + d * tx * ty;
        };
        return std::pair{lerp(nodes[0].u, nodes[1].u, nodes[2].u, nodes[3].u),
                         lerp(nodes[0].v, nodes[1].v, nodes[2].v, nodes[3].v)};
    }
    if (nodes.size() == 3) {
        const auto &a = nodes[0], &b = nodes[1], &c = nodes[2];
        const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        const double wb = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
        const double wc = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
        const double wa = 1 - wb - wc;
        if (wa < -tol || wb < -tol || wc < -tol) return std::nullopt;
        return std::pair{wa * a.u + wb * b.u + wc * c.u, wa * a.v + wb * b.v + wc * c.v};
    }
    if (nodes.size() == 2) {
        const auto &a = nodes[0], &b = nodes[1];
        const double ex = (b.x - a.x) / g.dlon, ey = (b.y - a.y) / g.dlat;
        const double px = (x - a.x) / g.dlon, py = (y - a.y) / g.dlat;
        const double s = (px * ex + py * ey) / (ex * ex + ey * ey);
        if (s < -tol || s > 1 + tol || std::abs(px * ey - py * ex) / std::hypot(ex, ey) > tol) return std::nullopt;
        return std::pair{(1 - s) * a.u + s * b.u, (1 - s) * a.v + s * b.v};
    }
    if (nodes.size() == 1) {
        if (std::hypot((x - nodes[0].x) / g.dlon, (y - nodes[0].y) / g.dlat) > tol) return std::nullopt;
        return std::pair{nodes[0].u, nodes[0].v};
    }
    return std::nullopt;
}

double brute_score(Pt p, double u, double v, Pt r, double rad, const TransportParams& prm) {
    const double d = testutil::oracle_deg(r.lon, r.lat, p.lon, p.lat);
    if (d > rad) return 0.0;
    const double speed = std::sqrt(u * u + v * v);
    if (speed == 0.0) return d == 0.0 ? std::exp(-prm.alpha * rad) : 0.0;
    const double lx = r.lon - p.lon, ly = r.lat - p.lat;
    const double cross = v * lx - u * ly;
    if (lx != 0.0 || ly != 0.0) {
        const double angle = std::abs(std::atan2(cross, u * lx + v * ly));
        if (angle > prm.theta_cutoff) return 0.0;
    }
    return std::exp(-prm.alpha * rad - prm.beta * std::abs(cross) / speed - prm.gamma * d);
}

using BruteDaily = std::map<std::tuple<Cell, Cell, int>, double>;

BruteDaily brute_daily(const VectorFieldSeries& f, const std::vector<Cell>& senders, const std::vector<Cell>& receivers,
                       const TransportParams& prm, Day first, Day last) {
    const auto& g = f.spec;
    BruteDaily out;
    for (Cell s : senders) {
        for (Day d = first; d <= last; ++d) {
            Pt p{g.lon0 + g.col(s) * g.dlon, g.lat0 + g.row(s) * g.dlat};
            for (int t = 0; t < prm.max_steps; ++t) {
                auto di = f.day_index(d + t);
                if (!di) break;
                auto c = brute_current(f, *di, p);
                if (!c) break;
                const double rad = prm.rad0 + prm.rad_step * t;
                for (Cell r : receivers) {
                    const Pt rp{g.lon0 + g.col(r) * g.dlon, g.lat0 + g.row(r) * g.dlat};
                    const double sc = brute_score(p, c->first, c->second, rp, rad, prm);
                    if (sc > 0.0) out[{s, r, (d + t).serial}] += sc;
                }
                if (t + 1 == prm.max_steps) break;
                if (std::abs(p.lat) > 85.0) break;
                const double metres = kEarthRadiusM * std::numbers::pi / 180.0 * std::cos(p.lat * std::numbers::pi / 180.0);
                const Pt next{p.lon + 86400.0 * c->first / metres, p.lat + 86400.0 * c->second / metres};
                if (!brute_current(f, *di, next)) break;
                p = next;
            }
        }
    }
    return out;
}

// Months whose first day is at least `lead` days after `first` and whose last
// day is on or before `last`, as (year, month) pairs.
std::vector<std::pair<int, unsigned>> brute_complete_months(Day from, Day to, int lead) {
    using namespace std::chrono;
    const sys_days f{days{from.serial}}, l{days{to.serial}};
    std::vector<std::pair<int, unsigned>> out;
    year_month ym = year_month_day{f}.year() / year_month_day{f}.month();
    for (; sys_days{ym / 1} <= l; ym += months{1}) {
        const sys_days a{ym / 1}, b{ym / last};
        if ((a - f).count() >= lead && b <= l) out.emplace_back(int(ym.year()), unsigned(ym.month()));
    }
    return out;
}

struct World {
    synth::DgpConfig dgp;
    VectorFieldSeries field;
    std::vector<Cell> receivers;
};

World small_world(int n, double dd, int land_cols, Day start, Day end, std::uint64_t seed) {
    World w;
    auto& d = w.dgp;
    d.seed = seed;
    d.grid = GridSpec{0.0, -1.0, dd, dd, n, n, -37.0, 37.0};
    d.coast_width = land_cols;
    d.coast_wiggle = land_cols > 0 ? 1.0 : 0.0;
    d.start = start;
    d.end = end;
    d.kind = synth::FieldKind::random_divfree;
    d.magnitude = 0.25;
    const auto mask = synth::gen_mask(d);
    w.field = synth::gen_current_field(d, mask);
    w.receivers = coastal_cells(d.grid, w.field.ocean);
    return w;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome transport_oracle() {
    const auto t0 = Clock::now();
    const Day first = Day::from_ymd(2017, 1, 1), last = first + 59;
    TransportParams prm;
    prm.max_steps = 15;
    auto w = small_world(10, 0.2137, 2, first, last + prm.max_steps, 11);
    const auto& g = w.dgp.grid;
    const std::vector<Cell> senders = {g.index(4, 2), g.index(6, 5), g.index(8, 8)};
    for (Cell s : senders)
        if (!w.field.ocean[s]) return {false, "sender on land"};

    ReceiverIndex index(g, w.receivers);
    auto daily = score_run(w.field, senders, index, prm, first, last, 3);
    auto matrix = aggregate_monthly(daily, g, first, last, prm.max_steps);
    TempDir dir("accept_transport");
    const auto path = dir.file("score_matrix.csv", export_score_matrix_csv(matrix));
    auto loaded = load_score_matrix(path, g);

    auto brute = brute_daily(w.field, senders, w.receivers, prm, first, last);
    double daily_err = 0.0;
    if (brute.size() != daily.size()) return {false, fmt::format("daily keys {} vs {}", daily.size(), brute.size())};
    for (const auto& [k, v] : daily) {
        auto it = brute.find({k.sender, k.receiver, k.arrival.serial});
        if (it == brute.end()) return {false, "daily key missing from brute force"};
        daily_err = std::max(daily_err, std::abs(it->second - v));
    }

    std::set<std::pair<Cell, Cell>> pairs;
    for (const auto& [k, v] : brute) pairs.insert({std::get<0>(k), std::get<1>(k)});
    const auto months = brute_complete_months(first, last, prm.max_steps);
    if (loaded.pairs.size() != pairs.size() || loaded.months.size() != months.size())
        return {false, fmt::format("matrix shape {}x{} vs {}x{}", loaded.pairs.size(), loaded.months.size(),
                                   pairs.size(), months.size())};
    double monthly_err = 0.0;
    std::size_t pi = 0;
    for (const auto& [s, r] : pairs) {
        if (loaded.pairs[pi].sender != s || loaded.pairs[pi].receiver != r) return {false, "pair order differs"};
        for (std::size_t mi = 0; mi < months.size(); ++mi) {
            const Day a = Day::from_ymd(months[mi].first, months[mi].second, 1);
            const int nd = Month::of(a).days_in_month();
            double sum = 0.0;
            for (int k = 0; k < nd; ++k)
                if (auto it = brute.find({s, r, (a + k).serial}); it != brute.end()) sum += it->second;
            monthly_err = std::max(monthly_err, std::abs(loaded.values[pi][mi] - sum / nd));
        }
        ++pi;
    }
    const double secs = seconds_since(t0);
    const bool ok = daily_err <= 1e-12 && monthly_err <= 1e-12 && secs < 10.0 && !pairs.empty();
    return {ok, fmt::format("{} pairs, {} month(s), max |diff| daily {:.2e} monthly {:.2e}, {:.2f} s", pairs.size(),
                            months.size(), daily_err, monthly_err, secs)};
}

Outcome closed_form_trajectory() {
    const double u = 1.2884;
    const double expected = u * 86400.0 / (kEarthRadiusM * std::numbers::pi / 180.0);
    VectorFieldSeries f;
    f.spec = GridSpec{0.0, -1.0, 1.0, 1.0, 120, 3, -37.0, 37.0};
    f.ocean.assign(static_cast<std::size_t>(f.spec.cells()), 1);
    const Day d0 = Day::from_ymd(2017, 1, 1);
    for (int k = 0; k < 90; ++k) {
        f.days.push_back(d0 + k);
        f.u.emplace_back(f.ocean.size(), u);
        f.v.emplace_back(f.ocean.size(), 0.0);
    }
    TransportParams prm;
    ReceiverIndex none(f.spec, std::vector<Cell>{});
    auto tr = trace_streamline(f.spec.index(0, 1), d0, f, prm, none);
    if (tr.path.size() != 90) return {false, fmt::format("{} steps traced", tr.path.size())};
    double worst = 0.0;
    for (std::size_t k = 1; k < tr.path.size(); ++k) {
        const double dlon = tr.path[k].p.lon - tr.path[k - 1].p.lon;
        worst = std::max(worst, std::abs(dlon / expected - 1.0));
        if (tr.path[k].p.lat != 0.0) return {false, "latitude drifted"};
    }
    return {worst <= 1e-6, fmt::format("90 steps, dlon {:.7f} deg, max rel error {:.1e}; quoted 1.00133 is {:.1e} off",
                                       expected, worst, std::abs(1.00133 / expected - 1.0))};
}

Outcome score_point_check() {
    TransportParams prm;
    VectorFieldSeries f;
    f.spec = GridSpec{0.0, 0.0, 0.25, 0.25, 5, 5, -37.0, 37.0};
    f.ocean.assign(25, 1);
    f.days = {Day::from_ymd(2017, 1, 1)};
    f.u = {std::vector<double>(25, 0.3)};
    f.v = {std::vector<double>(25, -0.1)};
    const Cell s = f.spec.index(2, 2);
    ReceiverIndex rec(f.spec, std::vector<Cell>{s});
    prm.max_steps = 1;
    auto tr = trace_streamline(s, f.days[0], f, prm, rec);
    if (tr.scores.size() != 1) return {false, "co-located receiver not scored"};
    const double v = tr.scores[0].value;
    const bool ok = std::abs(v - std::exp(-0.8)) <= 1e-9 && std::abs(v - 0.449329) <= 5e-7;
    return {ok, fmt::format("score {:.9f}", v)};
}

Outcome zero_fill() {
    const Day first = Day::from_ymd(2016, 1, 1), last = Day::from_ymd(2016, 12, 31);
    TransportParams prm;  // 90 steps, 90-day lead
    auto w = small_world(10, 0.25, 2, first, last + prm.max_steps, 5);
    const auto& g = w.dgp.grid;
    SenderConfig sc;
    sc.buffer_km = 0.0;
    sc.spacing_km = 60.0;
    auto senders = select_senders(g, w.field.ocean, sc);
    ReceiverIndex index(g, w.receivers);
    auto daily = score_run(w.field, senders, index, prm, first, last, 4);
    auto matrix = aggregate_monthly(daily, g, first, last, 90);

    std::set<ScorePair> scored;
    for (const auto& [k, v] : daily) scored.insert({k.sender, k.receiver});
    const auto months = brute_complete_months(first, last, 90);
    bool ok = !scored.empty() && matrix.months.size() == months.size() &&
              std::set<ScorePair>(matrix.pairs.begin(), matrix.pairs.end()) == scored &&
              matrix.pairs.size() == scored.size();
    for (std::size_t mi = 0; ok && mi < months.size(); ++mi)
        ok = matrix.months[mi] == Month::from_ym(months[mi].first, months[mi].second);
    // Count rows per (pair, month) in the exported matrix.
    std::map<std::pair<std::string, std::string>, int> counts;
    const auto csv = export_score_matrix_csv(matrix);
    std::size_t rows = 0, pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const auto end = csv.find('\n', pos);
        const auto line = csv.substr(pos, end - pos);
        const auto c4 = line.rfind(',');
        const auto c3 = line.rfind(',', c4 - 1);
        ++counts[{line.substr(0, c3), line.substr(c3 + 1, c4 - c3 - 1)}];
        ++rows;
        pos = end + 1;
    }
    ok = ok && rows == scored.size() * months.size() && counts.size() == rows;
    std::size_t zeros = 0;
    for (const auto& row : matrix.values) zeros += static_cast<std::size_t>(std::count(row.begin(), row.end(), 0.0));
    return {ok, fmt::format("{} pairs x {} complete months = {} rows, {} zero-filled", scored.size(), months.size(),
                            rows, zeros)};
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& x) {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0 + 1.0;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

Outcome passthrough() {
    const auto t0 = Clock::now();
    const auto cfg = load_run_config(std::string(DRIFT_SOURCE_DIR) + "/configs/passthrough.toml");
    const auto& prm = cfg.transport;
    double worst = -1.0;
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto d = *cfg.synth;
        d.seed = seed;
        const auto mask = synth::gen_mask(d);
        const auto field = synth::gen_current_field(d, mask);
        const auto mp = synth::gen_mp_field(d, mask);
        SenderConfig sc = cfg.senders;
        const auto senders = select_senders(d.grid, field.ocean, sc);
        const auto receivers = coastal_cells(d.grid, field.ocean);
        ReceiverIndex index(d.grid, receivers);
        const Day first = d.start, last = d.end - prm.max_steps;
        auto daily = score_run(field, senders, index, prm, first, last, 4);
        auto matrix = aggregate_monthly(daily, d.grid, first, last, prm.max_steps);
        auto rmp = synth::gen_receiver_mixture(matrix, mp, seed);
        auto res = econ::run_spec(passthrough_panel(matrix, mp, rmp), econ::preset("eq5"));
        std::vector<double> rank, coef;
        for (int b = 1; b <= 10; ++b) {
            rank.push_back(b);
            const auto term = fmt::format("score_bin{}:log_mp_sender", b);
            coef.push_back(b == 10 ? 0.0 : res.coef(term).estimate);
        }
        const double rho = spearman(rank, coef);
        worst = std::max(worst, rho);
        good += rho <= -0.8;
    }
    const double secs = seconds_since(t0);
    return {good == 20 && secs < 60.0,
            fmt::format("{}/20 runs with Spearman <= -0.8, largest {:.3f}, {:.1f} s", good, worst, secs)};
}

struct BirthRun {
    econ::RegressionResult res;
    std::map<std::string, double> truth;
    Panel panel;
};

BirthRun birth_run(synth::DgpConfig d, std::uint64_t seed, const std::string& spec) {
    d.seed = seed;
    const auto mask = synth::gen_mask(d);
    const auto mp = synth::gen_mp_field(d, mask);
    const auto regions = synth::gen_regions(d, mask);
    std::map<Cell, ExposureSeries> local;
    auto series_for = [&](Cell c) -> const ExposureSeries& {
        auto it = local.find(c);
        if (it == local.end()) it = local.emplace(c, local_series(mp, c)).first;
        return it->second;
    };
    auto births = synth::gen_birth_panel(d, regions, series_for, Month::of(d.start), Month::of(d.end));
    BirthRun out;
    for (const auto& [k, v] : births.truth) out.truth[k] = v;
    ExposureSources src;
    src.mp = &mp;
    out.panel = assemble_panel(births.births, src, PanelOptions{});
    out.res = econ::run_spec(out.panel.table, econ::preset(spec, "local"));
    return out;
}

Outcome eq1_coverage() {
    const auto d = shipped_dgp("births_eq1.toml");
    int covered = 0;
    double truth = 0.0;
    std::size_t n = 0;
    int clusters = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto r = birth_run(d, seed, "eq1");
        truth = r.truth.at("log_mp_local_pregnancy");
        const auto& c = r.res.coef("log_mp_local_pregnancy");
        covered += std::abs(c.estimate - truth) <= 2.0 * c.se;
        n = r.res.n;
        clusters = r.res.clusters.at(0);
    }
    return {covered >= 95, fmt::format("{}/100 seeds within 2 SE of {} (n = {}, {} clusters)", covered,
                                       format_double(truth), n, clusters)};
}

Outcome eq2_placebo() {
    const auto d = shipped_dgp("births_placebo.toml");
    int pre = 0, post = 0, both = 0, t3 = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto r = birth_run(d, seed, "eq2");
        const bool a = std::abs(r.res.coef("log_mp_local_preconception").t) < 1.96;
        const bool b = std::abs(r.res.coef("log_mp_local_postpartum").t) < 1.96;
        pre += a;
        post += b;
        both += a && b;
        t3 += std::abs(r.res.coef("log_mp_local_trimester3").t) > 1.96;
    }
    return {pre >= 90 && post >= 90 && t3 >= 80,
            fmt::format("|t|<1.96 preconception {}/100, postpartum {}/100 (both {}); trimester3 |t|>1.96 {}/100", pre,
                        post, both, t3)};
}

Outcome econometrics_oracle() {
    using namespace oracles;
    std::mt19937_64 rng(2024);
    const int n = 2000;
    double coef_err = 0.0, cr1_err = 0.0, cgm_err = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        auto g1 = random_codes(rng, n, 60), g2 = random_codes(rng, n, 35);
        VectorXd a1 = normals(rng, 60), a2 = normals(rng, 35);
        MatrixXd X(n, 3);
        for (int j = 0; j < 3; ++j) X.col(j) = normals(rng, n);
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) += 0.6 * a1(g1[i]);
            X(i, 2) -= 0.4 * a2(g2[i]);
            y(i) = 0.5 * X(i, 0) - 1.1 * X(i, 1) + 0.3 * X(i, 2) + a1(g1[i]) + a2(g2[i]);
        }
        y += normals(rng, n);
        Table t;
        std::vector<std::string> s1, s2;
        for (int i = 0; i < n; ++i) s1.push_back(fmt::format("a{}", g1[i])), s2.push_back(fmt::format("b{}", g2[i]));
        t.add_numeric("y", std::vector<double>(y.data(), y.data() + n));
        for (int j = 0; j < 3; ++j) t.add_numeric(fmt::format("x{}", j), std::vector<double>(X.col(j).data(), X.col(j).data() + n));
        t.add_text("g1", s1);
        t.add_text("g2", s2);
        econ::RegressionSpec spec;
        spec.name = "oracle";
        spec.outcome = "y";
        spec.terms = {"x0", "x1", "x2"};
        spec.fe = {"g1", "g2"};
        spec.cluster = {"g1"};
        auto res = econ::run_spec(t, spec);
        VectorXd b = dummy_ols(X, y, {g1, g2});
        for (int j = 0; j < 3; ++j) coef_err = std::max(coef_err, std::abs(res.coefficients[j].estimate - b(j)));

        MatrixXd Z(n, 3);
        for (int j = 0; j < 3; ++j) Z.col(j) = normals(rng, n);
        VectorXd e = normals(rng, n);
        std::vector<std::string> keys;
        for (int c : g1) keys.push_back(std::to_string(c));
        const MatrixXd B = (Z.transpose() * Z).inverse();
        Factor f1 = make_factor(g1);
        auto one = econ::cluster_vcov(Z, e, B, std::span<const Factor>(&f1, 1));
        cr1_err = std::max(cr1_err, (one.vcov - oracle_cr1(Z, e, keys)).cwiseAbs().maxCoeff());

        auto g3 = random_codes(rng, n, 12);
        std::vector<Factor> fs = {make_factor(g1), make_factor(g2), make_factor(g3)};
        auto three = econ::cluster_vcov(Z, e, B, fs);
        cgm_err = std::max(cgm_err, (three.raw - oracle_multiway(Z, e, {g1, g2, g3})).cwiseAbs().maxCoeff());
    }
    return {coef_err <= 1e-8 && cr1_err <= 1e-10 && cgm_err <= 1e-10,
            fmt::format("n = {}: FE vs dummies {:.1e}, CR1 {:.1e}, three-way {:.1e}", n, coef_err, cr1_err, cgm_err)};
}

Outcome invariance() {
    auto d = shipped_dgp("births_eq1.toml");
    d.births = 8000;
    auto base = birth_run(d, 3, "eq2");

    // Regressor scaling.
    Table scaled;
    for (const auto& c : base.panel.table.columns()) {
        if (c.is_text) {
            scaled.add_text(c.name, c.text);
            continue;
        }
        auto v = c.num;
        if (c.name == "log_mp_local_trimester2")
            for (auto& x : v) x *= 7.25;
        scaled.add_numeric(c.name, std::move(v));
    }
    auto rs = econ::run_spec(scaled, econ::preset("eq2", "local"));
    double t_err = 0.0;
    for (std::size_t k = 0; k < rs.coefficients.size(); ++k)
        t_err = std::max(t_err, std::abs(rs.coefficients[k].t - base.res.coefficients[k].t));

    // Exposure scaling.
    const double lambda = 3.7;
    d.seed = 3;
    const auto mask = synth::gen_mask(d);
    auto mp = synth::gen_mp_field(d, mask);
    auto mp_scaled = mp;
    for (auto& row : mp_scaled.values)
        for (auto& v : row)
            if (!is_missing(v)) v *= lambda;
    const auto regions = synth::gen_regions(d, mask);
    std::map<Cell, ExposureSeries> local;
    auto series_for = [&](Cell c) -> const ExposureSeries& {
        auto it = local.find(c);
        if (it == local.end()) it = local.emplace(c, local_series(mp, c)).first;
        return it->second;
    };
    auto births = synth::gen_birth_panel(d, regions, series_for, Month::of(d.start), Month::of(d.end));
    ExposureSources s1, s2;
    s1.mp = &mp;
    s2.mp = &mp_scaled;
    auto p1 = assemble_panel(births.births, s1, PanelOptions{});
    auto p2 = assemble_panel(births.births, s2, PanelOptions{});
    double shift_err = 0.0;
    for (const auto& w : standard_windows()) {
        const auto col = exposure_column(Provenance::local, w);
        const auto &a = p1.table.numeric(col), &b = p2.table.numeric(col);
        for (std::size_t i = 0; i < a.size(); ++i) shift_err = std::max(shift_err, std::abs(b[i] - a[i] - std::log(lambda)));
    }
    auto r1 = econ::run_spec(p1.table, econ::preset("eq2", "local"));
    auto r2 = econ::run_spec(p2.table, econ::preset("eq2", "local"));
    double slope_err = 0.0;
    for (std::size_t k = 0; k < r1.coefficients.size(); ++k)
        slope_err = std::max(slope_err, std::abs(r1.coefficients[k].estimate - r2.coefficients[k].estimate));
    return {t_err <= 1e-9 && shift_err <= 1e-12 && slope_err <= 1e-9,
            fmt::format("t change {:.1e}, log shift error {:.1e}, slope change {:.1e}", t_err, shift_err, slope_err)};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DRIFT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path().string());
    return files;
}

Outcome determinism() {
    const std::string src = std::string(DRIFT_SOURCE_DIR) + "/configs/example.toml";
    std::vector<std::map<std::string, std::string>> trees;
    TempDir a("accept_det_a"), b("accept_det_b"), c("accept_det_c");
    for (auto [dir, workers] : {std::pair{&a, "1"}, std::pair{&b, "8"}, std::pair{&c, "8"}}) {
        const auto cfg = dir->file("example.toml", read_file(src));
        if (run_cli("--config " + cfg + " synth") != 0) return {false, "synth failed"};
        const auto bundle = *dir / "out/example/run.toml";
        for (auto cmd : {"score", "exposure", "regress"})
            if (run_cli("--config " + bundle + " --workers " + workers + " " + cmd) != 0)
                return {false, fmt::format("{} failed", cmd)};
        trees.push_back(tree(dir->path() / "out"));
    }
    const bool ok = trees[0] == trees[1] && trees[1] == trees[2] && trees[0].size() > 10;
    return {ok, fmt::format("{} files, workers 1 / 8 / 8 {}", trees[0].size(), ok ? "identical" : "differ")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"transport oracle", transport_oracle},
        {"closed-form trajectory", closed_form_trajectory},
        {"score point check", score_point_check},
        {"zero-fill completeness", zero_fill},
        {"passthrough monotonicity", passthrough},
        {"eq1 slope recovery", eq1_coverage},
        {"eq2 placebo pattern", eq2_placebo},
        {"econometrics oracle", econometrics_oracle},
        {"invariance", invariance},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %zu %s: %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
