#pragma once

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "drift/config.hpp"
#include "drift/core.hpp"
#include "drift/econometrics.hpp"
#include "drift/exposure.hpp"
#include "drift/grid.hpp"
#include "drift/synth.hpp"
#include "drift/table.hpp"
#include "drift/transport.hpp"

namespace drift::pipeline {

namespace fs = std::filesystem;

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct Options {
    bool check = false;
    bool dry_run = false;
};

/// Collects plan lines in dry-run mode and performs writes otherwise.
class Sink {
public:
    Sink(fs::path out, bool dry_run) : out_(std::move(out)), dry_(dry_run) {}

    const fs::path& out() const { return out_; }
    bool dry_run() const { return dry_; }

    void plan(const std::string& line) {
        if (dry_) std::printf("plan: %s\n", line.c_str());
        else log(LogLevel::info, "{}", line);
    }
    void write(const std::string& rel, const std::string& contents) {
        const auto p = out_ / rel;
        if (dry_) {
            std::printf("plan: write %s\n", p.string().c_str());
            return;
        }
        fs::create_directories(p.parent_path());
        write_file(p.string(), contents);
        written_.push_back(p);
    }
    const std::vector<fs::path>& written() const { return written_; }

private:
    fs::path out_;
    bool dry_;
    std::vector<fs::path> written_;
};

/// Records failed --check invariants.
struct CheckLog {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) {
            failures.push_back(what);
            log(LogLevel::error, "check failed: {}", what);
        }
    }
    int exit_code() const { return failures.empty() ? kExitOk : kExitCheckFailed; }
};

namespace detail {

inline std::string require_file(const RunConfig& cfg, const std::string& key, const std::string& value) {
    if (value.empty()) fail("config: files.{} is required for this command", key);
    const auto p = cfg.resolve(value);
    if (!fs::exists(p)) fail("config: files.{} = '{}' does not exist", key, p.string());
    return p.string();
}

inline const GridSpec& require_grid(const RunConfig& cfg) {
    if (!cfg.has_grid) fail("config: [grid] section with nlon/nlat is required");
    return cfg.grid;
}

inline std::string cell_label(const GridSpec& g, Cell c) {
    auto ll = g.center(c);
    return format_double(ll.lon) + "_" + format_double(ll.lat);
}

struct World {
    OceanMask ocean;
    std::optional<VectorFieldSeries> field;
};

inline World load_world(const RunConfig& cfg, bool need_field) {
    const auto& g = require_grid(cfg);
    World w;
    std::optional<OceanMask> mask;
    if (!cfg.files.mask.empty()) mask = load_mask(require_file(cfg, "mask", cfg.files.mask), g);
    if (need_field) {
        w.field = load_vector_field(require_file(cfg, "currents", cfg.files.currents), g, mask);
        w.ocean = w.field->ocean;
    } else if (mask) {
        w.ocean = *mask;
    }
    return w;
}

inline std::vector<Cell> receivers_for(const RunConfig& cfg, const OceanMask& ocean) {
    return cfg.receivers == ReceiverSet::coastal ? coastal_cells(cfg.grid, ocean) : ocean_cells(ocean);
}

/// Lattice senders without a shoreline buffer, and the subset at least
/// `buffer_km` from land.
inline std::pair<std::vector<Cell>, std::set<Cell>> senders_for(const RunConfig& cfg, const OceanMask& ocean) {
    SenderConfig all = cfg.senders;
    all.buffer_km = 0.0;
    auto senders = select_senders(cfg.grid, ocean, all);
    std::set<Cell> far;
    for (Cell c : senders)
        if (distance_to_land_km(c, cfg.grid, ocean) >= cfg.senders.buffer_km) far.insert(c);
    return {senders, far};
}

inline std::string senders_csv(const GridSpec& g, std::span<const Cell> senders, const std::set<Cell>& far) {
    std::string out = "lon,lat,far\n";
    for (Cell c : senders) {
        auto ll = g.center(c);
        out += fmt::format("{},{},{}\n", format_double(ll.lon), format_double(ll.lat), far.contains(c) ? 1 : 0);
    }
    return out;
}

inline std::set<Cell> load_far_senders(const std::string& path, const GridSpec& g) {
    CsvReader r(path, "lon,lat,far");
    std::set<Cell> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        auto c = g.cell_at(r.number(f, 0), r.number(f, 1));
        if (!c) fail("{}: row {}: coordinate is not a cell centre", path, r.row());
        if (r.number(f, 2) != 0.0) out.insert(*c);
    }
    return out;
}

inline ConcentrationSeries load_monthly(const std::string& path, const GridSpec& g) {
    auto s = load_concentration(path, g);
    return s.kind == PeriodKind::day ? to_monthly(s) : s;
}

inline std::pair<Day, Day> period_of(const RunConfig& cfg, const VectorFieldSeries& field) {
    if (field.days.empty()) fail("currents file holds no days");
    const Day first = cfg.start.value_or(field.days.front());
    const Day last = cfg.end.value_or(field.days.back());
    if (last < first) fail("run period is empty");
    return {first, last};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// trace

inline int cmd_trace(const RunConfig& cfg, const fs::path& out, const Options& opt) {
    Sink sink(out, opt.dry_run);
    const auto& g = detail::require_grid(cfg);
    if (cfg.trace.senders.empty()) fail("config: trace.senders is empty");
    sink.plan(fmt::format("trace {} sender(s) from {} start day(s)", cfg.trace.senders.size(),
                          std::max<std::size_t>(1, cfg.trace.days.size())));
    auto world = detail::load_world(cfg, true);
    const auto& field = *world.field;
    std::vector<Day> days = cfg.trace.days;
    if (days.empty()) days.push_back(cfg.start.value_or(field.days.front()));

    std::vector<std::string> missing;
    for (Day d : days)
        for (int t = 0; t < cfg.transport.max_steps; ++t)
            if (!field.day_index(d + t)) missing.push_back(to_string(d + t));
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        fail("currents do not cover {} day(s) needed for tracing: {}", missing.size(), list);
    }

    const auto all_ocean = ocean_cells(field.ocean);
    ReceiverIndex index(g, all_ocean);
    std::string traces = kTraceCsvHeader;
    std::string stops = "sender_lon,sender_lat,start_day,steps,stop\n";
    CheckLog checks;
    for (const auto& s : cfg.trace.senders) {
        auto cell = g.cell_at(s.lon, s.lat);
        if (!cell) fail("trace sender ({}, {}) is not a grid cell centre", s.lon, s.lat);
        for (Day d : days) {
            auto tr = trace_streamline(*cell, d, field, cfg.transport, index);
            traces += export_trace_csv(tr, *cell, d, g);
            stops += fmt::format("{},{},{},{},{}\n", format_double(s.lon), format_double(s.lat), to_string(d),
                                 tr.path.size(), to_string(tr.stop));
            sink.write(fmt::format("heatmaps/heatmap_{}_{}.csv", detail::cell_label(g, *cell), to_string(d)),
                       export_heatmap_csv(heatmap(tr, g), g, field.ocean));
            if (opt.check)
                for (const auto& sc : tr.scores)
                    checks.expect(std::isfinite(sc.value) && sc.value >= 0.0 && sc.value <= 1.0,
                                  "trace scores lie in [0, 1]");
        }
    }
    sink.write("traces.csv", traces);
    sink.write("trace_stops.csv", stops);
    return checks.exit_code();
}

// ---------------------------------------------------------------------------
// score

inline int cmd_score(const RunConfig& cfg, const fs::path& out, const Options& opt) {
    Sink sink(out, opt.dry_run);
    detail::require_grid(cfg);
    auto world = detail::load_world(cfg, true);
    const auto& field = *world.field;
    const auto [first, last] = detail::period_of(cfg, field);
    auto receivers = detail::receivers_for(cfg, field.ocean);
    auto [senders, far] = detail::senders_for(cfg, field.ocean);
    sink.plan(fmt::format("score {} sender(s) ({} beyond {} km) against {} receiver(s), {} to {}, {} worker(s)",
                          senders.size(), far.size(), format_double(cfg.senders.buffer_km), receivers.size(),
                          to_string(first), to_string(last), cfg.workers));
    if (sink.dry_run()) {
        sink.write("score_matrix.csv", "");
        sink.write("senders.csv", "");
        return kExitOk;
    }
    ReceiverIndex index(cfg.grid, receivers);
    auto daily = score_run(field, senders, index, cfg.transport, first, last, cfg.workers);
    auto matrix = aggregate_monthly(daily, cfg.grid, first, last, cfg.transport.max_steps);
    sink.write("score_matrix.csv", export_score_matrix_csv(matrix));
    sink.write("senders.csv", detail::senders_csv(cfg.grid, senders, far));

    CheckLog checks;
    if (opt.check) {
        const auto expected = complete_months(first, last, cfg.transport.max_steps);
        checks.expect(matrix.months == expected, "score matrix covers exactly the complete months");
        for (std::size_t pi = 0; pi < matrix.pairs.size(); ++pi) {
            checks.expect(matrix.values[pi].size() == matrix.months.size(), "every pair has one entry per month");
            for (double v : matrix.values[pi]) checks.expect(std::isfinite(v) && v >= 0.0, "scores are finite and >= 0");
        }
    }
    return checks.exit_code();
}

// ---------------------------------------------------------------------------
// exposure

inline int cmd_exposure(const RunConfig& cfg, const fs::path& out, const Options& opt) {
    Sink sink(out, opt.dry_run);
    const auto& g = detail::require_grid(cfg);
    const auto mp_path = detail::require_file(cfg, "mp", cfg.files.mp);
    const auto births_path = detail::require_file(cfg, "births", cfg.files.births);
    const bool transported =
        std::any_of(cfg.provenances.begin(), cfg.provenances.end(), [](Provenance p) { return p != Provenance::local; });
    const auto matrix_path = (out / "score_matrix.csv").string();
    const auto senders_path = (out / "senders.csv").string();
    if (transported && !opt.dry_run && (!fs::exists(matrix_path) || !fs::exists(senders_path)))
        fail("transported exposure needs {} and {} (run `score` first)", matrix_path, senders_path);
    std::vector<std::string> cov_paths;
    for (const auto& [name, p] : cfg.files.covariates) cov_paths.push_back(detail::require_file(cfg, "covariates." + name, p));
    std::string trade_path, shore_path;
    if (cfg.exporter_exposure) {
        trade_path = detail::require_file(cfg, "trade", cfg.files.trade);
        shore_path = detail::require_file(cfg, "shorelines", cfg.files.shorelines);
    }
    sink.plan(fmt::format("assemble birth panel from {} with {} window(s) and {} source(s)", births_path,
                          cfg.windows.size(), cfg.provenances.size()));
    if (opt.dry_run) {
        if (transported) sink.plan(fmt::format("read {} and {}", matrix_path, senders_path));
        for (auto f : {"birth_panel.csv", "exclusions.csv", "coastal_panel.csv"}) sink.write(f, "");
        if (transported) sink.write("passthrough_panel.csv", "");
        return kExitOk;
    }

    auto mp = detail::load_monthly(mp_path, g);
    auto births = load_births(births_path);
    std::optional<ScoreMatrix> matrix;
    std::set<Cell> far;
    if (transported) {
        matrix = load_score_matrix(matrix_path, g);
        far = detail::load_far_senders(senders_path, g);
    }
    std::map<std::string, ConcentrationSeries> grids;
    {
        std::size_t k = 0;
        for (const auto& [name, p] : cfg.files.covariates) grids[name] = detail::load_monthly(cov_paths[k++], g);
    }
    std::vector<TradeFlow> trade;
    CountryMonthly exporter_mp;
    if (cfg.exporter_exposure) {
        trade = load_trade(trade_path);
        exporter_mp = country_buffer_mp(mp, load_shorelines(shore_path), cfg.senders.buffer_km);
    }

    ExposureSources src;
    src.mp = &mp;
    src.matrix = matrix ? &*matrix : nullptr;
    src.far_senders = far;
    if (cfg.exporter_exposure) {
        src.trade = &trade;
        src.exporter_mp = &exporter_mp;
    }
    PanelOptions popt;
    popt.windows = cfg.windows;
    popt.provenances = cfg.provenances;
    popt.exporter_exposure = cfg.exporter_exposure;
    // Birth-level covariates travel with the birth records; gridded ones named
    // like a birth covariate are not duplicated.
    for (const auto& [name, s] : grids)
        if (std::find(births.covariate_names.begin(), births.covariate_names.end(), name) == births.covariate_names.end())
            popt.covariate_grids[name] = &s;

    auto panel = assemble_panel(births, src, popt);
    sink.write("birth_panel.csv", panel.table.to_csv());
    sink.write("exclusions.csv", panel.report.to_csv());

    const OceanMask ocean = cfg.files.mask.empty() ? mp.ocean : load_mask(detail::require_file(cfg, "mask", cfg.files.mask), g);
    const auto receivers = detail::receivers_for(cfg, ocean);
    std::map<Cell, std::string> cell_country;
    if (!cfg.files.regions.empty()) {
        auto regions = synth::load_regions(detail::require_file(cfg, "regions", cfg.files.regions), g);
        cell_country = regions.country;
    }
    std::map<std::string, const ConcentrationSeries*> cell_grids;
    for (const auto& [name, s] : grids) cell_grids[name] = &s;
    sink.write("coastal_panel.csv",
               coastal_panel(receivers, mp, matrix ? &*matrix : nullptr, far, cell_grids, cell_country).to_csv());
    if (matrix) {
        std::optional<ConcentrationSeries> rmp;
        if (!cfg.files.receiver_mp.empty())
            rmp = detail::load_monthly(detail::require_file(cfg, "receiver_mp", cfg.files.receiver_mp), g);
        sink.write("passthrough_panel.csv", passthrough_panel(*matrix, mp, rmp ? *rmp : mp).to_csv());
    }

    CheckLog checks;
    if (opt.check) {
        std::size_t excluded = 0;
        for (const auto& [r, n] : panel.report.excluded) excluded += n;
        checks.expect(panel.report.retained + excluded == panel.report.input, "exclusion report sums to input count");
        checks.expect(panel.report.input == births.births.size(), "exclusion report input equals birth count");
        for (auto p : cfg.provenances)
            for (const auto& w : cfg.windows)
                checks.expect(panel.table.has(exposure_column(p, w)), "exposure column " + exposure_column(p, w));
    }
    return checks.exit_code();
}

// ---------------------------------------------------------------------------
// regress

inline std::vector<econ::RegressionSpec> configured_specs(const RunConfig& cfg) {
    std::vector<econ::RegressionSpec> specs;
    for (const auto& n : cfg.spec_names) {
        auto it = cfg.inline_specs.find(n);
        specs.push_back(it != cfg.inline_specs.end() ? econ::parse_spec(it->second, cfg.source)
                                                     : econ::preset(n, cfg.source));
    }
    for (const auto& [n, body] : cfg.inline_specs)
        if (std::find(cfg.spec_names.begin(), cfg.spec_names.end(), n) == cfg.spec_names.end())
            specs.push_back(econ::parse_spec(body, cfg.source));
    if (specs.empty()) fail("config: no regression specs (set regress.specs or add [spec.NAME] sections)");
    return specs;
}

inline std::string panel_file(const econ::RegressionSpec& s) {
    if (s.panel == "births") return "birth_panel.csv";
    if (s.panel == "coastal") return "coastal_panel.csv";
    if (s.panel == "passthrough") return "passthrough_panel.csv";
    fail("spec '{}': unknown panel '{}' (expected births|coastal|passthrough)", s.name, s.panel);
}

inline int cmd_regress(const RunConfig& cfg, const fs::path& out, const Options& opt) {
    Sink sink(out, opt.dry_run);
    auto specs = configured_specs(cfg);
    for (const auto& s : specs) {
        const auto p = out / panel_file(s);
        if (!opt.dry_run && !fs::exists(p)) fail("spec '{}' needs {} (run `exposure` first)", s.name, p.string());
        sink.plan(fmt::format("regress spec {} on {}", s.name, p.string()));
    }
    if (opt.dry_run) {
        for (const auto& s : specs) sink.write("results_" + s.name + ".csv", "");
        return kExitOk;
    }
    std::map<std::string, Table> panels;
    CheckLog checks;
    for (const auto& s : specs) {
        const auto file = panel_file(s);
        if (!panels.contains(file)) panels.emplace(file, Table::from_csv((out / file).string()));
        auto res = econ::run_spec(panels.at(file), s);
        sink.write("results_" + s.name + ".csv", res.to_csv());
        if (opt.check) {
            checks.expect(!res.coefficients.empty(), "spec " + s.name + " has coefficients");
            for (const auto& c : res.coefficients)
                checks.expect(std::isfinite(c.estimate) && std::isfinite(c.se), "spec " + s.name + " estimates are finite");
        }
    }
    return checks.exit_code();
}

// ---------------------------------------------------------------------------
// synth

/// Config text for running score/exposure/regress on a synthetic bundle.
inline std::string bundle_config(const synth::DgpConfig& d, const RunConfig& parent) {
    const auto& g = d.grid;
    std::string s;
    s += "# Synthetic bundle; paths are relative to this file.\n";
    s += fmt::format("[grid]\nlon0 = {}\nlat0 = {}\ndlon = {}\ndlat = {}\nnlon = {}\nnlat = {}\n\n", format_double(g.lon0),
                     format_double(g.lat0), format_double(g.dlon), format_double(g.dlat), g.nlon, g.nlat);
    s += "[files]\ncurrents = currents.csv\nmask = mask.csv\nmp = mp.csv\nbirths = births.csv\n"
         "trade = trade.csv\nshorelines = exporters.csv\nregions = regions.csv\n\n";
    s += "[covariates]\naod = aod.csv\nevaporation = evaporation.csv\n\n";
    s += fmt::format("[period]\nstart = {}\nend = {}\n\n", to_string(d.start), to_string(d.end));
    const auto& t = parent.transport;
    s += fmt::format("[transport]\nmax_steps = {}\nadvect_metric = {}\n\n", t.max_steps,
                     t.metric == AdvectMetric::faithful ? "faithful" : "spherical");
    s += fmt::format("[senders]\nbuffer_km = {}\nspacing_km = {}\n\n", format_double(parent.senders.buffer_km),
                     format_double(parent.senders.spacing_km));
    s += "[exposure]\nexporters = true\n\n";
    s += "[regress]\nspecs = eq1, eq2, table3_aod, appx_t1_exporters\nsource = local\n";
    return s;
}

inline int cmd_synth(const RunConfig& cfg, const fs::path& out, const Options& opt) {
    if (!cfg.synth) fail("config: [synth] section is required for synth");
    auto d = *cfg.synth;
    if (cfg.seed) d.seed = *cfg.seed;
    Sink sink(out, opt.dry_run);
    sink.plan(fmt::format("synthesise {} field on {}x{} grid, {} to {}, {} births, seed {}",
                          d.kind == synth::FieldKind::uniform ? "uniform"
                          : d.kind == synth::FieldKind::gyre  ? "gyre"
                                                              : "random_divfree",
                          d.grid.nlon, d.grid.nlat, to_string(d.start), to_string(d.end), d.births, d.seed));
    static const char* files[] = {"mask.csv",   "currents.csv", "mp.csv",      "regions.csv",     "births.csv",
                                  "truth.csv",  "trade.csv",    "exporters.csv", "aod.csv",       "evaporation.csv",
                                  "run.toml"};
    if (opt.dry_run) {
        for (auto f : files) sink.write(f, "");
        return kExitOk;
    }
    const auto mask = synth::gen_mask(d);
    const auto field = synth::gen_current_field(d, mask);
    const auto mp = synth::gen_mp_field(d, mask);
    const auto regions = synth::gen_regions(d, mask);
    std::map<Cell, ExposureSeries> local;
    auto series_for = [&](Cell c) -> const ExposureSeries& {
        auto it = local.find(c);
        if (it == local.end()) it = local.emplace(c, local_series(mp, c)).first;
        return it->second;
    };
    const Month m0 = Month::of(d.start), m1 = Month::of(d.end);
    auto births = synth::gen_birth_panel(d, regions, series_for, m0, m1);
    auto aer = synth::gen_aerosol(d, mp);
    auto trade = synth::gen_trade(d, mask, regions);

    std::string truth = "term,true_value\n";
    for (const auto& [k, v] : births.truth) truth += fmt::format("{},{}\n", k, format_double(v));
    for (const auto& [k, v] : aer.truth) truth += fmt::format("{},{}\n", k, format_double(v));

    sink.write("mask.csv", export_mask_csv(d.grid, mask));
    sink.write("currents.csv", export_vector_csv(field));
    sink.write("mp.csv", export_concentration_csv(mp));
    sink.write("regions.csv", regions.to_csv(d.grid));
    sink.write("births.csv", export_births_csv(births.births));
    sink.write("truth.csv", truth);
    sink.write("trade.csv", trade.flows_csv());
    sink.write("exporters.csv", trade.shorelines_csv());
    sink.write("aod.csv", export_concentration_csv(aer.aod));
    sink.write("evaporation.csv", export_concentration_csv(aer.evaporation));
    sink.write("run.toml", bundle_config(d, cfg));

    CheckLog checks;
    if (opt.check) {
        checks.expect(births.clamped * 1000 < static_cast<std::size_t>(d.births), "clamp events below 0.1% of births");
        auto back = load_run_config((out / "run.toml").string());
        auto f2 = load_vector_field(back.resolve(back.files.currents).string(), back.grid,
                                    load_mask(back.resolve(back.files.mask).string(), back.grid));
        checks.expect(f2.days.size() == field.days.size(), "bundle currents load back");
        checks.expect(load_births(back.resolve(back.files.births).string()).births.size() ==
                          static_cast<std::size_t>(d.births),
                      "bundle births load back");
        checks.expect(fs::exists(out / "truth.csv"), "truth sidecar present");
    }
    return checks.exit_code();
}

// ---------------------------------------------------------------------------
// validate

/// Loads every referenced input and reports its shape without writing files.
inline int cmd_validate(const RunConfig& cfg, const fs::path&, const Options&) {
    auto report = [](const std::string& s) { std::printf("ok: %s\n", s.c_str()); };
    if (cfg.has_grid) {
        const auto& g = cfg.grid;
        report(fmt::format("grid {}x{} at ({}, {}) step {}x{}", g.nlon, g.nlat, format_double(g.lon0),
                           format_double(g.lat0), format_double(g.dlon), format_double(g.dlat)));
        std::optional<OceanMask> mask;
        if (!cfg.files.mask.empty()) {
            mask = load_mask(detail::require_file(cfg, "mask", cfg.files.mask), g);
            report(fmt::format("mask: {} ocean cell(s)", std::count(mask->begin(), mask->end(), 1)));
        }
        if (!cfg.files.currents.empty()) {
            auto f = load_vector_field(detail::require_file(cfg, "currents", cfg.files.currents), g, mask);
            report(fmt::format("currents: {} day(s), {} ocean cell(s)", f.days.size(), f.ocean_count()));
        }
        if (!cfg.files.mp.empty()) {
            auto s = detail::load_monthly(detail::require_file(cfg, "mp", cfg.files.mp), g);
            report(fmt::format("mp: {} month(s)", s.periods.size()));
        }
        for (const auto& [name, p] : cfg.files.covariates) {
            auto s = detail::load_monthly(detail::require_file(cfg, "covariates." + name, p), g);
            report(fmt::format("covariate {}: {} month(s)", name, s.periods.size()));
        }
        if (!cfg.files.regions.empty())
            report(fmt::format("regions: {} cell(s)",
                               synth::load_regions(detail::require_file(cfg, "regions", cfg.files.regions), g).cells.size()));
    }
    if (!cfg.files.births.empty())
        report(fmt::format("births: {} record(s)", load_births(detail::require_file(cfg, "births", cfg.files.births)).births.size()));
    if (!cfg.files.trade.empty())
        report(fmt::format("trade: {} flow(s)", load_trade(detail::require_file(cfg, "trade", cfg.files.trade)).size()));
    if (!cfg.files.shorelines.empty())
        report(fmt::format("shorelines: {} country(ies)",
                           load_shorelines(detail::require_file(cfg, "shorelines", cfg.files.shorelines)).size()));
    for (const auto& s : configured_specs(cfg)) report("spec " + s.name);
    return kExitOk;
}

}  // namespace drift::pipeline
