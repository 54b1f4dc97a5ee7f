#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drift/core.hpp"
#include "drift/econometrics.hpp"
#include "drift/exposure.hpp"
#include "drift/grid.hpp"
#include "drift/synth.hpp"
#include "drift/transport.hpp"

namespace drift {

/// Flat `section.key -> value` view of a TOML-style file. Values may be bare or
/// double-quoted; `#` starts a comment outside quotes.
class KeyValueFile {
public:
    static KeyValueFile parse(std::string_view text, std::string_view origin = "config") {
        KeyValueFile kv;
        std::istringstream in{std::string(text)};
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = strip_comment(line);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail("{}:{}: unterminated section header", origin, line_no);
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) fail("{}:{}: empty section name", origin, line_no);
                kv.sections_.push_back(section);
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) fail("{}:{}: expected key = value", origin, line_no);
            auto key = trim(line.substr(0, eq));
            auto value = trim(line.substr(eq + 1));
            if (key.empty()) fail("{}:{}: empty key", origin, line_no);
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            const auto full = section.empty() ? key : section + "." + key;
            if (kv.values_.contains(full)) fail("{}:{}: duplicate key '{}'", origin, line_no, full);
            kv.values_[full] = value;
            kv.order_.push_back(full);
        }
        return kv;
    }

    bool has(const std::string& key) const { return values_.contains(key); }
    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        used_.insert(key);
        return it->second;
    }
    /// Keys in file order whose section equals `section`.
    std::vector<std::string> keys_in(const std::string& section) const {
        std::vector<std::string> out;
        for (const auto& k : order_)
            if (k.size() > section.size() && k.compare(0, section.size(), section) == 0 && k[section.size()] == '.')
                out.push_back(k);
        return out;
    }
    const std::vector<std::string>& sections() const { return sections_; }
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& k : order_)
            if (!used_.contains(k)) out.push_back(k);
        return out;
    }

    static std::string trim(std::string s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(0, 1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        return s;
    }

private:
    static std::string strip_comment(const std::string& line) {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) return line.substr(0, i);
        }
        return line;
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
    std::vector<std::string> sections_;
    mutable std::set<std::string> used_;
};

enum class ReceiverSet { coastal, all };

struct TraceRequest {
    std::vector<geo::LonLat> senders;
    std::vector<Day> days;
};

struct RunConfig {
    std::filesystem::path base_dir = ".";
    GridSpec grid;
    bool has_grid = false;

    struct Files {
        std::string currents, mask, mp, births, trade, shorelines, regions, receiver_mp;
        std::map<std::string, std::string> covariates;  // name -> monthly grid path
    } files;

    TransportParams transport;
    SenderConfig senders;
    ReceiverSet receivers = ReceiverSet::coastal;
    std::optional<Day> start, end;

    std::vector<Window> windows = standard_windows();
    std::vector<Provenance> provenances = {Provenance::local, Provenance::transported_all,
                                           Provenance::transported_200km};
    bool exporter_exposure = false;

    std::vector<std::string> spec_names;                 // presets
    std::map<std::string, std::string> inline_specs;     // name -> spec text
    std::string source = "local";

    TraceRequest trace;
    std::optional<synth::DgpConfig> synth;

    std::string out_dir = "out";
    int workers = 1;
    std::optional<std::uint64_t> seed;

    std::filesystem::path resolve(const std::string& p) const {
        if (p.empty()) return {};
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base_dir / fp;
    }
};

namespace detail {

inline double cfg_number(const KeyValueFile& kv, const std::string& key, double fallback) {
    auto v = kv.get(key);
    if (!v) return fallback;
    auto d = parse_double(*v);
    if (!d) fail("config: '{}' must be a number, got '{}'", key, *v);
    return *d;
}

inline int cfg_int(const KeyValueFile& kv, const std::string& key, int fallback) {
    const double d = cfg_number(kv, key, fallback);
    if (d != std::floor(d)) fail("config: '{}' must be an integer", key);
    return static_cast<int>(d);
}

inline bool cfg_bool(const KeyValueFile& kv, const std::string& key, bool fallback) {
    auto v = kv.get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail("config: '{}' must be true or false", key);
}

inline Day cfg_day(const std::string& key, const std::string& v) {
    auto d = parse_day(v);
    if (!d) fail("config: '{}' must be a YYYY-MM-DD date, got '{}'", key, v);
    return *d;
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = ".",
                                  std::string_view origin = "config") {
    using namespace detail;
    auto kv = KeyValueFile::parse(text, origin);
    RunConfig c;
    c.base_dir = base_dir;

    if (kv.has("grid.nlon") || kv.has("grid.nlat")) {
        c.has_grid = true;
        auto& g = c.grid;
        g.lon0 = cfg_number(kv, "grid.lon0", 0.0);
        g.lat0 = cfg_number(kv, "grid.lat0", 0.0);
        g.dlon = cfg_number(kv, "grid.dlon", g.dlon);
        g.dlat = cfg_number(kv, "grid.dlat", g.dlat);
        g.nlon = cfg_int(kv, "grid.nlon", 1);
        g.nlat = cfg_int(kv, "grid.nlat", 1);
        g.lat_min = cfg_number(kv, "grid.lat_min", g.lat_min);
        g.lat_max = cfg_number(kv, "grid.lat_max", g.lat_max);
        g.validate();
    }

    auto file = [&](const char* key, std::string& dst) {
        if (auto v = kv.get(std::string("files.") + key)) dst = *v;
    };
    file("currents", c.files.currents);
    file("mask", c.files.mask);
    file("mp", c.files.mp);
    file("births", c.files.births);
    file("trade", c.files.trade);
    file("shorelines", c.files.shorelines);
    file("regions", c.files.regions);
    file("receiver_mp", c.files.receiver_mp);
    for (const auto& k : kv.keys_in("covariates")) c.files.covariates[k.substr(11)] = *kv.get(k);

    auto& t = c.transport;
    t.alpha = cfg_number(kv, "transport.alpha", t.alpha);
    t.beta = cfg_number(kv, "transport.beta", t.beta);
    t.gamma = cfg_number(kv, "transport.gamma", t.gamma);
    t.rad0 = cfg_number(kv, "transport.rad0", t.rad0);
    t.rad_step = cfg_number(kv, "transport.rad_step", t.rad_step);
    t.max_steps = cfg_int(kv, "transport.max_steps", t.max_steps);
    t.theta_cutoff = cfg_number(kv, "transport.theta_cutoff", t.theta_cutoff);
    if (auto v = kv.get("transport.advect_metric")) t.metric = parse_advect_metric(*v);
    t.validate();

    c.senders.buffer_km = cfg_number(kv, "senders.buffer_km", c.senders.buffer_km);
    c.senders.spacing_km = cfg_number(kv, "senders.spacing_km", c.senders.spacing_km);
    if (auto v = kv.get("senders.receivers")) {
        if (*v == "coastal") c.receivers = ReceiverSet::coastal;
        else if (*v == "all") c.receivers = ReceiverSet::all;
        else fail("config: senders.receivers must be coastal or all");
    }

    if (auto v = kv.get("period.start")) c.start = cfg_day("period.start", *v);
    if (auto v = kv.get("period.end")) c.end = cfg_day("period.end", *v);
    if (c.start && c.end && *c.end < *c.start) fail("config: period.end before period.start");

    if (auto v = kv.get("exposure.windows")) {
        c.windows.clear();
        for (const auto& w : econ::detail::split_list(*v, ',')) c.windows.push_back(find_window(w));
    }
    if (auto v = kv.get("exposure.provenances")) {
        c.provenances.clear();
        for (const auto& p : econ::detail::split_list(*v, ',')) c.provenances.push_back(parse_provenance(p));
    }
    c.exporter_exposure = cfg_bool(kv, "exposure.exporters", false);

    if (auto v = kv.get("regress.specs")) c.spec_names = econ::detail::split_list(*v, ',');
    if (auto v = kv.get("regress.source")) {
        parse_provenance(*v);
        c.source = *v;
    }
    for (const auto& sec : kv.sections()) {
        if (sec.rfind("spec.", 0) != 0) continue;
        const auto name = sec.substr(5);
        std::string body = "name = " + name + "\n";
        for (const auto& k : kv.keys_in(sec)) body += k.substr(sec.size() + 1) + " = " + *kv.get(k) + "\n";
        c.inline_specs[name] = body;
        econ::parse_spec(body, c.source);
    }

    if (auto v = kv.get("trace.senders")) {
        for (const auto& item : econ::detail::split_list(*v, ';')) {
            auto xy = econ::detail::split_list(item, ' ');
            if (xy.size() != 2) fail("config: trace.senders entries are 'lon lat' separated by ';'");
            auto lon = parse_double(xy[0]), lat = parse_double(xy[1]);
            if (!lon || !lat) fail("config: malformed trace sender '{}'", item);
            c.trace.senders.push_back({*lon, *lat});
        }
    }
    if (auto v = kv.get("trace.days"))
        for (const auto& d : econ::detail::split_list(*v, ',')) c.trace.days.push_back(cfg_day("trace.days", d));

    if (!kv.keys_in("synth").empty()) {
        synth::DgpConfig d;
        d.seed = static_cast<std::uint64_t>(cfg_number(kv, "synth.seed", static_cast<double>(d.seed)));
        auto& g = d.grid;
        g.lon0 = cfg_number(kv, "synth.lon0", g.lon0);
        g.lat0 = cfg_number(kv, "synth.lat0", g.lat0);
        g.dlon = cfg_number(kv, "synth.dlon", g.dlon);
        g.dlat = cfg_number(kv, "synth.dlat", g.dlat);
        g.nlon = cfg_int(kv, "synth.nlon", g.nlon);
        g.nlat = cfg_int(kv, "synth.nlat", g.nlat);
        d.coast_width = cfg_int(kv, "synth.coast_width", d.coast_width);
        d.coast_wiggle = cfg_number(kv, "synth.coast_wiggle", d.coast_wiggle);
        if (auto v = kv.get("synth.start")) d.start = cfg_day("synth.start", *v);
        if (auto v = kv.get("synth.end")) d.end = cfg_day("synth.end", *v);
        if (auto v = kv.get("synth.kind")) d.kind = synth::parse_field_kind(*v);
        d.magnitude = cfg_number(kv, "synth.magnitude", d.magnitude);
        d.direction_deg = cfg_number(kv, "synth.direction_deg", d.direction_deg);
        d.temporal_amp = cfg_number(kv, "synth.temporal_amp", d.temporal_amp);
        d.period_days = cfg_number(kv, "synth.period_days", d.period_days);
        d.rho = cfg_number(kv, "synth.rho", d.rho);
        d.sigma = cfg_number(kv, "synth.sigma", d.sigma);
        d.mean_log = cfg_number(kv, "synth.mean_log", d.mean_log);
        d.spatial_sd = cfg_number(kv, "synth.spatial_sd", d.spatial_sd);
        d.births = cfg_int(kv, "synth.births", d.births);
        d.cells_per_admin1 = cfg_int(kv, "synth.cells_per_admin1", d.cells_per_admin1);
        d.countries = cfg_int(kv, "synth.countries", d.countries);
        d.base = cfg_number(kv, "synth.base", d.base);
        d.admin1_sd = cfg_number(kv, "synth.admin1_sd", d.admin1_sd);
        d.country_month_sd = cfg_number(kv, "synth.country_month_sd", d.country_month_sd);
        d.noise_sd = cfg_number(kv, "synth.noise_sd", d.noise_sd);
        if (auto v = kv.get("synth.truth_source")) d.truth_source = parse_provenance(*v);
        if (auto keys = kv.keys_in("synth.beta"); !keys.empty()) {
            d.beta.clear();
            for (const auto& k : keys) {
                const auto w = k.substr(11);
                find_window(w);
                d.beta[w] = cfg_number(kv, k, 0.0);
            }
        }
        d.validate();
        c.synth = d;
    }

    if (auto v = kv.get("run.out")) c.out_dir = *v;
    c.workers = cfg_int(kv, "run.workers", c.workers);
    if (c.workers < 1) fail("config: run.workers must be >= 1");
    if (kv.has("run.seed")) c.seed = static_cast<std::uint64_t>(cfg_number(kv, "run.seed", 0));

    for (const auto& k : kv.unused()) fail("config: unknown key '{}'", k);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    const auto p = std::filesystem::path(path);
    return parse_run_config(read_file(path), p.has_parent_path() ? p.parent_path() : std::filesystem::path("."), path);
}

}  // namespace drift
