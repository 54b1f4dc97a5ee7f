#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/core.h>

namespace drift {

/// Error raised for invalid input, failed preconditions and load failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename... Args>
[[noreturn]] inline void fail(fmt::format_string<Args...> f, Args&&... args) {
    throw Error(fmt::format(f, std::forward<Args>(args)...));
}

// ---------------------------------------------------------------------------
// Calendar

/// A calendar day, stored as days since 1970-01-01.
struct Day {
    int serial = 0;

    auto operator<=>(const Day&) const = default;
    Day operator+(int n) const { return Day{serial + n}; }
    Day operator-(int n) const { return Day{serial - n}; }
    int operator-(Day o) const { return serial - o.serial; }
    Day& operator++() {
        ++serial;
        return *this;
    }

    static Day from_ymd(int y, unsigned m, unsigned d) {
        using namespace std::chrono;
        sys_days sd{year{y} / month{m} / day{d}};
        return Day{static_cast<int>(sd.time_since_epoch().count())};
    }
    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{serial}}};
    }
};

/// A calendar month, stored as year*12 + (month-1).
struct Month {
    int serial = 0;

    auto operator<=>(const Month&) const = default;
    Month operator+(int n) const { return Month{serial + n}; }
    Month operator-(int n) const { return Month{serial - n}; }
    int operator-(Month o) const { return serial - o.serial; }
    Month& operator++() {
        ++serial;
        return *this;
    }

    static Month from_ym(int y, unsigned m) { return Month{y * 12 + static_cast<int>(m) - 1}; }
    static Month of(Day d) {
        auto ymd = d.ymd();
        return from_ym(static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
    }
    int year() const { return serial >= 0 ? serial / 12 : (serial - 11) / 12; }
    unsigned month() const { return static_cast<unsigned>(serial - year() * 12 + 1); }
    Day first_day() const { return Day::from_ymd(year(), month(), 1); }
    int days_in_month() const { return (*this + 1).first_day() - first_day(); }
};

namespace detail {

inline std::optional<int> parse_fixed_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses `YYYY-MM-DD`; rejects impossible dates.
inline std::optional<Day> parse_day(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = detail::parse_fixed_int(s.substr(0, 4));
    auto m = detail::parse_fixed_int(s.substr(5, 2));
    auto d = detail::parse_fixed_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    using namespace std::chrono;
    year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return Day::from_ymd(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
}

/// Parses `YYYY-MM`.
inline std::optional<Month> parse_month(std::string_view s) {
    if (s.size() != 7 || s[4] != '-') return std::nullopt;
    auto y = detail::parse_fixed_int(s.substr(0, 4));
    auto m = detail::parse_fixed_int(s.substr(5, 2));
    if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
    return Month::from_ym(*y, static_cast<unsigned>(*m));
}

inline std::string to_string(Day d) {
    auto ymd = d.ymd();
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

inline std::string to_string(Month m) { return fmt::format("{:04d}-{:02d}", m.year(), m.month()); }

// ---------------------------------------------------------------------------
// Numbers

/// Shortest representation that round-trips through parse_double.
inline std::string format_double(double x) {
    if (x == 0.0) return "0";  // folds -0
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "NA" || s == "nan" || s == "NaN"; }

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("DRIFT_ATTRIB_LOG");
        if (!env) return LogLevel::warn;
        std::string_view v{env};
        if (v == "error") return LogLevel::error;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

template <typename... Args>
void log(LogLevel lvl, fmt::format_string<Args...> f, Args&&... args) {
    if (lvl > log_level()) return;
    static constexpr const char* names[] = {"ERROR", "WARN", "INFO", "DEBUG"};
    std::string line = fmt::format("drift-attrib {}: ", names[static_cast<int>(lvl)]);
    line += fmt::format(f, std::forward<Args>(args)...);
    line += '\n';
    std::fputs(line.c_str(), stderr);
}

// ---------------------------------------------------------------------------
// CSV

/// Minimal reader for the unquoted comma-separated formats used by this toolkit.
class CsvReader {
public:
    CsvReader(const std::string& path, std::string_view expected_header) : path_(path), in_(path) {
        if (!in_) fail("{}: cannot open file", path);
        std::string line;
        if (!std::getline(in_, line)) fail("{}: empty file, expected header '{}'", path, expected_header);
        strip(line);
        if (!line.empty() && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
        header_ = split(line);
        if (!expected_header.empty() && line != expected_header)
            fail("{}: header '{}' does not match expected '{}'", path, line, expected_header);
    }

    /// Reads the next non-empty row; returns false at end of file. Rows are
    /// numbered from 1 after the header, skipping blank and comment lines.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            strip(line);
            if (line.empty() || line[0] == '#') continue;
            ++line_no_;
            fields = split(line);
            if (fields.size() != header_.size())
                fail("{}: row {}: expected {} fields, found {}", path_, line_no_, header_.size(), fields.size());
            return true;
        }
        return false;
    }

    int row() const { return line_no_; }
    const std::vector<std::string>& header() const { return header_; }
    const std::string& path() const { return path_; }

    double number(const std::vector<std::string>& f, std::size_t i) const {
        auto v = parse_double(f[i]);
        if (!v) fail("{}: row {}: malformed number '{}' in column '{}'", path_, line_no_, f[i], header_[i]);
        return *v;
    }

    static std::vector<std::string> split(std::string_view line) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            auto pos = line.find(',', start);
            out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        return out;
    }

private:
    static void strip(std::string& line) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    }

    std::string path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    int line_no_ = 0;
};

/// Writes `contents` to `path`, throwing on failure.
inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("{}: cannot open for writing", path);
    out << contents;
    if (!out) fail("{}: write failed", path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("{}: cannot open file", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace drift
