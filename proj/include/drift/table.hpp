#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "drift/core.hpp"

namespace drift {

/// Column-oriented table with numeric (NaN = missing) and text columns.
class Table {
public:
    struct Column {
        std::string name;
        bool is_text = false;
        std::vector<double> num;
        std::vector<std::string> text;
    };

    std::size_t rows() const { return rows_; }
    const std::vector<Column>& columns() const { return cols_; }

    void add_numeric(std::string name, std::vector<double> values) {
        check_new(name, values.size());
        cols_.push_back({std::move(name), false, std::move(values), {}});
    }
    void add_text(std::string name, std::vector<std::string> values) {
        check_new(name, values.size());
        cols_.push_back({std::move(name), true, {}, std::move(values)});
    }

    bool has(std::string_view name) const { return find(name) != nullptr; }
    const Column& get(std::string_view name) const {
        const Column* c = find(name);
        if (!c) fail("table: no column named '{}'", name);
        return *c;
    }
    const std::vector<double>& numeric(std::string_view name) const {
        const auto& c = get(name);
        if (c.is_text) fail("table: column '{}' is text, numeric expected", name);
        return c.num;
    }

    /// Cell rendered as text; numeric NaN renders as NA.
    std::string cell_text(const Column& c, std::size_t r) const {
        if (c.is_text) return c.text[r];
        return std::isnan(c.num[r]) ? std::string("NA") : format_double(c.num[r]);
    }

    /// CSV with a leading schema comment listing column names and types.
    std::string to_csv() const {
        std::string out = "# columns:";
        for (std::size_t i = 0; i < cols_.size(); ++i)
            out += fmt::format("{}{}:{}", i ? "," : " ", cols_[i].name, cols_[i].is_text ? "text" : "num");
        out += '\n';
        for (std::size_t i = 0; i < cols_.size(); ++i) out += (i ? "," : "") + cols_[i].name;
        out += '\n';
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t i = 0; i < cols_.size(); ++i) {
                if (i) out += ',';
                out += cell_text(cols_[i], r);
            }
            out += '\n';
        }
        return out;
    }

    /// Reads a CSV. Column types come from the schema comment when present,
    /// otherwise a column is numeric iff every cell parses as a number or NA.
    static Table from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail("{}: cannot open file", path);
        std::string line;
        std::map<std::string, bool> declared_text;
        std::vector<std::string> header;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.rfind("# columns:", 0) == 0) {
                for (auto& item : CsvReader::split(std::string_view(line).substr(10))) {
                    auto s = item;
                    while (!s.empty() && s.front() == ' ') s.erase(0, 1);
                    auto colon = s.rfind(':');
                    if (colon != std::string::npos) declared_text[s.substr(0, colon)] = s.substr(colon + 1) == "text";
                }
                continue;
            }
            if (line.empty() || line[0] == '#') continue;
            header = CsvReader::split(line);
            break;
        }
        if (header.empty()) fail("{}: missing header", path);
        std::vector<std::vector<std::string>> cells(header.size());
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            auto f = CsvReader::split(line);
            if (f.size() != header.size())
                fail("{}: data row {}: expected {} fields, found {}", path, line_no, header.size(), f.size());
            for (std::size_t i = 0; i < f.size(); ++i) cells[i].push_back(std::move(f[i]));
        }
        Table t;
        const std::size_t nrows = cells[0].size();
        for (std::size_t i = 0; i < header.size(); ++i) {
            bool text;
            if (auto it = declared_text.find(header[i]); it != declared_text.end()) {
                text = it->second;
            } else {
                text = false;
                for (const auto& s : cells[i])
                    if (!is_missing_token(s) && !parse_double(s)) {
                        text = true;
                        break;
                    }
            }
            if (text) {
                t.add_text(header[i], std::move(cells[i]));
            } else {
                std::vector<double> v;
                v.reserve(cells[i].size());
                for (const auto& s : cells[i]) {
                    if (is_missing_token(s)) {
                        v.push_back(std::nan(""));
                        continue;
                    }
                    auto d = parse_double(s);
                    if (!d) fail("{}: column '{}': malformed number '{}'", path, header[i], s);
                    v.push_back(*d);
                }
                t.add_numeric(header[i], std::move(v));
            }
        }
        t.rows_ = nrows;
        return t;
    }

private:
    const Column* find(std::string_view name) const {
        for (const auto& c : cols_)
            if (c.name == name) return &c;
        return nullptr;
    }
    void check_new(const std::string& name, std::size_t n) {
        if (has(name)) fail("table: duplicate column '{}'", name);
        if (!cols_.empty() && n != rows_) fail("table: column '{}' has {} rows, table has {}", name, n, rows_);
        rows_ = n;
    }

    std::vector<Column> cols_;
    std::size_t rows_ = 0;
};

}  // namespace drift
