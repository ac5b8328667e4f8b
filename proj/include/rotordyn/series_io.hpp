#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rotordyn/config.hpp"
#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/version.hpp"

namespace rotordyn {

/// I/O failure while writing or reading a result file.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Cell = std::variant<std::int64_t, double, std::string>;
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// A flat result table: "# key=value" metadata, a header row, then rows.
struct Table {
    Metadata metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row)
    {
        require(row.size() == columns.size(), "Table: row width does not match the header");
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string& name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw ValidationError("table has no column '" + name + "'");
    }
};

inline std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_cell(const Cell& c)
{
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

inline double cell_as_double(const Cell& c)
{
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&c)) return *d;
    throw ValidationError("table cell '" + std::get<std::string>(c) + "' is not numeric");
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Provenance lines for every file of a run: command, version, seed, the
/// resolved configuration, and a creation time (the only line that varies
/// between identical runs).
inline Metadata run_metadata(const RunConfig& cfg, bool with_timestamp = true)
{
    Metadata m{{"command", cfg.command}, {"version", ROTORDYN_VERSION}, {"seed", std::to_string(cfg.seed)}};
    for (const auto& [k, v] : describe(cfg.params)) m.emplace_back(k, v);
    for (const auto& [k, v] : cfg.resolved)
        if (k != "command" && k != "seed" && k != "K" && k != "epsilon" && k != "kbar" && k != "M") m.emplace_back("config." + k, v);
    if (with_timestamp) m.emplace_back("created", utc_timestamp());
    return m;
}

template <class V>
Table series_table(const Series<V>& s, const Metadata& meta = {}, const std::string& value_name = "value")
{
    Table t;
    t.metadata = meta;
    for (const auto& [k, v] : s.meta) t.metadata.emplace_back(k, v);
    if (!s.label.empty()) t.metadata.emplace_back("label", s.label);
    if constexpr (std::is_same_v<V, cplx>) {
        t.columns = {"t", value_name + "_re", value_name + "_im"};
        for (std::size_t i = 0; i < s.size(); ++i) t.add_row({s.times[i], s.values[i].real(), s.values[i].imag()});
    } else {
        t.columns = {"t", value_name};
        for (std::size_t i = 0; i < s.size(); ++i) t.add_row({s.times[i], static_cast<double>(s.values[i])});
    }
    return t;
}

inline std::string to_csv(const Table& t)
{
    std::ostringstream out;
    for (const auto& [k, v] : t.metadata) {
        std::string clean = v;
        for (auto& ch : clean)
            if (ch == '\n' || ch == '\r') ch = ' ';
        out << "# " << k << '=' << clean << '\n';
    }
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
        out << '\n';
    }
    return out.str();
}

inline nlohmann::ordered_json to_json(const Table& t)
{
    nlohmann::ordered_json j;
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.metadata) j["metadata"][k] = v;
    j["columns"] = t.columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        auto r = nlohmann::ordered_json::array();
        for (const auto& c : row) {
            const auto* d = std::get_if<double>(&c);
            if (d && !std::isfinite(*d)) {
                r.push_back(nullptr); // JSON has no nan/inf
            } else {
                std::visit([&](const auto& x) { r.push_back(x); }, c);
            }
        }
        j["rows"].push_back(std::move(r));
    }
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out.flush()) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_csv(const Table& t, const std::filesystem::path& path) { write_text(path, to_csv(t)); }

inline void write_json(const Table& t, const std::filesystem::path& path) { write_text(path, to_json(t).dump(1) + "\n"); }

template <class V>
void write_series(const Series<V>& s, const std::filesystem::path& path, const Metadata& meta = {})
{
    write_csv(series_table(s, meta), path);
}

namespace detail {

inline Cell parse_cell(const std::string& s)
{
    std::int64_t i = 0;
    const char* end = s.data() + s.size();
    if (auto [p, ec] = std::from_chars(s.data(), end, i); ec == std::errc() && p == end) {
        if (i == 0 && s[0] == '-') return -0.0;
        return i;
    }
    double d = 0.0;
    if (auto [p, ec] = std::from_chars(s.data(), end, d); ec == std::errc() && p == end) return d;
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

} // namespace detail

inline Table read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": metadata line without '='");
            t.metadata.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
            continue;
        }
        auto fields = detail::split_csv_line(line);
        if (t.columns.empty()) {
            t.columns = std::move(fields);
            continue;
        }
        if (fields.size() != t.columns.size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) + " fields");
        std::vector<Cell> row;
        for (const auto& f : fields) row.push_back(detail::parse_cell(f));
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) throw ValidationError(path.string() + ": no header row");
    return t;
}

/// Reads a (t, value) file written by write_series.
inline TimeSeries read_time_series(const std::filesystem::path& path, const std::string& value_column = "")
{
    const auto t = read_csv(path);
    require(t.columns.size() >= 2, path.string() + ": need at least two columns");
    const std::size_t tc = t.column("t");
    const std::size_t vc = value_column.empty() ? 1 : t.column(value_column);
    TimeSeries s;
    for (const auto& row : t.rows) {
        const auto* ti = std::get_if<std::int64_t>(&row[tc]);
        require(ti != nullptr, path.string() + ": time column must hold integers");
        s.push_back(*ti, cell_as_double(row[vc]));
    }
    return s;
}

/// Reads a (t, x_re, x_im) file written by write_series for a complex series.
inline ComplexSeries read_complex_series(const std::filesystem::path& path)
{
    const auto t = read_csv(path);
    require(t.columns.size() == 3, path.string() + ": a complex series has three columns");
    ComplexSeries s;
    for (const auto& row : t.rows) {
        const auto* ti = std::get_if<std::int64_t>(&row[0]);
        require(ti != nullptr, path.string() + ": time column must hold integers");
        s.push_back(*ti, cplx{cell_as_double(row[1]), cell_as_double(row[2])});
    }
    return s;
}

} // namespace rotordyn
