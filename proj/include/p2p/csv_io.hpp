#pragma once

// CSV schemas and scenario ingestion.
//
//   loads.csv        household_id,region_id,day,h0..h23   (kWh)
//   irradiance.csv   day,h0..h23                          (kWh per kW)
//   tariff_buy.csv   day,h0..h23                          ($/kWh)
//   tariff_sell.csv  day,h0..h23                          ($/kWh)
//   regions.csv      region_id,lat,lon
//   exclusions.csv   household_id,reason
//
// Floats are written in shortest round-trip form.

#include "p2p/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace p2p {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& message)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), file_(file), line_(line) {}
    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class EmptyScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace csv {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Builds CSV text in memory; write_file_atomic publishes it.
class Writer {
public:
    explicit Writer(const std::vector<std::string>& header) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ += ',';
            out_ += fields[i];
        }
        out_ += '\n';
    }

    const std::string& str() const { return out_; }

private:
    std::string out_;
};

/// Writes to a temporary sibling and renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Parsed CSV table: header plus rows of fields, with 1-based line numbers.
struct Table {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError(file, 1, "missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }

    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ParseError(file, lines[row], "column '" + header[col] + "': not a number: '" + s + "'");
        return v;
    }

    std::size_t integer(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        std::size_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ParseError(file, lines[row], "column '" + header[col] + "': not an integer: '" + s + "'");
        return v;
    }
};

inline Table parse(std::string_view text, const std::string& file) {
    Table t;
    t.file = file;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(file, line_no,
                             "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(line_no);
    }
    if (t.header.empty()) throw ParseError(file, 1, "empty file");
    return t;
}

inline Table read(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

inline std::vector<std::string> hour_header(std::vector<std::string> leading) {
    for (std::size_t h = 0; h < kHoursPerDay; ++h) leading.push_back("h" + std::to_string(h));
    return leading;
}

}  // namespace csv

struct ScenarioPaths {
    std::filesystem::path loads;
    std::filesystem::path irradiance;
    std::filesystem::path tariff_buy;
    std::filesystem::path tariff_sell;
    std::filesystem::path regions;

    static ScenarioPaths in_dir(const std::filesystem::path& dir) {
        return {dir / "loads.csv", dir / "irradiance.csv", dir / "tariff_buy.csv", dir / "tariff_sell.csv",
                dir / "regions.csv"};
    }
};

struct Exclusion {
    std::string household_id;
    std::string reason;
};

struct IngestOptions {
    double min_mean_load_kw = 0.1;
    double max_zero_fraction = 0.5;
    double day_weight = 1.0;
};

struct IngestResult {
    Scenario scenario;
    std::vector<Exclusion> exclusions;
};

namespace detail {

inline HourlyMatrix read_day_matrix(const std::filesystem::path& path) {
    const auto t = csv::read(path);
    const std::size_t day_col = t.column("day");
    std::vector<std::size_t> hour_cols;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) hour_cols.push_back(t.column("h" + std::to_string(h)));
    HourlyMatrix m(t.rows.size());
    std::vector<bool> seen(t.rows.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::size_t d = t.integer(r, day_col);
        if (d >= t.rows.size()) throw ParseError(t.file, t.lines[r], "day index out of range");
        if (seen[d]) throw ParseError(t.file, t.lines[r], "duplicate day " + std::to_string(d));
        seen[d] = true;
        for (std::size_t h = 0; h < kHoursPerDay; ++h) m(d, h) = t.number(r, hour_cols[h]);
    }
    return m;
}

}  // namespace detail

/// Reads the CSV set, drops households with low mean load or mostly zero
/// readings, and sizes the rest to net zero. Households are ordered by id.
inline IngestResult load_scenario(const ScenarioPaths& paths, const AssetSpec& asset, const IngestOptions& options = {}) {
    IngestResult out;
    Scenario& s = out.scenario;
    s.asset = asset;
    s.day_weight = options.day_weight;
    s.irradiance.values = detail::read_day_matrix(paths.irradiance);
    s.tariff.buy = detail::read_day_matrix(paths.tariff_buy);
    s.tariff.sell = detail::read_day_matrix(paths.tariff_sell);
    const std::size_t days = s.irradiance.values.days();

    {
        const auto t = csv::read(paths.regions);
        const std::size_t id = t.column("region_id"), lat = t.column("lat"), lon = t.column("lon");
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            s.regions.push_back({t.rows[r][id], t.number(r, lat), t.number(r, lon)});
    }

    const auto t = csv::read(paths.loads);
    const std::size_t id_col = t.column("household_id"), region_col = t.column("region_id"), day_col = t.column("day");
    std::vector<std::size_t> hour_cols;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) hour_cols.push_back(t.column("h" + std::to_string(h)));

    struct Pending {
        HouseholdRecord record;
        std::vector<bool> seen;
        std::size_t first_line = 0;
    };
    std::map<std::string, Pending> pending;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& id = t.rows[r][id_col];
        if (id.empty()) throw ParseError(t.file, t.lines[r], "empty household_id");
        auto [it, inserted] = pending.try_emplace(id);
        Pending& p = it->second;
        if (inserted) {
            p.record.id = id;
            p.record.region_id = t.rows[r][region_col];
            p.record.load = HourlyMatrix(days);
            p.seen.assign(days, false);
            p.first_line = t.lines[r];
        } else if (p.record.region_id != t.rows[r][region_col]) {
            throw ParseError(t.file, t.lines[r], "household " + id + " changes region");
        }
        const std::size_t d = t.integer(r, day_col);
        if (d >= days) throw ParseError(t.file, t.lines[r], "day " + std::to_string(d) + " beyond irradiance days");
        if (p.seen[d]) throw ParseError(t.file, t.lines[r], "duplicate day for household " + id);
        p.seen[d] = true;
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            const double v = t.number(r, hour_cols[h]);
            if (!(v >= 0.0)) throw ParseError(t.file, t.lines[r], "negative or invalid load");
            p.record.load(d, h) = v;
        }
    }

    for (auto& [id, p] : pending) {
        if (std::find(p.seen.begin(), p.seen.end(), false) != p.seen.end())
            throw ParseError(t.file, p.first_line, "household " + id + " is missing days");
        const double readings = static_cast<double>(days * kHoursPerDay);
        std::size_t zeros = 0;
        for (const auto& row : p.record.load.rows())
            for (double v : row) zeros += v == 0.0 ? 1 : 0;
        if (static_cast<double>(zeros) / readings > options.max_zero_fraction) {
            out.exclusions.push_back({id, "zero readings"});
            continue;
        }
        if (p.record.load.sum() / readings < options.min_mean_load_kw) {
            out.exclusions.push_back({id, "low consumption"});
            continue;
        }
        p.record.net_zero_size = compute_net_zero_size(p.record.load, s.irradiance, asset.eta_i);
        s.households.push_back(std::move(p.record));
    }
    if (s.households.empty()) throw EmptyScenarioError("load_scenario: every household was excluded");
    validate(s);
    return out;
}

/// Writes the scenario CSV set plus exclusions.csv into `dir`.
inline void write_scenario(const Scenario& s, const std::filesystem::path& dir,
                           const std::vector<Exclusion>& exclusions = {}) {
    using csv::format_double;
    auto day_table = [&](const HourlyMatrix& m) {
        csv::Writer w(csv::hour_header({"day"}));
        for (std::size_t d = 0; d < m.days(); ++d) {
            std::vector<std::string> f{std::to_string(d)};
            for (double v : m.day(d)) f.push_back(format_double(v));
            w.row(f);
        }
        return w.str();
    };
    csv::write_file_atomic(dir / "irradiance.csv", day_table(s.irradiance.values));
    csv::write_file_atomic(dir / "tariff_buy.csv", day_table(s.tariff.buy));
    csv::write_file_atomic(dir / "tariff_sell.csv", day_table(s.tariff.sell));

    csv::Writer regions({"region_id", "lat", "lon"});
    for (const auto& r : s.regions) regions.row({r.id, format_double(r.latitude), format_double(r.longitude)});
    csv::write_file_atomic(dir / "regions.csv", regions.str());

    csv::Writer loads(csv::hour_header({"household_id", "region_id", "day"}));
    for (const auto& hh : s.households)
        for (std::size_t d = 0; d < hh.load.days(); ++d) {
            std::vector<std::string> f{hh.id, hh.region_id, std::to_string(d)};
            for (double v : hh.load.day(d)) f.push_back(format_double(v));
            loads.row(f);
        }
    csv::write_file_atomic(dir / "loads.csv", loads.str());

    csv::Writer ex({"household_id", "reason"});
    for (const auto& e : exclusions) ex.row({e.household_id, e.reason});
    csv::write_file_atomic(dir / "exclusions.csv", ex.str());
}

}  // namespace p2p
