#include "damseep/instruments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "damseep/error.hpp"
#include "damseep/log.hpp"

namespace damseep {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

int parse_int(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ValidationError("bad number");
    return v;
}

}  // namespace

std::string normalize_date(std::string_view text) {
    const auto t = trim(text);
    auto fail = [&] { return ValidationError(fmt::format("'{}' is not an ISO-8601 date (YYYY-MM-DD)", t)); };
    if (t.size() != 10 || t[4] != '-' || t[7] != '-') throw fail();
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (t[i] < '0' || t[i] > '9') throw fail();
    const std::chrono::year_month_day ymd{std::chrono::year{parse_int(t.substr(0, 4))},
                                          std::chrono::month{static_cast<unsigned>(parse_int(t.substr(5, 2)))},
                                          std::chrono::day{static_cast<unsigned>(parse_int(t.substr(8, 2)))}};
    if (!ymd.ok()) throw fail();
    return std::string(t);
}

SeriesMap parse_instrument_csv(std::istream& is, std::string_view source) {
    std::string line;
    std::size_t lineno = 0;
    auto error = [&](const std::string& what) { return IoError(fmt::format("{}:{}: {}", source, lineno, what)); };

    // header, skipping a UTF-8 byte order mark
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw error("missing header 'date,instrument,level_m'");
    const auto head = split(line);
    if (head.size() != 3 || head[0] != "date" || head[1] != "instrument" || head[2] != "level_m")
        throw error(fmt::format("unknown header '{}', expected 'date,instrument,level_m'", trim(line)));

    std::map<std::string, std::map<std::string, double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        if (f.size() != 3) throw error(fmt::format("expected 3 fields, found {}", f.size()));
        std::string date;
        try {
            date = normalize_date(f[0]);
        } catch (const ValidationError& e) {
            throw error(e.what());
        }
        if (f[1].empty()) throw error("empty instrument name");
        double level = 0.0;
        const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), level);
        if (ec != std::errc{} || ptr != f[2].data() + f[2].size() || !std::isfinite(level))
            throw error(fmt::format("bad level '{}'", f[2]));
        auto& series = rows[std::string(f[1])];
        if (series.count(date))
            warn(fmt::format("{}:{}: duplicate reading for {} on {}; keeping the last one", source, lineno, f[1], date));
        series[date] = level;
    }

    SeriesMap out;
    for (auto& [name, by_date] : rows) {
        auto& s = out[name];
        for (auto& [d, v] : by_date) s.push_back({d, v});
    }
    return out;
}

SeriesMap ingest_instrument_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open instrument file " + path.string());
    return parse_instrument_csv(f, path.string());
}

std::optional<double> value_on(const std::vector<Sample>& series, std::string_view date) {
    const auto it = std::lower_bound(series.begin(), series.end(), date,
                                     [](const Sample& s, std::string_view d) { return s.date < d; });
    if (it == series.end() || it->date != date) return std::nullopt;
    return it->level;
}

}  // namespace damseep
