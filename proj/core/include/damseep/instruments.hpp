#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace damseep {

struct Sample {
    std::string date;  // YYYY-MM-DD
    double level = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Instrument name -> samples in ascending date order.
using SeriesMap = std::map<std::string, std::vector<Sample>>;

/// Reserved instrument names: reservoir level (m a.s.l.) and valley outflow (L/s).
inline constexpr std::string_view kReservoirSeries = "RESERVOIR";
inline constexpr std::string_view kDischargeSeries = "DISCHARGE_LPS";

/// Checks a calendar date in ISO-8601 extended form. Throws ValidationError.
std::string normalize_date(std::string_view text);

/// Reads `date,instrument,level_m` rows. A repeated (date, instrument) pair keeps the
/// last row and emits a warning. Throws IoError naming the line on malformed input.
SeriesMap parse_instrument_csv(std::istream& is, std::string_view source = "<stream>");
SeriesMap ingest_instrument_csv(const std::filesystem::path& path);

std::optional<double> value_on(const std::vector<Sample>& series, std::string_view date);

}  // namespace damseep
