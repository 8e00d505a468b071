#include <doctest.h>

#include <sstream>

#include "damseep/error.hpp"
#include "damseep/instruments.hpp"
#include "damseep/log.hpp"
#include "fixtures.hpp"

using namespace damseep;

namespace {

struct CaptureWarnings {
    std::vector<std::string> seen;
    WarningHandler previous;
    CaptureWarnings() {
        previous = set_warning_handler([this](std::string_view m) { seen.emplace_back(m); });
    }
    ~CaptureWarnings() { set_warning_handler(previous); }
};

SeriesMap parse(const std::string& text) {
    std::istringstream is(text);
    return parse_instrument_csv(is, "mem.csv");
}

}  // namespace

TEST_CASE("dates") {
    CHECK(normalize_date("2007-05-07") == "2007-05-07");
    CHECK(normalize_date("2008-02-29") == "2008-02-29");
    CHECK_THROWS_AS(normalize_date("2007-02-29"), ValidationError);
    CHECK_THROWS_AS(normalize_date("2007/05/07"), ValidationError);
    CHECK_THROWS_AS(normalize_date("07-05-2007"), ValidationError);
    CHECK_THROWS_AS(normalize_date("2007-13-01"), ValidationError);
}

TEST_CASE("well-formed CSV") {
    const auto s = parse("\xEF\xBB\xBF" "date,instrument,level_m\n"
                         "2007-05-07,RESERVOIR,1582.8\n"
                         "2007-04-07,RESERVOIR,1581.76\n"
                         "2007-05-07,I260-U12.5,93.93\r\n"
                         "\n");
    REQUIRE(s.size() == 2);
    const auto& r = s.at("RESERVOIR");
    REQUIRE(r.size() == 2);
    CHECK(r[0].date == "2007-04-07");  // sorted by date
    CHECK(value_on(r, "2007-05-07") == 1582.8);
    CHECK_FALSE(value_on(r, "2001-01-01").has_value());
    CHECK(s.at("I260-U12.5")[0].level == 93.93);
}

TEST_CASE("malformed rows name the line") {
    auto fails_at = [](const std::string& text, const std::string& where) {
        try {
            parse(text);
            FAIL("accepted: ", text);
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find(where) != std::string::npos);
        }
    };
    fails_at("date,level\n", "mem.csv:1");
    fails_at("date,instrument,level_m\n2007-05-07,A,1\n2007-05-07,B\n", "mem.csv:3");
    fails_at("date,instrument,level_m\n2007-05-07,A,abc\n", "mem.csv:2");
    fails_at("date,instrument,level_m\n2007-02-30,A,1\n", "mem.csv:2");
    fails_at("date,instrument,level_m\n2007-05-07,,1\n", "mem.csv:2");
}

TEST_CASE("repeated readings keep the last row and warn") {
    CaptureWarnings w;
    const auto s = parse("date,instrument,level_m\n2007-05-07,A,1\n2007-05-07,A,2\n");
    CHECK(s.at("A").size() == 1);
    CHECK(s.at("A")[0].level == 2.0);
    REQUIRE(w.seen.size() == 1);
    CHECK(w.seen[0].find("A") != std::string::npos);
}

TEST_CASE("bundled instrument file") {
    const auto s = ingest_instrument_csv(fixtures::source_path("data/sahand_instruments.csv"));
    CHECK(s.count(std::string(kReservoirSeries)) == 1);
    CHECK(s.count(std::string(kDischargeSeries)) == 1);
    const auto& res = s.at(std::string(kReservoirSeries));
    CHECK(value_on(res, "2007-05-07") == 1582.8);
    CHECK(value_on(s.at(std::string(kDischargeSeries)), "2007-05-07") == 12.7);
    const std::pair<const char*, double> published[] = {
        {"I260-U12.5", 93.93}, {"I260-D4.3", 83.95}, {"I260-D30.4", 71.47}, {"I260-D44.9", 71.3}};
    for (const auto& [name, level] : published) CHECK(value_on(s.at(name), "2007-05-07") == level);
    CHECK_THROWS_AS(ingest_instrument_csv(fixtures::source_path("data/missing.csv")), IoError);
}
