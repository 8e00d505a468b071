#include <doctest.h>

#include <json.hpp>

#include "damseep/config.hpp"
#include "damseep/error.hpp"
#include "fixtures.hpp"

using namespace damseep;
using nlohmann::json;

namespace {

json sweep_json() { return json::parse(fixtures::slurp(fixtures::source_path("configs/sahand_sweep.json"))); }

std::string config_error(const json& j) {
    try {
        parse_config(j.dump());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("bundled configurations parse") {
    const RunConfig base = load_config(fixtures::source_path("configs/sahand_baseline.json"));
    CHECK(base.scenarios.size() == 1);
    CHECK(base.baseline == "baseline");
    CHECK(base.mesh.target_size == 5.0);
    CHECK(base.piezometers.size() == 4);

    const RunConfig sweep = load_config(fixtures::source_path("configs/sahand_sweep.json"));
    REQUIRE(sweep.scenarios.size() == 9);
    const Scenario& b = sweep.scenario("baseline");
    CHECK(b.reservoir_level == 1600.3);
    CHECK(b.interventions.blanket_drain.has_value());
    CHECK(b.interventions.claw_drain.has_value());
    REQUIRE(b.interventions.core_blanket.has_value());
    CHECK(b.interventions.core_blanket->length == 60.0);
    CHECK(sweep.scenario("depth-90").interventions.foundation_depth_override == 90.0);
    const Scenario& comp = sweep.scenario("composite");
    CHECK(comp.interventions.core_blanket->length == 0.0);
    CHECK(comp.interventions.cutoff_upstream_heel.has_value());
    CHECK(comp.interventions.concrete_cover->material.name == "Concrete cover");
    CHECK(comp.interventions.clay_blanket->material.k_sat() == doctest::Approx(1e-10));
    CHECK_THROWS_AS(sweep.scenario("nope"), ConfigError);

    const DamSection s = sweep.build_section();
    CHECK(s.crest_elevation == 1607.0);
    CHECK(s.find_material("Stone foundation")->k_sat() == doctest::Approx(1e-6));
    const auto recs = sweep.piezometer_records(s);
    REQUIRE(recs.size() == 4);
    CHECK(recs[0].name == "I260-U12.5");
    CHECK(recs[0].location.x == doctest::Approx(s.layout.axis_x - 12.5));
    CHECK(sweep.calibration.parameters.at(0).material == "Stone foundation");
}

TEST_CASE("unknown keys are rejected by path") {
    auto j = sweep_json();
    j["solver"]["relaxation"] = 0.4;
    CHECK(config_error(j).find("solver.relaxation") != std::string::npos);

    j = sweep_json();
    j["scenarios"][2]["interventions"]["cutoff_under_core"] = {{"depth", 30}, {"thikness", 2}};
    CHECK(config_error(j).find("thikness") != std::string::npos);
}

TEST_CASE("permeabilities need a unit") {
    auto j = sweep_json();
    j["materials"]["core"]["k"] = "1e-8";
    CHECK(config_error(j).find("materials.core.k") != std::string::npos);
    j["materials"]["core"]["k"] = 1e-8;
    CHECK_FALSE(config_error(j).empty());
    j["materials"]["core"]["k"] = "1e-8 ft/s";
    CHECK_FALSE(config_error(j).empty());
}

TEST_CASE("references and structural checks") {
    auto j = sweep_json();
    j["scenarios"][4]["interventions"]["cutoff_under_core"]["material"] = "bentonite";
    CHECK(config_error(j).find("bentonite") != std::string::npos);

    j = sweep_json();
    j["scenarios"][1]["name"] = "baseline";
    CHECK(config_error(j).find("duplicate") != std::string::npos);

    j = sweep_json();
    j["baseline"] = "missing";
    CHECK(config_error(j).find("baseline") != std::string::npos);

    j = sweep_json();
    j["mesh"]["min_angle"] = 40;
    CHECK(config_error(j).find("min_angle") != std::string::npos);

    j = sweep_json();
    j["solver"]["tol_head"] = -1;
    CHECK(config_error(j).find("tol_head") != std::string::npos);

    j = sweep_json();
    j["scenarios"][0]["reservoir_level"] = 1700;
    CHECK_FALSE(config_error(j).empty());

    CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(load_config(fixtures::source_path("configs/none.json")), ConfigError);
}

TEST_CASE("common interventions merge into scenarios") {
    auto j = sweep_json();
    j["scenarios"] = json::array({
        {{"name", "plain"}},
        {{"name", "own"}, {"inherit_common", false}},
        {{"name", "drop"}, {"interventions", {{"claw_drain", nullptr}}}},
        {{"name", "swap"}, {"interventions", {{"core_blanket", {{"thickness", 2}, {"length", 10}, {"material", "core"}}}}}},
    });
    j["baseline"] = "plain";
    const RunConfig c = parse_config(j.dump());
    CHECK(c.scenario("plain").interventions.claw_drain.has_value());
    CHECK(c.scenario("own").interventions.empty());
    CHECK_FALSE(c.scenario("drop").interventions.claw_drain.has_value());
    CHECK(c.scenario("drop").interventions.blanket_drain.has_value());
    CHECK(c.scenario("swap").interventions.core_blanket->thickness == 2.0);
}

TEST_CASE("echo round trip and hashing") {
    const RunConfig c = load_config(fixtures::source_path("configs/sahand_sweep.json"));
    const std::string echo = echo_config(c);
    const RunConfig again = parse_config(echo);
    CHECK(echo_config(again) == echo);
    CHECK(again.scenarios == c.scenarios);
    CHECK(again.solver == c.solver);

    const auto h = content_hash(echo);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(content_hash(echo) == h);
    CHECK(content_hash(echo + " ") != h);
    CHECK(content_hash("") == "cbf29ce484222325");  // FNV-1a offset basis
}
