#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "damseep/error.hpp"
#include "damseep/materials.hpp"

using namespace damseep;

TEST_CASE("permeability parsing converts cm/s to m/s") {
    const auto p = Permeability::parse("1e-4 cm/s");
    CHECK(p.m_per_s() == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(p.unit() == PermeabilityUnit::CentimetrePerSecond);
    CHECK(Permeability::parse("  2.5e-3   m/s ").m_per_s() == 2.5e-3);
}

TEST_CASE("permeability text survives a round trip") {
    for (const char* text : {"1e-1 cm/s", "1e-8 cm/s", "2.5e0 m/s", "9.7e-6 m/s", "1e0 cm/s"}) {
        const auto p = Permeability::parse(text);
        CHECK(p.to_string() == text);
        CHECK(Permeability::parse(p.to_string()) == p);
    }
    CHECK(Permeability::parse("0.1 cm/s").to_string() == "1e-1 cm/s");
}

TEST_CASE("random permeabilities round-trip bit for bit") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> exponent(-12.0, 0.0);
    for (int i = 0; i < 500; ++i) {
        const double v = std::pow(10.0, exponent(rng));
        const auto p = Permeability::metres_per_second(v);
        CHECK(Permeability::parse(p.to_string()).m_per_s() == v);
    }
}

TEST_CASE("malformed permeability text is rejected") {
    CHECK_THROWS_AS(Permeability::parse("1e-4"), ValidationError);
    CHECK_THROWS_AS(Permeability::parse("1e-4 mm/s"), ValidationError);
    CHECK_THROWS_AS(Permeability::parse("abc cm/s"), ValidationError);
    CHECK_THROWS_AS(Permeability::parse("inf m/s"), ValidationError);
}

TEST_CASE("scientific formatting drops exponent padding") {
    CHECK(format_scientific(1e-5) == "1e-5");
    CHECK(format_scientific(250.0) == "2.5e2");
    CHECK(format_scientific(1.0) == "1e0");
}

TEST_CASE("Sahand material table") {
    struct Row {
        MaterialRole role;
        double k_cm, gamma, phi, c;
    };
    const Row rows[] = {
        {MaterialRole::UpstreamShell, 1e-1, 20, 35, 30}, {MaterialRole::DownstreamShell, 1e-1, 20, 35, 30},
        {MaterialRole::Core, 1e-8, 20, 30, 50},           {MaterialRole::Foundation, 1e-4, 21, 35, 0},
        {MaterialRole::Filter, 1e-2, 18, 35, 0},          {MaterialRole::Drain, 1.0, 18, 35, 0},
        {MaterialRole::Waste, 1e-2, 19, 30, 0},
    };
    for (const auto& r : rows) {
        const auto m = sahand_material(r.role);
        CAPTURE(m.name);
        CHECK(m.k_sat() == doctest::Approx(r.k_cm * 1e-2).epsilon(1e-14));
        CHECK(m.permeability.unit() == PermeabilityUnit::CentimetrePerSecond);
        CHECK(m.strength.unit_weight == r.gamma);
        CHECK(m.strength.friction_angle == r.phi);
        CHECK(m.strength.cohesion == r.c);
        CHECK_NOTHROW(m.validate());
    }
    CHECK(default_concrete_cover().k_sat() == doctest::Approx(1e-7));
}

TEST_CASE("material validation") {
    MaterialProperties m{"x", Permeability::metres_per_second(2.0), {}};
    CHECK_THROWS_AS(m.validate(), ValidationError);
    m.permeability = Permeability::metres_per_second(1e-5);
    m.strength.cohesion = -1;
    CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("role keys are distinct") {
    std::set<std::string_view> keys;
    for (auto r : kAllRoles) keys.insert(role_key(r));
    CHECK(keys.size() == std::size(kAllRoles));
}
