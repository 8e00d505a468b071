#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "damseep/error.hpp"
#include "damseep/mesh.hpp"
#include "fixtures.hpp"

using namespace damseep;

namespace {

double min_angle_deg(const std::array<Point, 3>& t) {
    double m = 180.0;
    for (int i = 0; i < 3; ++i) {
        const Point u = t[(i + 1) % 3] - t[i], v = t[(i + 2) % 3] - t[i];
        m = std::min(m, std::atan2(std::abs(cross(u, v)), dot(u, v)) * 180.0 / std::numbers::pi);
    }
    return m;
}

// Mesh invariants shared by every test: orientation, conformity, zone areas.
void check_mesh(const Mesh& m, const DamSection& s, double target, double min_angle) {
    REQUIRE_FALSE(m.elements.empty());
    std::map<std::pair<int, int>, int> edge_use;
    std::vector<double> zone_area(s.zones.size(), 0.0);
    double worst = 180.0, longest_ratio = 0.0;
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto& el = m.elements[e];
        const auto t = m.element_points(e);
        REQUIRE(el.zone >= 0);
        REQUIRE(el.zone < static_cast<int>(s.zones.size()));
        CHECK(signed_area(t) > 0.0);
        zone_area[el.zone] += m.element_area(e);
        worst = std::min(worst, min_angle_deg(t));
        for (int i = 0; i < 3; ++i) {
            const int a = el.nodes[i], b = el.nodes[(i + 1) % 3];
            ++edge_use[{std::min(a, b), std::max(a, b)}];
            longest_ratio = std::max(longest_ratio, distance(m.nodes[a], m.nodes[b]) / target);
        }
        CHECK(contains(s.zones[el.zone].polygon, m.element_centroid(e), 1e-7));
    }
    CHECK(worst >= min_angle - 1e-6);
    CHECK(longest_ratio <= 2.0);
    std::size_t boundary = 0;
    for (const auto& [edge, uses] : edge_use) {
        CHECK(uses <= 2);
        boundary += uses == 1;
    }
    CHECK(boundary == m.boundary_edges.size());
    for (std::size_t z = 0; z < s.zones.size(); ++z) {
        CAPTURE(s.zones[z].name);
        CHECK(zone_area[z] > 0.0);
        CHECK(zone_area[z] == doctest::Approx(area(s.zones[z].polygon)).epsilon(1e-9));
    }
    for (const auto& be : m.boundary_edges) {
        CHECK(be.segment >= 0);
        CHECK(be.segment < static_cast<int>(s.boundaries.size()));
    }
}

}  // namespace

TEST_CASE("Sahand mesh satisfies the mesh invariants") {
    const DamSection s = apply_scenario(build_sahand_section({}), fixtures::sahand_scenario());
    const Mesh m = triangulate(s, 10.0);
    check_mesh(m, s, 10.0, 20.0);
    const QualityReport q = mesh_quality(m);
    CHECK(q.element_count == m.elements.size());
    CHECK(q.min_angle_deg >= 20.0 - 1e-6);
    CHECK(q.max_aspect >= 1.0);
}

TEST_CASE("quality floor can be raised") {
    const auto s = fixtures::DupuitCase{}.section();
    for (double angle : {15.0, 25.0, 30.0}) {
        CAPTURE(angle);
        MeshOptions opt;
        opt.min_angle_deg = angle;
        check_mesh(triangulate(s, 1.5, {}, opt), s, 1.5, angle);
    }
}

TEST_CASE("meshing is deterministic") {
    const DamSection s = apply_scenario(build_sahand_section({}), fixtures::sahand_scenario());
    CHECK(triangulate(s, 12.0) == triangulate(s, 12.0));
}

TEST_CASE("thin zones are resolved") {
    // a 0.2 m seam between two blocks meshed at 2 m
    auto s = section_from_zones({{"a", rectangle(0, 0, 5, 3), "m"},
                                 {"seam", rectangle(5, 0, 5.2, 3), "m"},
                                 {"b", rectangle(5.2, 0, 10, 3), "m"}});
    const Mesh m = triangulate(s, 2.0);
    double seam = 0.0;
    for (std::size_t e = 0; e < m.elements.size(); ++e)
        if (m.elements[e].zone == 1) seam += m.element_area(e);
    CHECK(seam == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("refinement regions shrink elements locally") {
    const auto s = fixtures::DupuitCase{}.section();
    const RefinementRegion r{rectangle(15, 0, 20, 4), 0.25};
    const Mesh fine = triangulate(s, 2.0, std::span(&r, 1));
    const Mesh coarse = triangulate(s, 2.0);
    CHECK(fine.nodes.size() > coarse.nodes.size());
    for (std::size_t e = 0; e < fine.elements.size(); ++e) {
        const auto t = fine.element_points(e);
        bool inside = true;
        for (const auto& p : t) inside &= contains(r.polygon, p);
        if (!inside) continue;
        for (int i = 0; i < 3; ++i) CHECK(distance(t[i], t[(i + 1) % 3]) <= 2.0 * 0.25 + 1e-12);
    }
}

TEST_CASE("bad meshing requests") {
    const auto s = fixtures::DupuitCase{}.section();
    CHECK_THROWS_AS(triangulate(s, 0.0), ValidationError);
    MeshOptions opt;
    opt.min_angle_deg = 35.0;
    CHECK_THROWS_AS(triangulate(s, 1.0, {}, opt), ValidationError);
    opt = {};
    opt.max_vertices = 50;
    CHECK_THROWS_AS(triangulate(s, 0.1, {}, opt), MeshError);
    CHECK_THROWS_AS(triangulate(DamSection{}, 1.0), ValidationError);
}

TEST_CASE("text dump lists nodes then elements") {
    const auto s = fixtures::DupuitCase{}.section();
    const Mesh m = triangulate(s, 4.0);
    std::ostringstream os;
    write_mesh_text(m, os);
    std::istringstream is(os.str());
    std::string tag;
    std::size_t nodes = 0, elements = 0;
    bool seen_element = false;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        ls >> tag;
        if (tag == "N") {
            CHECK_FALSE(seen_element);
            double x, y;
            ls >> x >> y;
            CHECK(x == m.nodes[nodes].x);
            CHECK(y == m.nodes[nodes].y);
            ++nodes;
        } else {
            REQUIRE(tag == "E");
            seen_element = true;
            int a, b, c, z;
            ls >> a >> b >> c >> z;
            CHECK(m.elements[elements] == Element{{a, b, c}, z});
            ++elements;
        }
    }
    CHECK(nodes == m.nodes.size());
    CHECK(elements == m.elements.size());
}
