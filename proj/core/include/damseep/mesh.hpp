#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "damseep/geometry2d.hpp"
#include "damseep/section.hpp"

namespace damseep {

struct Element {
    std::array<int, 3> nodes{};  // counter-clockwise
    int zone = -1;               // index into DamSection::zones

    friend bool operator==(const Element&, const Element&) = default;
};

struct MeshBoundaryEdge {
    std::array<int, 2> nodes{};
    int segment = -1;  // index into DamSection::boundaries, -1 when the section has none

    friend bool operator==(const MeshBoundaryEdge&, const MeshBoundaryEdge&) = default;
};

/// Conforming, zone-tagged linear triangle mesh.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<Element> elements;
    std::vector<MeshBoundaryEdge> boundary_edges;
    double target_size = 0.0;

    double element_area(std::size_t e) const;
    Point element_centroid(std::size_t e) const;
    std::array<Point, 3> element_points(std::size_t e) const;

    friend bool operator==(const Mesh&, const Mesh&) = default;
};

struct RefinementRegion {
    Polygon polygon;
    double size = 0.0;
};

struct MeshOptions {
    double min_angle_deg = 20.0;   // accepted range [15, 30]
    std::size_t max_vertices = 3'000'000;
    int max_halvings = 10;         // how far below the smallest requested size a segment may be split
};

/// Conforming Delaunay refinement of the zone partition (Ruppert-style, exact predicates).
///
/// Every zone edge and boundary polyline becomes a union of mesh edges. Triangles are
/// refined until their smallest angle reaches the quality floor and their longest edge
/// is within the local size: `target_size`, any refinement region covering the point,
/// or half the width of a zone thinner than `target_size`.
Mesh triangulate(const DamSection& section, double target_size, std::span<const RefinementRegion> regions = {},
                 const MeshOptions& options = {});

/// Convenience for tests and benchmarks: a section holding only the given zones.
DamSection section_from_zones(std::vector<Zone> zones, std::vector<MaterialProperties> materials = {});

struct QualityReport {
    double min_angle_deg = 0.0;
    double max_aspect = 0.0;  // circumradius / (2 * inradius); 1 for an equilateral triangle
    std::size_t element_count = 0;
};

QualityReport mesh_quality(const Mesh& mesh);

/// Debug dump: one record per line, `N x y` then `E n1 n2 n3 zone`.
void write_mesh_text(const Mesh& mesh, std::ostream& os);

}  // namespace damseep
