#pragma once

#include <span>
#include <vector>

#include "damseep/geometry2d.hpp"

namespace damseep {

struct Zone;

/// Planar straight-line graph of a zone partition: welded vertices and zone edges
/// split at every vertex that lies on them, each tagged with the zones on either side.
struct PlanarGraph {
    struct Edge {
        int a = -1;
        int b = -1;
        int left = -1;   // zone on the left of a -> b, -1 outside
        int right = -1;
        bool exterior() const { return left < 0 || right < 0; }
    };

    std::vector<Point> vertices;
    std::vector<Edge> edges;

    /// Vertex ids of the outer boundary, counter-clockwise, starting at the lowest-leftmost vertex.
    std::vector<int> exterior_loop() const;
};

/// Throws GeometryError when two zones claim the same side of an edge.
PlanarGraph build_planar_graph(std::span<const Zone> zones, std::span<const Point> extra_points,
                               double tol = 1e-7);

}  // namespace damseep
