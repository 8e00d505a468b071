#include "damseep/planar_graph.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "damseep/error.hpp"
#include "damseep/section.hpp"

namespace damseep {

namespace {

int weld(std::vector<Point>& verts, Point p, double tol) {
    for (std::size_t i = 0; i < verts.size(); ++i)
        if (std::abs(verts[i].x - p.x) <= tol && std::abs(verts[i].y - p.y) <= tol) return static_cast<int>(i);
    verts.push_back(p);
    return static_cast<int>(verts.size()) - 1;
}

}  // namespace

PlanarGraph build_planar_graph(std::span<const Zone> zones, std::span<const Point> extra_points, double tol) {
    PlanarGraph g;
    std::vector<std::vector<int>> ids(zones.size());
    for (std::size_t z = 0; z < zones.size(); ++z)
        for (const auto& p : zones[z].polygon) ids[z].push_back(weld(g.vertices, p, tol));
    for (const auto& p : extra_points) weld(g.vertices, p, tol);

    std::map<std::pair<int, int>, int> index;
    for (std::size_t z = 0; z < zones.size(); ++z) {
        const auto& poly = ids[z];
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const int va = poly[i], vb = poly[(i + 1) % n];
            if (va == vb) continue;
            const Point a = g.vertices[va], b = g.vertices[vb];
            const Point ab = b - a;
            const double len2 = dot(ab, ab);
            std::vector<std::pair<double, int>> on;
            for (std::size_t k = 0; k < g.vertices.size(); ++k) {
                const int kk = static_cast<int>(k);
                if (kk == va || kk == vb) continue;
                const Point p = g.vertices[k];
                if (distance_to_segment(p, a, b) > tol) continue;
                const double t = dot(p - a, ab) / len2;
                if (t > 0.0 && t < 1.0) on.emplace_back(t, kk);
            }
            std::sort(on.begin(), on.end());
            std::vector<int> chain{va};
            for (const auto& [t, k] : on) chain.push_back(k);
            chain.push_back(vb);
            for (std::size_t c = 0; c + 1 < chain.size(); ++c) {
                const int s = chain[c], e = chain[c + 1];
                const auto key = std::minmax(s, e);
                auto it = index.find(key);
                if (it == index.end()) {
                    index.emplace(key, static_cast<int>(g.edges.size()));
                    g.edges.push_back({s, e, static_cast<int>(z), -1});
                    continue;
                }
                auto& edge = g.edges[it->second];
                int& slot = (edge.a == s) ? edge.left : edge.right;
                if (slot >= 0)
                    throw GeometryError("zones '" + zones[slot].name + "' and '" + zones[z].name +
                                        "' overlap along a shared edge");
                slot = static_cast<int>(z);
            }
        }
    }
    return g;
}

std::vector<int> PlanarGraph::exterior_loop() const {
    std::map<int, int> next;
    for (const auto& e : edges) {
        if (!e.exterior()) continue;
        if (e.left >= 0)
            next[e.a] = e.b;
        else
            next[e.b] = e.a;
    }
    if (next.empty()) return {};
    int start = next.begin()->first;
    for (const auto& [v, n] : next) {
        const Point p = vertices[v], s = vertices[start];
        if (p.y < s.y || (p.y == s.y && p.x < s.x)) start = v;
    }
    std::vector<int> loop{start};
    int cur = next.at(start);
    while (cur != start) {
        loop.push_back(cur);
        auto it = next.find(cur);
        if (it == next.end() || loop.size() > next.size())
            throw GeometryError("exterior boundary of the zone union is not a single closed loop");
        cur = it->second;
    }
    if (loop.size() != next.size())
        throw GeometryError("zone union has more than one boundary loop (holes or disconnected zones)");
    return loop;
}

}  // namespace damseep
