#include "damseep/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>

#include <fmt/format.h>

#include "damseep/error.hpp"
#include "damseep/planar_graph.hpp"
#include "predicates.hpp"

namespace damseep {

double Mesh::element_area(std::size_t e) const {
    const auto p = element_points(e);
    return 0.5 * cross(p[1] - p[0], p[2] - p[0]);
}

Point Mesh::element_centroid(std::size_t e) const {
    const auto p = element_points(e);
    return {(p[0].x + p[1].x + p[2].x) / 3.0, (p[0].y + p[1].y + p[2].y) / 3.0};
}

std::array<Point, 3> Mesh::element_points(std::size_t e) const {
    const auto& n = elements[e].nodes;
    return {nodes[n[0]], nodes[n[1]], nodes[n[2]]};
}

DamSection section_from_zones(std::vector<Zone> zones, std::vector<MaterialProperties> materials) {
    DamSection s;
    for (auto& z : zones) z.polygon = cleanup(std::move(z.polygon));
    s.zones = std::move(zones);
    s.materials = std::move(materials);
    return s;
}

namespace {

using detail::IPoint;
using detail::incircle;
using detail::orient;

constexpr double kLatticeBits = 36.0;

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> n{-1, -1, -1};  // n[i] is across the edge opposite v[i]
    bool alive = true;
};

struct SegInfo {
    int boundary = -1;
    int origin = -1;  // planar graph edge it was cut from
};

struct SizeZone {
    Polygon polygon;
    double size;
};

class Refiner {
public:
    Refiner(const DamSection& section, double target, std::span<const RefinementRegion> regions,
            const MeshOptions& opt)
        : section_(section), target_(target), opt_(opt) {
        std::vector<Point> extra;
        for (const auto& b : section.boundaries) extra.insert(extra.end(), b.polyline.begin(), b.polyline.end());
        graph_ = build_planar_graph(section.zones, extra);

        double xmin = std::numeric_limits<double>::infinity(), ymin = xmin, xmax = -xmin, ymax = -xmin;
        for (const auto& p : graph_.vertices) {
            xmin = std::min(xmin, p.x);
            ymin = std::min(ymin, p.y);
            xmax = std::max(xmax, p.x);
            ymax = std::max(ymax, p.y);
        }
        origin_ = {xmin, ymin};
        const double extent = std::max({xmax - xmin, ymax - ymin, 1e-300});
        scale_ = std::exp2(std::floor(kLatticeBits - std::log2(extent)));

        min_size_ = target;
        for (std::size_t z = 0; z < section.zones.size(); ++z) {
            const double w = convex_width(section.zones[z].polygon);
            if (w < target) sized_.push_back({section.zones[z].polygon, 0.5 * w});
        }
        for (const auto& r : regions) {
            if (!(r.size > 0.0)) throw ValidationError("refinement region size must be > 0");
            sized_.push_back({r.polygon, r.size});
        }
        for (const auto& s : sized_) min_size_ = std::min(min_size_, s.size);
        min_seg_len_ = min_size_ / std::exp2(opt.max_halvings);
        cos_limit_ = std::cos(opt.min_angle_deg * std::numbers::pi / 180.0);
    }

    Mesh run() {
        init_super();
        std::vector<int> ids;
        for (const auto& p : graph_.vertices) {
            const int id = insert(to_lattice(p), last_tri_, true);
            if (id < 0) throw MeshError("duplicate input vertex after lattice rounding");
            ids.push_back(id);
        }
        assign_segments(ids);
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) tri_queue_.push_back(t);
        refine();
        return extract();
    }

private:
    // ---- lattice ---------------------------------------------------------------------------
    IPoint to_lattice(Point p) const {
        return {std::llround((p.x - origin_.x) * scale_), std::llround((p.y - origin_.y) * scale_)};
    }
    Point to_metres(const IPoint& p) const {
        return {origin_.x + static_cast<double>(p.x) / scale_, origin_.y + static_cast<double>(p.y) / scale_};
    }

    void init_super() {
        const std::int64_t big = std::int64_t{1} << 38;
        verts_ = {{-big, -big}, {2 * big, -big}, {-big, 2 * big}};
        metres_ = {to_metres(verts_[0]), to_metres(verts_[1]), to_metres(verts_[2])};
        input_ = {0, 0, 0};
        vert_tri_ = {0, 0, 0};
        tris_.push_back({{0, 1, 2}, {-1, -1, -1}, true});
        zone_cache_.push_back(-2);
        last_tri_ = 0;
    }

    bool is_super(int v) const { return v < 3; }

    // ---- point location and insertion -------------------------------------------------------
    int locate(const IPoint& p, int start) const {
        int t = start;
        if (t < 0 || !tris_[t].alive) t = last_tri_;
        if (!tris_[t].alive) {
            for (t = static_cast<int>(tris_.size()) - 1; t >= 0 && !tris_[t].alive; --t) {}
        }
        std::size_t steps = 0;
        int rot = 0;
        while (true) {
            const Tri& tr = tris_[t];
            bool moved = false;
            for (int k = 0; k < 3; ++k) {
                const int i = (k + rot) % 3;
                const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
                if (orient(verts_[a], verts_[b], p) < 0) {
                    if (tr.n[i] < 0) return -1;
                    t = tr.n[i];
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
            rot = (rot + 1) % 3;
            if (++steps > 4 * tris_.size() + 100) throw MeshError("point location did not terminate");
        }
    }

    /// Triangles whose circumcircle strictly contains p, grown from the containing triangle.
    std::vector<int> cavity(const IPoint& p, int t0) {
        ++stamp_;
        if (mark_.size() < tris_.size()) mark_.resize(tris_.size(), 0);
        std::vector<int> cav{t0};
        mark_[t0] = stamp_;
        for (std::size_t k = 0; k < cav.size(); ++k) {
            const Tri& tr = tris_[cav[k]];
            for (int i = 0; i < 3; ++i) {
                const int nb = tr.n[i];
                if (nb < 0 || mark_[nb] == stamp_) continue;
                const Tri& nt = tris_[nb];
                if (incircle(verts_[nt.v[0]], verts_[nt.v[1]], verts_[nt.v[2]], p) > 0) {
                    mark_[nb] = stamp_;
                    cav.push_back(nb);
                }
            }
        }
        return cav;
    }

    /// Returns the new vertex id, or -1 when p coincides with an existing vertex.
    int insert(const IPoint& p, int hint, bool input) {
        const int t0 = locate(p, hint);
        if (t0 < 0) throw MeshError("point outside the triangulation");
        for (int v : tris_[t0].v)
            if (verts_[v] == p) return -1;

        const auto cav = cavity(p, t0);
        const int id = static_cast<int>(verts_.size());
        verts_.push_back(p);
        metres_.push_back(to_metres(p));
        input_.push_back(input ? 1 : 0);
        vert_tri_.push_back(-1);

        struct BEdge {
            int a, b, outside;
        };
        std::vector<BEdge> boundary;
        for (int c : cav) {
            const Tri& tr = tris_[c];
            for (int i = 0; i < 3; ++i) {
                const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
                const int nb = tr.n[i];
                if (nb >= 0 && mark_[nb] == stamp_) {
                    if (a < b && segs_.count(edge_key(a, b))) seg_queue_.push_back(edge_key(a, b));
                    continue;
                }
                if (orient(verts_[a], verts_[b], p) <= 0) throw MeshError("cavity is not star-shaped");
                boundary.push_back({a, b, nb});
            }
        }
        for (int c : cav) tris_[c].alive = false;

        const int first = static_cast<int>(tris_.size());
        for (const auto& e : boundary) {
            Tri nt;
            nt.v = {e.a, e.b, id};
            nt.n = {-1, -1, e.outside};
            const int tid = static_cast<int>(tris_.size());
            if (e.outside >= 0) {
                Tri& o = tris_[e.outside];
                for (int i = 0; i < 3; ++i) {
                    const int oa = o.v[(i + 1) % 3], ob = o.v[(i + 2) % 3];
                    if (oa == e.b && ob == e.a) o.n[i] = tid;
                }
            }
            tris_.push_back(nt);
            zone_cache_.push_back(-2);
            vert_tri_[e.a] = tid;
            vert_tri_[e.b] = tid;
        }
        const int count = static_cast<int>(tris_.size()) - first;
        for (int i = 0; i < count; ++i) {
            Tri& ti = tris_[first + i];
            for (int j = 0; j < count; ++j) {
                if (i == j) continue;
                const Tri& tj = tris_[first + j];
                if (tj.v[0] == ti.v[1]) ti.n[0] = first + j;  // edge (b, p) shared with tri starting at b
                if (tj.v[1] == ti.v[0]) ti.n[1] = first + j;  // edge (p, a) shared with tri ending at a
            }
        }
        vert_tri_[id] = first;
        last_tri_ = first;
        for (int i = 0; i < count; ++i) {
            tri_queue_.push_back(first + i);
            const auto& e = boundary[static_cast<std::size_t>(i)];
            if (segs_.count(edge_key(e.a, e.b))) seg_queue_.push_back(edge_key(e.a, e.b));
        }
        return id;
    }

    // ---- segments -------------------------------------------------------------------------
    void assign_segments(const std::vector<int>& ids) {
        origin_names_.resize(graph_.edges.size());
        for (std::size_t k = 0; k < graph_.edges.size(); ++k) {
            const auto& e = graph_.edges[k];
            SegInfo info;
            info.origin = static_cast<int>(k);
            if (e.exterior() && !section_.boundaries.empty()) info.boundary = boundary_of(e);
            const int a = ids[e.a], b = ids[e.b];
            segs_[edge_key(a, b)] = info;
            seg_queue_.push_back(edge_key(a, b));
            std::string names;
            for (int z : {e.left, e.right})
                if (z >= 0) names += (names.empty() ? "" : "/") + section_.zones[z].name;
            origin_names_[k] = names;
        }
    }

    int boundary_of(const PlanarGraph::Edge& e) const {
        const Point a = graph_.vertices[e.a], b = graph_.vertices[e.b];
        const Point m = 0.5 * (a + b);
        for (std::size_t s = 0; s < section_.boundaries.size(); ++s) {
            const auto& pl = section_.boundaries[s].polyline;
            for (std::size_t i = 0; i + 1 < pl.size(); ++i)
                if (distance_to_segment(m, pl[i], pl[i + 1]) <= 1e-7 && distance_to_segment(a, pl[i], pl[i + 1]) <= 1e-7 &&
                    distance_to_segment(b, pl[i], pl[i + 1]) <= 1e-7)
                    return static_cast<int>(s);
        }
        throw MeshError(fmt::format("exterior edge ({}, {})-({}, {}) is not covered by any boundary segment", a.x,
                                    a.y, b.x, b.y));
    }

    /// Triangle containing edge a-b with b following a in CCW order, or -1.
    int find_edge(int a, int b) const {
        const int start = vert_tri_[a];
        if (start < 0 || !tris_[start].alive) return scan_edge(a, b);
        // walk around a in both directions
        int t = start;
        for (int dir = 0; dir < 2; ++dir) {
            t = start;
            for (std::size_t guard = 0; t >= 0 && guard < 1000; ++guard) {
                const Tri& tr = tris_[t];
                int ia = -1;
                for (int i = 0; i < 3; ++i)
                    if (tr.v[i] == a) ia = i;
                if (ia < 0) break;
                if (tr.v[(ia + 1) % 3] == b) return t;
                // dir 0: rotate across edge (a, v[ia+2]) ; dir 1: across (a, v[ia+1])
                t = dir == 0 ? tr.n[(ia + 1) % 3] : tr.n[(ia + 2) % 3];
                if (t == start) break;
            }
        }
        return scan_edge(a, b);
    }

    int scan_edge(int a, int b) const {
        for (int t = static_cast<int>(tris_.size()) - 1; t >= 0; --t) {
            const Tri& tr = tris_[t];
            if (!tr.alive) continue;
            for (int i = 0; i < 3; ++i)
                if (tr.v[i] == a && tr.v[(i + 1) % 3] == b) return t;
        }
        return -1;
    }

    double size_at(Point p) const {
        double h = target_;
        for (const auto& s : sized_)
            if (s.size < h && contains(s.polygon, p, 1e-9)) h = s.size;
        return h;
    }

    /// Apex vertex of the triangle on the left of a->b, or -1 when the edge is missing.
    int apex(int a, int b) const {
        const int t = find_edge(a, b);
        if (t < 0) return -1;
        const Tri& tr = tris_[t];
        for (int v : tr.v)
            if (v != a && v != b) return v;
        return -1;
    }

    bool needs_split(int a, int b) const {
        const int l = apex(a, b), r = apex(b, a);
        if (l < 0 || r < 0) return true;  // missing from the triangulation
        if (detail::diametral_sign(verts_[a], verts_[b], verts_[l]) <= 0) return true;
        if (detail::diametral_sign(verts_[a], verts_[b], verts_[r]) <= 0) return true;
        const Point pa = metres_[a], pb = metres_[b];
        return distance(pa, pb) > size_at(0.5 * (pa + pb)) * (1.0 + 1e-9);
    }

    void split_segment(int a, int b) {
        const SegInfo info = segs_.at(edge_key(a, b));
        const Point pa = metres_[a], pb = metres_[b];
        const double len = distance(pa, pb);
        if (len < 2.0 * min_seg_len_)
            throw MeshError(fmt::format("zone '{}' is thinner than the achievable resolution after {} refinement rounds",
                                        origin_names_[info.origin], opt_.max_halvings));
        double t = 0.5;
        if (input_[a] != input_[b]) {
            // concentric shells around input vertices keep small input angles from cascading
            const double d = std::exp2(std::round(std::log2(0.5 * len)));
            t = input_[a] ? d / len : 1.0 - d / len;
        }
        const IPoint ia = verts_[a], ib = verts_[b];
        const IPoint m{ia.x + std::llround(t * static_cast<double>(ib.x - ia.x)),
                       ia.y + std::llround(t * static_cast<double>(ib.y - ia.y))};
        if (m == ia || m == ib) throw MeshError("segment split collapsed onto an endpoint");
        segs_.erase(edge_key(a, b));
        const int id = insert(m, vert_tri_[a], false);
        if (id < 0) throw MeshError("segment split point coincides with an existing vertex");
        segs_[edge_key(a, id)] = info;
        segs_[edge_key(id, b)] = info;
        seg_queue_.push_back(edge_key(a, id));
        seg_queue_.push_back(edge_key(id, b));
    }

    // ---- triangles ------------------------------------------------------------------------
    int zone_of(int t) {
        int& z = zone_cache_[t];
        if (z != -2) return z;
        const Tri& tr = tris_[t];
        z = -1;
        for (int v : tr.v)
            if (is_super(v)) return z;
        const Point c = (1.0 / 3.0) * (metres_[tr.v[0]] + metres_[tr.v[1]] + metres_[tr.v[2]]);
        for (std::size_t k = 0; k < section_.zones.size(); ++k)
            if (contains(section_.zones[k].polygon, c, 0.0)) {
                z = static_cast<int>(k);
                break;
            }
        return z;
    }

    bool is_bad(int t) {
        if (zone_of(t) < 0) return false;
        const Tri& tr = tris_[t];
        const Point p[3] = {metres_[tr.v[0]], metres_[tr.v[1]], metres_[tr.v[2]]};
        double longest = 0.0;
        for (int i = 0; i < 3; ++i) {
            const Point u = p[(i + 1) % 3] - p[i], w = p[(i + 2) % 3] - p[i];
            const double c = dot(u, w) / (norm(u) * norm(w));
            if (c > cos_limit_) return true;
            longest = std::max(longest, norm(u));
        }
        const Point c = (1.0 / 3.0) * (p[0] + p[1] + p[2]);
        return longest > size_at(c) * (1.0 + 1e-9);
    }

    IPoint circumcenter(int t) const {
        const Tri& tr = tris_[t];
        const IPoint& a = verts_[tr.v[0]];
        const double bx = double(verts_[tr.v[1]].x - a.x), by = double(verts_[tr.v[1]].y - a.y);
        const double cx = double(verts_[tr.v[2]].x - a.x), cy = double(verts_[tr.v[2]].y - a.y);
        const double d = 2.0 * (bx * cy - by * cx);
        const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
        const double ux = (cy * b2 - by * c2) / d, uy = (bx * c2 - cx * b2) / d;
        return {a.x + std::llround(ux), a.y + std::llround(uy)};
    }

    void refine() {
        std::size_t skipped = 0;
        while (true) {
            while (!seg_queue_.empty()) {
                const std::uint64_t key = seg_queue_.front();
                seg_queue_.pop_front();
                if (!segs_.count(key)) continue;
                const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
                if (needs_split(a, b)) split_segment(a, b);
                check_budget();
            }
            if (tri_queue_.empty()) break;
            const int t = tri_queue_.front();
            tri_queue_.pop_front();
            if (!tris_[t].alive || !is_bad(t)) continue;

            const IPoint c = circumcenter(t);
            const int host = locate(c, t);
            if (host < 0) {
                ++skipped;
                continue;
            }
            const auto cav = cavity(c, host);
            std::vector<std::uint64_t> hit;
            for (int ct : cav) {
                const Tri& tr = tris_[ct];
                for (int i = 0; i < 3; ++i) {
                    const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
                    const auto key = edge_key(a, b);
                    if (segs_.count(key) && detail::diametral_sign(verts_[a], verts_[b], c) <= 0) hit.push_back(key);
                }
            }
            if (!hit.empty()) {
                for (auto k : hit) seg_queue_.push_back(k);
                tri_queue_.push_back(t);
                // force the split even when the segment is not otherwise encroached
                for (auto k : hit) {
                    if (!segs_.count(k)) continue;
                    split_segment(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
                }
                check_budget();
                continue;
            }
            bool inside = false;
            const Point cm = to_metres(c);
            for (const auto& z : section_.zones)
                if (contains(z.polygon, cm, 0.0)) {
                    inside = true;
                    break;
                }
            if (!inside) {
                ++skipped;
                continue;
            }
            if (insert(c, host, false) < 0) ++skipped;
            check_budget();
        }
        (void)skipped;
    }

    void check_budget() const {
        if (verts_.size() > opt_.max_vertices)
            throw MeshError(fmt::format("mesh refinement exceeded {} vertices", opt_.max_vertices));
    }

    Mesh extract() {
        Mesh m;
        m.target_size = target_;
        std::vector<int> node_of(verts_.size(), -1);
        std::vector<int> elem_of(tris_.size(), -1);
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            if (!tris_[t].alive) continue;
            const int z = zone_of(t);
            if (z < 0) continue;
            elem_of[t] = static_cast<int>(m.elements.size());
            m.elements.push_back({tris_[t].v, z});
        }
        // number nodes by vertex id for a layout independent of triangle order
        for (const auto& e : m.elements)
            for (int v : e.nodes) node_of[v] = 0;
        for (std::size_t v = 0; v < verts_.size(); ++v)
            if (node_of[v] == 0) {
                node_of[v] = static_cast<int>(m.nodes.size());
                m.nodes.push_back(metres_[v]);
            }
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            if (elem_of[t] < 0) continue;
            const Tri& tr = tris_[t];
            for (int i = 0; i < 3; ++i) {
                const int nb = tr.n[i];
                if (nb >= 0 && elem_of[nb] >= 0) {
                    if (m.elements[elem_of[nb]].zone != m.elements[elem_of[t]].zone) {
                        const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
                        if (!segs_.count(edge_key(a, b))) throw MeshError("zone interface is not a union of mesh edges");
                    }
                    continue;
                }
                const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
                auto it = segs_.find(edge_key(a, b));
                if (it == segs_.end()) throw MeshError("domain boundary is not a union of mesh edges");
                m.boundary_edges.push_back({{node_of[a], node_of[b]}, it->second.boundary});
            }
        }
        for (auto& e : m.elements)
            for (int& v : e.nodes) v = node_of[v];
        for (std::size_t z = 0; z < section_.zones.size(); ++z) {
            if (std::none_of(m.elements.begin(), m.elements.end(),
                             [&](const Element& e) { return e.zone == static_cast<int>(z); }))
                throw MeshError("zone '" + section_.zones[z].name + "' received no elements");
        }
        return m;
    }

    const DamSection& section_;
    double target_;
    MeshOptions opt_;
    PlanarGraph graph_;
    Point origin_;
    double scale_ = 1.0;
    double min_size_ = 0.0;
    double min_seg_len_ = 0.0;
    double cos_limit_ = 1.0;
    std::vector<SizeZone> sized_;

    std::vector<IPoint> verts_;
    std::vector<Point> metres_;
    std::vector<char> input_;
    std::vector<int> vert_tri_;
    std::vector<Tri> tris_;
    std::vector<int> zone_cache_;
    std::vector<unsigned> mark_;
    unsigned stamp_ = 0;
    int last_tri_ = 0;
    std::unordered_map<std::uint64_t, SegInfo> segs_;
    std::vector<std::string> origin_names_;
    std::deque<std::uint64_t> seg_queue_;
    std::deque<int> tri_queue_;
};

}  // namespace

Mesh triangulate(const DamSection& section, double target_size, std::span<const RefinementRegion> regions,
                 const MeshOptions& options) {
    if (!(target_size > 0.0)) throw ValidationError("target mesh size must be > 0");
    if (options.min_angle_deg < 15.0 || options.min_angle_deg > 30.0)
        throw ValidationError("minimum angle must lie in [15, 30] degrees");
    if (section.zones.empty()) throw ValidationError("section has no zones");
    Refiner r(section, target_size, regions, options);
    return r.run();
}

QualityReport mesh_quality(const Mesh& mesh) {
    QualityReport q;
    q.element_count = mesh.elements.size();
    q.min_angle_deg = 180.0;
    q.max_aspect = 0.0;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto p = mesh.element_points(e);
        const double a = distance(p[1], p[2]), b = distance(p[2], p[0]), c = distance(p[0], p[1]);
        auto angle = [](double opp, double s1, double s2) {
            return std::acos(std::clamp((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2), -1.0, 1.0));
        };
        const double deg = 180.0 / std::numbers::pi;
        q.min_angle_deg = std::min({q.min_angle_deg, angle(a, b, c) * deg, angle(b, c, a) * deg, angle(c, a, b) * deg});
        const double area2 = std::abs(cross(p[1] - p[0], p[2] - p[0]));
        const double circum = a * b * c / (2.0 * area2);
        const double in = area2 / (a + b + c);
        q.max_aspect = std::max(q.max_aspect, circum / (2.0 * in));
    }
    if (mesh.elements.empty()) q.min_angle_deg = 0.0;
    return q;
}

void write_mesh_text(const Mesh& mesh, std::ostream& os) {
    for (const auto& p : mesh.nodes) os << fmt::format("N {:.17g} {:.17g}\n", p.x, p.y);
    for (const auto& e : mesh.elements)
        os << fmt::format("E {} {} {} {}\n", e.nodes[0], e.nodes[1], e.nodes[2], e.zone);
}

}  // namespace damseep
