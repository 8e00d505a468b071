#include "damseep/section.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "damseep/error.hpp"
#include "damseep/planar_graph.hpp"

namespace damseep {

namespace {

constexpr double kWeldTol = 1e-7;
constexpr double kLevelTol = 1e-6;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

/// Snaps vertices of different zones that lie within `tol` of each other to one representative.
void weld_zones(std::vector<Zone>& zones, double tol) {
    std::vector<Point> reps;
    for (auto& z : zones) {
        for (auto& p : z.polygon) {
            auto it = std::find_if(reps.begin(), reps.end(), [&](const Point& r) {
                return std::abs(r.x - p.x) <= tol && std::abs(r.y - p.y) <= tol;
            });
            if (it == reps.end())
                reps.push_back(p);
            else
                p = *it;
        }
        z.polygon = cleanup(std::move(z.polygon), 1e-12);
    }
    std::erase_if(zones, [](const Zone& z) { return z.polygon.size() < 3; });
}

HalfPlane at_least_y(double y) { return {{0.0, -1.0}, -y}; }
HalfPlane at_most_y(double y) { return {{0.0, 1.0}, y}; }

struct Shape {
    std::string name;
    Polygon polygon;
    MaterialProperties material;
    int tier = 0;  // higher tiers are carved later and win overlaps with lower tiers
};

Polygon clip_all(Polygon p, std::initializer_list<HalfPlane> hs) {
    for (const auto& h : hs) p = clip(p, h);
    return p;
}

std::vector<Shape> intervention_shapes(const DamSection& s, const Interventions& iv) {
    const DamLayout& L = s.layout;
    const double bed = s.bed_elevation, crest = s.crest_elevation;
    const Point up_toe{L.upstream_toe_x, bed};
    const Point up_top{L.axis_x - 0.5 * L.crest_width, crest};
    const Point dn_toe{L.downstream_toe_x, bed};
    const Point dn_top{L.axis_x + 0.5 * L.crest_width, crest};
    const HalfPlane inside_upstream_face = HalfPlane::left_of(up_top, up_toe);
    const HalfPlane inside_downstream_face = HalfPlane::left_of(dn_toe, dn_top);
    const Point core_up_bot{L.core_upstream_x(bed, crest), bed};
    const Point core_up_top{L.core_upstream_x(crest, crest), crest};
    const HalfPlane upstream_of_core = HalfPlane::left_of(core_up_bot, core_up_top);
    const double drain_out_bed = L.core_downstream_x(bed, crest) + L.filter_width + L.drain_width;
    const Point drain_out_bot{drain_out_bed, bed};
    const Point drain_out_top{L.core_downstream_x(L.chimney_top, crest) + L.filter_width + L.drain_width,
                              L.chimney_top};
    const HalfPlane downstream_of_drain = HalfPlane::left_of(drain_out_top, drain_out_bot);

    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) throw ValidationError(std::string(what) + " must be > 0");
    };

    std::vector<Shape> out;
    if (iv.blanket_drain) {
        positive(iv.blanket_drain->depth, "blanket drain depth");
        out.push_back({"Blanket drain",
                       clip_all(rectangle(drain_out_bed - 1.0, bed, L.downstream_toe_x + 1.0, bed + iv.blanket_drain->depth),
                                {downstream_of_drain, inside_downstream_face}),
                       iv.blanket_drain->material, 0});
    }
    if (iv.claw_drain) {
        positive(iv.claw_drain->depth, "claw drain depth");
        positive(iv.claw_drain->width, "claw drain width");
        const double hw = 0.5 * iv.claw_drain->width;
        out.push_back({"Claw drain",
                       rectangle(L.downstream_toe_x - hw, bed - iv.claw_drain->depth, L.downstream_toe_x + hw, bed),
                       iv.claw_drain->material, 0});
    }
    if (iv.core_blanket) {
        positive(iv.core_blanket->thickness, "core blanket thickness");
        const double x_core = core_up_bot.x;
        double x0 = x_core - iv.core_blanket->length;
        if (iv.core_blanket->length <= 0.0 || x0 <= L.upstream_toe_x) x0 = L.upstream_toe_x - 1.0;
        out.push_back({"Core blanket",
                       clip_all(rectangle(x0, bed, L.axis_x, bed + iv.core_blanket->thickness),
                                {upstream_of_core, inside_upstream_face}),
                       iv.core_blanket->material, 1});
    }
    if (iv.clay_blanket) {
        positive(iv.clay_blanket->thickness, "clay blanket thickness");
        positive(iv.clay_blanket->length, "clay blanket length");
        out.push_back({"Clay blanket",
                       rectangle(L.upstream_toe_x - iv.clay_blanket->length, bed - iv.clay_blanket->thickness,
                                 L.upstream_toe_x, bed),
                       iv.clay_blanket->material, 1});
    }
    if (iv.cutoff_under_core) {
        const auto& w = *iv.cutoff_under_core;
        positive(w.depth, "cutoff depth");
        positive(w.thickness, "cutoff thickness");
        out.push_back({"Cutoff under core",
                       rectangle(L.axis_x - 0.5 * w.thickness, bed - w.depth, L.axis_x + 0.5 * w.thickness, bed),
                       w.material, 2});
    }
    if (iv.cutoff_upstream_heel) {
        const auto& w = *iv.cutoff_upstream_heel;
        positive(w.depth, "cutoff depth");
        positive(w.thickness, "cutoff thickness");
        if (w.offset < 0.0) throw ValidationError("heel cutoff offset must be >= 0");
        const double x0 = L.upstream_toe_x + w.offset;
        out.push_back({"Cutoff at upstream heel",
                       clip_all(rectangle(x0, bed - w.depth, x0 + w.thickness, crest), {inside_upstream_face}),
                       w.material, 2});
    }
    if (iv.concrete_cover) {
        const double t = iv.concrete_cover->thickness;
        positive(t, "cover thickness");
        const Point along = (1.0 / distance(up_toe, up_top)) * (up_top - up_toe);
        const Point inward{along.y, -along.x};
        const Point a = up_toe - 10.0 * along, b = up_top + 10.0 * along;
        Polygon band = cleanup({a, b, b + t * inward, a + t * inward});
        out.push_back({"Concrete cover", clip_all(band, {at_least_y(bed), at_most_y(crest)}),
                       iv.concrete_cover->material, 3});
        // toe plinth keying the slab into the foundation
        const auto& cv = *iv.concrete_cover;
        if (cv.plinth_depth < 0.0 || cv.plinth_width < 0.0) throw ValidationError("plinth dimensions must be >= 0");
        if (cv.plinth_depth > 0.0 && cv.plinth_width > 0.0)
            out.push_back({"Concrete cover plinth",
                           rectangle(L.upstream_toe_x, bed - cv.plinth_depth, L.upstream_toe_x + cv.plinth_width, bed),
                           cv.material, 3});
    }
    for (auto& s : out) {
        s.polygon = cleanup(std::move(s.polygon));
        if (s.polygon.size() < 3) throw GeometryError(s.name + " has no area inside the section");
    }
    return out;
}

void add_material(DamSection& s, const MaterialProperties& m) {
    m.validate();
    if (const auto* existing = s.find_material(m.name)) {
        if (!(*existing == m))
            throw ConflictError("material '" + m.name + "' already defined with different properties");
        return;
    }
    s.materials.push_back(m);
}

void override_foundation_depth(DamSection& s, double depth) {
    if (!(depth > 0.0)) throw ValidationError("foundation depth override must be > 0");
    const double old_bottom = s.bottom_elevation();
    const double new_bottom = s.bed_elevation - depth;
    for (auto& z : s.zones) {
        bool touches = false;
        for (auto& p : z.polygon)
            if (std::abs(p.y - old_bottom) <= kWeldTol) {
                p.y = new_bottom;
                touches = true;
            }
        if (!touches) continue;
        for (const auto& p : z.polygon)
            if (p.y != new_bottom && p.y <= new_bottom)
                throw GeometryError("foundation depth " + std::to_string(depth) + " m cuts through zone '" +
                                    z.name + "'");
        if (!(signed_area(z.polygon) > 0.0) || !is_convex(z.polygon))
            throw GeometryError("foundation depth override degenerates zone '" + z.name + "'");
    }
    s.foundation_depth = depth;
}

}  // namespace

const MaterialProperties* DamSection::find_material(const std::string& name) const {
    for (const auto& m : materials)
        if (m.name == name) return &m;
    return nullptr;
}

const MaterialProperties& DamSection::material_of(const Zone& zone) const {
    if (const auto* m = find_material(zone.material)) return *m;
    throw ConfigError("zone '" + zone.name + "' references unknown material '" + zone.material + "'");
}

bool Interventions::empty() const {
    return !cutoff_under_core && !cutoff_upstream_heel && !concrete_cover && !clay_blanket && !core_blanket &&
           !blanket_drain && !claw_drain && !foundation_depth_override;
}

DamSection build_sahand_section(const SahandParams& p) {
    require(p.bed_elevation >= 1560.0, "bed elevation must be >= 1560 m a.s.l.");
    require(p.crest_elevation > p.bed_elevation, "crest elevation must be above the bed");
    require(std::abs(p.crest_elevation - p.bed_elevation - p.height_from_bed) <= 1e-9,
            "crest - bed must equal the dam height from bed (" + std::to_string(p.height_from_bed) + " m)");
    require(p.foundation_depth > 0.0, "foundation depth must be > 0");
    require(p.crest_width > 0 && p.upstream_slope > 0 && p.downstream_slope > 0 && p.core_top_width > 0 &&
                p.core_slope >= 0 && p.filter_width > 0 && p.drain_width > 0 && p.waste_thickness > 0 &&
                p.chimney_freeboard >= 0 && p.crest_length > 0,
            "section dimensions must be positive");
    require(p.upstream_reach > 0.0, "upstream reach must be > 0");

    const double bed = p.bed_elevation, crest = p.crest_elevation, H = crest - bed;
    DamLayout L;
    L.x_min = 0.0;
    L.x_max = p.domain_width;
    L.upstream_toe_x = p.upstream_reach;
    L.axis_x = L.upstream_toe_x + H * p.upstream_slope + 0.5 * p.crest_width;
    L.downstream_toe_x = L.axis_x + 0.5 * p.crest_width + H * p.downstream_slope;
    L.crest_width = p.crest_width;
    L.upstream_slope = p.upstream_slope;
    L.downstream_slope = p.downstream_slope;
    L.core_top_width = p.core_top_width;
    L.core_slope = p.core_slope;
    L.filter_width = p.filter_width;
    L.drain_width = p.drain_width;
    L.chimney_top = crest - p.chimney_freeboard;
    L.waste_thickness = p.waste_thickness;

    require(L.downstream_toe_x < p.domain_width, "domain width too small for the dam base");
    require(p.core_top_width <= p.crest_width, "core top wider than the crest");
    const double yw = bed + p.waste_thickness, yt = L.chimney_top;
    require(yt > yw, "filter/drain bands must rise above the waste layer");
    const double band = p.filter_width + p.drain_width;
    require(L.core_downstream_x(yt, crest) + band < L.downstream_face_x(yt, bed),
            "filter/drain bands outcrop through the downstream face");
    require(L.core_upstream_x(yw, crest) > L.upstream_face_x(yw, bed), "core outcrops through the upstream face");

    DamSection s;
    s.crest_elevation = crest;
    s.bed_elevation = bed;
    s.foundation_depth = p.foundation_depth;
    s.crest_length = p.crest_length;
    s.domain_width = p.domain_width;
    s.layout = L;

    if (!p.materials.empty() && p.materials.size() != std::size(kAllRoles))
        throw ValidationError("material list must have one entry per zone role");
    auto mat = [&](MaterialRole r) {
        return p.materials.empty() ? sahand_material(r) : p.materials[static_cast<std::size_t>(r)];
    };
    for (auto r : kAllRoles) add_material(s, mat(r));
    auto zone = [&](std::string name, MaterialRole r, Polygon poly) {
        s.zones.push_back({std::move(name), cleanup(std::move(poly)), mat(r).name});
    };

    const double cu_bed = L.core_upstream_x(bed, crest), cd_bed = L.core_downstream_x(bed, crest);
    const double cu_top = L.core_upstream_x(crest, crest), cd_top = L.core_downstream_x(crest, crest);
    const double crest_l = L.axis_x - 0.5 * p.crest_width, crest_r = L.axis_x + 0.5 * p.crest_width;
    auto core_d = [&](double y) { return L.core_downstream_x(y, crest); };

    zone("Stone foundation", MaterialRole::Foundation,
         rectangle(L.x_min, bed - p.foundation_depth, L.x_max, bed));
    zone("Upstream waste", MaterialRole::Waste,
         {{L.upstream_toe_x, bed}, {cu_bed, bed}, {L.core_upstream_x(yw, crest), yw}, {L.upstream_face_x(yw, bed), yw}});
    zone("Upstream shell", MaterialRole::UpstreamShell,
         {{L.upstream_face_x(yw, bed), yw}, {L.core_upstream_x(yw, crest), yw}, {cu_top, crest}, {crest_l, crest}});
    zone("Core", MaterialRole::Core, {{cu_bed, bed}, {cd_bed, bed}, {cd_top, crest}, {cu_top, crest}});
    zone("Filter", MaterialRole::Filter,
         {{cd_bed, bed}, {cd_bed + p.filter_width, bed}, {core_d(yt) + p.filter_width, yt}, {core_d(yt), yt}});
    zone("Chimney drain", MaterialRole::Drain,
         {{cd_bed + p.filter_width, bed},
          {cd_bed + band, bed},
          {core_d(yt) + band, yt},
          {core_d(yt) + p.filter_width, yt}});
    zone("Downstream waste", MaterialRole::Waste,
         {{cd_bed + band, bed}, {L.downstream_toe_x, bed}, {L.downstream_face_x(yw, bed), yw}, {core_d(yw) + band, yw}});
    zone("Downstream shell", MaterialRole::DownstreamShell,
         {{core_d(yw) + band, yw}, {L.downstream_face_x(yw, bed), yw}, {L.downstream_face_x(yt, bed), yt}, {core_d(yt) + band, yt}});
    zone("Downstream shell crest", MaterialRole::DownstreamShell,
         {{core_d(yt), yt}, {L.downstream_face_x(yt, bed), yt}, {crest_r, crest}, {cd_top, crest}});

    weld_zones(s.zones, kWeldTol);
    Scenario levels;
    levels.reservoir_level = p.reservoir_level;
    levels.tailwater_level = p.tailwater_level;
    s.boundaries = boundary_conditions_for(s, levels);
    return s;
}

void validate_scenario(const Scenario& sc, const DamSection& s) {
    if (!std::isfinite(sc.reservoir_level)) throw ValidationError("reservoir level must be finite");
    if (sc.reservoir_level > s.crest_elevation + kLevelTol)
        throw ValidationError("reservoir level " + std::to_string(sc.reservoir_level) + " above the crest");
    if (sc.tailwater_level && *sc.tailwater_level > sc.reservoir_level + kLevelTol)
        throw ValidationError("tailwater level above the reservoir level");
}

DamSection apply_scenario(const DamSection& section, const Scenario& scenario) {
    validate_scenario(scenario, section);
    DamSection out = section;
    const auto& iv = scenario.interventions;
    if (iv.foundation_depth_override) override_foundation_depth(out, *iv.foundation_depth_override);

    auto shapes = intervention_shapes(out, iv);
    for (std::size_t i = 0; i < shapes.size(); ++i)
        for (std::size_t j = i + 1; j < shapes.size(); ++j) {
            if (shapes[i].tier != shapes[j].tier) continue;
            const double ov = area(intersect_convex(shapes[i].polygon, shapes[j].polygon));
            if (ov > 1e-9 * std::min(area(shapes[i].polygon), area(shapes[j].polygon)))
                throw ConflictError(shapes[i].name + " overlaps " + shapes[j].name);
        }
    std::stable_sort(shapes.begin(), shapes.end(), [](const Shape& a, const Shape& b) { return a.tier < b.tier; });

    for (const auto& shape : shapes) {
        const double shape_area = area(shape.polygon);
        double covered = 0.0;
        for (const auto& z : out.zones) covered += area(intersect_convex(z.polygon, shape.polygon));
        if (std::abs(covered - shape_area) > 1e-7 * shape_area)
            throw GeometryError(shape.name + " extends outside the model domain");
        add_material(out, shape.material);
        std::vector<Zone> next;
        for (auto& z : out.zones) {
            if (area(intersect_convex(z.polygon, shape.polygon)) <= 1e-9 * shape_area) {
                next.push_back(std::move(z));
                continue;
            }
            for (auto& piece : subtract_convex(z.polygon, shape.polygon, 1e-8))
                next.push_back({z.name, std::move(piece), z.material});
        }
        next.push_back({shape.name, shape.polygon, shape.material.name});
        out.zones = std::move(next);
        weld_zones(out.zones, kWeldTol);
    }
    out.boundaries = boundary_conditions_for(out, scenario);
    return out;
}

namespace {

struct EdgeClass {
    BoundarySide side;
    BoundaryCondition bc;
    bool operator==(const EdgeClass&) const = default;
};

}  // namespace

std::vector<BoundarySegment> boundary_conditions_for(const DamSection& s, const Scenario& scenario) {
    const double bottom = s.bottom_elevation();
    const double reservoir = scenario.reservoir_level;
    const double tail = scenario.tailwater_level.value_or(s.bed_elevation);
    if (reservoir < bottom - kLevelTol)
        throw ValidationError("reservoir level " + std::to_string(reservoir) + " below the model bottom");
    if (reservoir > s.crest_elevation + kLevelTol) throw ValidationError("reservoir level above the crest");

    const PlanarGraph g = build_planar_graph(s.zones, {}, kWeldTol);
    const auto loop = g.exterior_loop();
    double x_min = g.vertices.front().x, x_max = x_min;
    for (const auto& v : g.vertices) {
        x_min = std::min(x_min, v.x);
        x_max = std::max(x_max, v.x);
    }

    std::vector<Point> pts;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Point a = g.vertices[loop[i]], b = g.vertices[loop[(i + 1) % loop.size()]];
        pts.push_back(a);
        std::vector<double> ts;
        for (double level : {reservoir, tail})
            if ((a.y - level) * (b.y - level) < 0.0) ts.push_back((level - a.y) / (b.y - a.y));
        std::sort(ts.begin(), ts.end());
        for (double t : ts) pts.push_back(a + t * (b - a));
    }

    auto classify = [&](Point a, Point b) -> EdgeClass {
        auto near = [](double u, double v) { return std::abs(u - v) <= kLevelTol; };
        if ((near(a.x, x_min) && near(b.x, x_min)) || (near(a.x, x_max) && near(b.x, x_max)))
            return {BoundarySide::Lateral, BoundaryCondition::impermeable()};
        if (near(a.y, bottom) && near(b.y, bottom)) return {BoundarySide::Base, BoundaryCondition::impermeable()};
        if (near(a.y, s.crest_elevation) && near(b.y, s.crest_elevation))
            return {BoundarySide::Crest, BoundaryCondition::impermeable()};
        const double ymax = std::max(a.y, b.y);
        if (0.5 * (a.x + b.x) < s.layout.axis_x) {
            if (ymax <= reservoir + kLevelTol) return {BoundarySide::Upstream, BoundaryCondition::fixed_head(reservoir)};
            return {BoundarySide::Upstream, BoundaryCondition::impermeable()};
        }
        if (ymax <= tail + kLevelTol) return {BoundarySide::Downstream, BoundaryCondition::fixed_head(tail)};
        return {BoundarySide::Downstream, BoundaryCondition::seepage_face()};
    };

    const std::size_t n = pts.size();
    std::vector<EdgeClass> cls(n);
    for (std::size_t i = 0; i < n; ++i) cls[i] = classify(pts[i], pts[(i + 1) % n]);
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!(cls[i] == cls[(i + n - 1) % n])) {
            start = i;
            break;
        }

    std::vector<BoundarySegment> segs;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (start + k) % n;
        if (segs.empty() || !(cls[i] == cls[(i + n - 1) % n])) {
            segs.push_back({{pts[i]}, cls[i].bc, cls[i].side});
        }
        segs.back().polyline.push_back(pts[(i + 1) % n]);
    }
    return segs;
}

double hull_area(const DamSection& s) {
    const PlanarGraph g = build_planar_graph(s.zones, {}, kWeldTol);
    double twice = 0.0;
    for (const auto& e : g.edges) {
        if (!e.exterior()) continue;
        Point a = g.vertices[e.a], b = g.vertices[e.b];
        if (e.left < 0) std::swap(a, b);
        twice += cross(a, b);
    }
    return 0.5 * twice;
}

double zone_area_sum(const DamSection& s) {
    double sum = 0.0;
    for (const auto& z : s.zones) sum += area(z.polygon);
    return sum;
}

double max_zone_overlap(const DamSection& s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.zones.size(); ++i)
        for (std::size_t j = i + 1; j < s.zones.size(); ++j)
            worst = std::max(worst, area(intersect_convex(s.zones[i].polygon, s.zones[j].polygon)));
    return worst;
}

namespace {

std::pair<Point, Point> ordered(Point a, Point b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

std::vector<std::pair<Point, Point>> exterior_edge_set(const DamSection& s) {
    std::vector<Point> extra;
    for (const auto& b : s.boundaries) extra.insert(extra.end(), b.polyline.begin(), b.polyline.end());
    const PlanarGraph g = build_planar_graph(s.zones, extra, kWeldTol);
    std::vector<std::pair<Point, Point>> out;
    for (const auto& e : g.edges)
        if (e.exterior()) out.push_back(ordered(g.vertices[e.a], g.vertices[e.b]));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<Point, Point>> boundary_edge_set(const DamSection& s) {
    std::vector<Point> extra;
    for (const auto& b : s.boundaries) extra.insert(extra.end(), b.polyline.begin(), b.polyline.end());
    // weld polyline points onto the same representatives the planar graph uses
    const PlanarGraph g = build_planar_graph(s.zones, extra, kWeldTol);
    auto rep = [&](Point p) {
        for (const auto& v : g.vertices)
            if (std::abs(v.x - p.x) <= kWeldTol && std::abs(v.y - p.y) <= kWeldTol) return v;
        return p;
    };
    std::vector<std::pair<Point, Point>> out;
    for (const auto& b : s.boundaries)
        for (std::size_t i = 0; i + 1 < b.polyline.size(); ++i)
            out.push_back(ordered(rep(b.polyline[i]), rep(b.polyline[i + 1])));
    std::sort(out.begin(), out.end());
    return out;
}

std::string to_string(BoundarySide side) {
    switch (side) {
        case BoundarySide::Upstream: return "upstream";
        case BoundarySide::Downstream: return "downstream";
        case BoundarySide::Crest: return "crest";
        case BoundarySide::Base: return "base";
        case BoundarySide::Lateral: return "lateral";
    }
    return "";
}

std::string to_string(BoundaryCondition::Kind kind) {
    switch (kind) {
        case BoundaryCondition::Kind::FixedHead: return "fixed_head";
        case BoundaryCondition::Kind::Impermeable: return "impermeable";
        case BoundaryCondition::Kind::SeepageFace: return "seepage_face";
    }
    return "";
}

}  // namespace damseep
