#pragma once

#include <optional>
#include <string>
#include <vector>

#include "damseep/geometry2d.hpp"
#include "damseep/materials.hpp"

namespace damseep {

/// One material region of the cross-section. Polygons produced by this library are
/// convex and counter-clockwise; several zones may share a material.
struct Zone {
    std::string name;
    Polygon polygon;
    std::string material;

    friend bool operator==(const Zone&, const Zone&) = default;
};

struct BoundaryCondition {
    enum class Kind { FixedHead, Impermeable, SeepageFace };

    Kind kind = Kind::Impermeable;
    double head = 0.0;  // total head, m a.s.l.; meaningful for FixedHead only

    static BoundaryCondition fixed_head(double h) { return {Kind::FixedHead, h}; }
    static BoundaryCondition impermeable() { return {Kind::Impermeable, 0.0}; }
    static BoundaryCondition seepage_face() { return {Kind::SeepageFace, 0.0}; }

    friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;
};

enum class BoundarySide { Upstream, Downstream, Crest, Base, Lateral };

struct BoundarySegment {
    std::vector<Point> polyline;
    BoundaryCondition condition;
    BoundarySide side = BoundarySide::Lateral;

    friend bool operator==(const BoundarySegment&, const BoundarySegment&) = default;
};

/// Reference positions of the embankment used to place interventions.
struct DamLayout {
    double x_min = 0.0;
    double x_max = 0.0;
    double axis_x = 0.0;
    double upstream_toe_x = 0.0;
    double downstream_toe_x = 0.0;
    double crest_width = 0.0;
    double upstream_slope = 0.0;    // horizontal per unit vertical
    double downstream_slope = 0.0;
    double core_top_width = 0.0;
    double core_slope = 0.0;
    double filter_width = 0.0;
    double drain_width = 0.0;
    double chimney_top = 0.0;       // elevation where filter/drain bands stop
    double waste_thickness = 0.0;

    double upstream_face_x(double y, double bed) const { return upstream_toe_x + (y - bed) * upstream_slope; }
    double downstream_face_x(double y, double bed) const { return downstream_toe_x - (y - bed) * downstream_slope; }
    double core_upstream_x(double y, double crest) const { return axis_x - 0.5 * core_top_width - (crest - y) * core_slope; }
    double core_downstream_x(double y, double crest) const { return axis_x + 0.5 * core_top_width + (crest - y) * core_slope; }

    friend bool operator==(const DamLayout&, const DamLayout&) = default;
};

struct DamSection {
    std::vector<MaterialProperties> materials;
    std::vector<Zone> zones;
    std::vector<BoundarySegment> boundaries;
    double crest_elevation = 0.0;
    double bed_elevation = 0.0;
    double foundation_depth = 0.0;
    double crest_length = 450.0;
    double domain_width = 0.0;
    DamLayout layout;

    double bottom_elevation() const { return bed_elevation - foundation_depth; }

    /// Throws ConfigError when the zone references an unknown material.
    const MaterialProperties& material_of(const Zone& zone) const;
    const MaterialProperties* find_material(const std::string& name) const;

    friend bool operator==(const DamSection&, const DamSection&) = default;
};

struct CutoffWall {
    double depth = 30.0;       // below bed, m
    double thickness = 2.0;
    MaterialProperties material;
    double offset = 20.0;      // heel wall only: horizontal distance from the upstream toe into the shell

    friend bool operator==(const CutoffWall&, const CutoffWall&) = default;
};

struct ConcreteCover {
    double thickness = 0.5;
    MaterialProperties material;
    double plinth_depth = 1.0;  // toe beam below the bed; 0 disables
    double plinth_width = 1.0;
    friend bool operator==(const ConcreteCover&, const ConcreteCover&) = default;
};

struct ClayBlanket {
    double thickness = 1.0;
    double length = 200.0;
    MaterialProperties material;
    friend bool operator==(const ClayBlanket&, const ClayBlanket&) = default;
};

/// Core material layer laid under the upstream shell, running upstream from the
/// core base. A length of zero (or longer than available) reaches the upstream toe.
struct CoreBlanket {
    double thickness = 3.0;
    double length = 0.0;
    MaterialProperties material;
    friend bool operator==(const CoreBlanket&, const CoreBlanket&) = default;
};

struct DrainSpec {
    double depth = 3.0;
    MaterialProperties material;
    double width = 5.0;  // claw drain only
    friend bool operator==(const DrainSpec&, const DrainSpec&) = default;
};

struct Interventions {
    std::optional<CutoffWall> cutoff_under_core;
    std::optional<CutoffWall> cutoff_upstream_heel;
    std::optional<ConcreteCover> concrete_cover;
    std::optional<ClayBlanket> clay_blanket;
    std::optional<CoreBlanket> core_blanket;
    std::optional<DrainSpec> blanket_drain;
    std::optional<DrainSpec> claw_drain;
    std::optional<double> foundation_depth_override;

    bool empty() const;
    friend bool operator==(const Interventions&, const Interventions&) = default;
};

struct Scenario {
    std::string name = "baseline";
    double reservoir_level = 0.0;
    std::optional<double> tailwater_level;  // defaults to the bed elevation
    Interventions interventions;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Geometry of the zoned embankment. Defaults reproduce the Sahand deepest section.
struct SahandParams {
    double bed_elevation = 1560.0;
    double crest_elevation = 1607.0;
    double height_from_bed = 47.0;
    double crest_width = 10.0;
    double upstream_slope = 2.5;
    double downstream_slope = 2.0;
    double core_top_width = 6.0;
    double core_slope = 0.25;
    double filter_width = 2.0;
    double drain_width = 2.0;
    double chimney_freeboard = 3.0;
    double waste_thickness = 3.0;
    double foundation_depth = 60.0;
    double domain_width = 500.0;
    double upstream_reach = 200.0;  // distance from the left model edge to the upstream toe
    double crest_length = 450.0;
    double reservoir_level = 1600.3;
    std::optional<double> tailwater_level;
    std::vector<MaterialProperties> materials;  // indexed by MaterialRole; empty = Sahand table
};

DamSection build_sahand_section(const SahandParams& params);

/// Returns a new section with the scenario's interventions carved in and boundaries
/// recomputed for its water levels. The input is never modified.
DamSection apply_scenario(const DamSection& section, const Scenario& scenario);

std::vector<BoundarySegment> boundary_conditions_for(const DamSection& section, const Scenario& scenario);

void validate_scenario(const Scenario& scenario, const DamSection& section);

/// Area enclosed by the exterior boundary of the zone union.
double hull_area(const DamSection& section);
double zone_area_sum(const DamSection& section);
/// Largest pairwise intersection area between zones.
double max_zone_overlap(const DamSection& section);

/// Undirected exterior edges split at every zone and boundary vertex; sorted.
std::vector<std::pair<Point, Point>> exterior_edge_set(const DamSection& section);
std::vector<std::pair<Point, Point>> boundary_edge_set(const DamSection& section);

std::string to_string(BoundarySide side);
std::string to_string(BoundaryCondition::Kind kind);

}  // namespace damseep
