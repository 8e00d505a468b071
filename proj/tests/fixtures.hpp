#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "damseep/materials.hpp"
#include "damseep/mesh.hpp"
#include "damseep/section.hpp"

namespace fixtures {

using namespace damseep;

inline std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(DAMSEEP_SOURCE_DIR) / rel; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::path(DAMSEEP_TEST_TMP) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Homogeneous rectangular dam between two reservoirs; the crest sits above the
// upstream level so the free surface stays inside.
struct DupuitCase {
    double h1 = 10.0, h2 = 2.0, length = 20.0, k = 1e-4, top = 11.0;

    double discharge() const { return k * (h1 * h1 - h2 * h2) / (2.0 * length); }
    double surface_at(double x) const { return std::sqrt(h1 * h1 - (h1 * h1 - h2 * h2) * x / length); }

    DamSection section() const {
        MaterialProperties m;
        m.name = "fill";
        m.permeability = Permeability::metres_per_second(k);
        auto s = section_from_zones({{"dam", rectangle(0, 0, length, top), "fill"}}, {m});
        using BC = BoundaryCondition;
        s.boundaries = {
            {{{0, 0}, {length, 0}}, BC::impermeable(), BoundarySide::Base},
            {{{length, 0}, {length, h2}}, BC::fixed_head(h2), BoundarySide::Downstream},
            {{{length, h2}, {length, top}}, BC::seepage_face(), BoundarySide::Downstream},
            {{{length, top}, {0, top}}, BC::impermeable(), BoundarySide::Crest},
            {{{0, top}, {0, h1}}, BC::impermeable(), BoundarySide::Upstream},
            {{{0, h1}, {0, 0}}, BC::fixed_head(h1), BoundarySide::Upstream},
        };
        return s;
    }
};

// The drains and partial core blanket every Sahand scenario carries.
inline Interventions sahand_common() {
    Interventions iv;
    DrainSpec blanket;
    blanket.depth = 3.0;
    blanket.material = sahand_material(MaterialRole::Drain);
    iv.blanket_drain = blanket;
    DrainSpec claw;
    claw.depth = 10.0;
    claw.width = 5.0;
    claw.material = sahand_material(MaterialRole::Drain);
    iv.claw_drain = claw;
    CoreBlanket cb;
    cb.thickness = 3.0;
    cb.length = 60.0;
    cb.material = sahand_material(MaterialRole::Core);
    iv.core_blanket = cb;
    return iv;
}

inline Scenario sahand_scenario(double level = 1600.3) {
    Scenario sc;
    sc.reservoir_level = level;
    sc.interventions = sahand_common();
    return sc;
}

}  // namespace fixtures
