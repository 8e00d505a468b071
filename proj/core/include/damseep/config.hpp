#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "damseep/calibration.hpp"
#include "damseep/fem.hpp"
#include "damseep/section.hpp"

namespace damseep {

/// A piezometer placed by its offset from the dam axis (negative = upstream).
struct PiezometerSpec {
    std::string name;
    double axis_offset = 0.0;  // m
    double elevation = 0.0;    // m a.s.l.
    double datum_offset = 0.0;

    friend bool operator==(const PiezometerSpec&, const PiezometerSpec&) = default;
};

struct CalibrationSpec {
    std::vector<FreeParameter> parameters;  // material names, resolved from config ids
    bool fit_datum = true;
    int budget = 200;
    double mesh_size = 8.0;
};

struct ReportSpec {
    double anomaly_ratio = 2.0;   // observed / model discharge above this flags a leakage anomaly
    double yellow_lps = 4.4;      // discharge alert bands, L/s
    double red_lps = 12.7;
};

struct MeshSettings {
    double target_size = 5.0;
    double min_angle = 20.0;
};

struct RunConfig {
    SahandParams section;  // section.materials is filled from the material table roles
    std::map<std::string, MaterialProperties> materials;  // config id -> material
    std::vector<Scenario> scenarios;
    std::string baseline;
    SolverSettings solver;
    MeshSettings mesh;
    std::filesystem::path output_dir = "out";
    std::vector<PiezometerSpec> piezometers;
    CalibrationSpec calibration;
    ScreeningThresholds screening;
    ReportSpec report;

    DamSection build_section() const;
    const Scenario& scenario(std::string_view name) const;  // throws ConfigError
    std::vector<PiezometerRecord> piezometer_records(const DamSection& section) const;
};

/// Strict JSON parse: unknown keys, unit-less permeabilities and dangling material ids
/// raise ConfigError naming the offending path.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// The fully defaulted configuration as pretty-printed JSON.
std::string echo_config(const RunConfig& config);

/// FNV-1a over the given bytes, as 16 hex digits.
std::string content_hash(std::string_view bytes);

}  // namespace damseep
