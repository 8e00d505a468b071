#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace damseep {

enum class PermeabilityUnit { CentimetrePerSecond, MetrePerSecond };

/// Saturated hydraulic conductivity, remembered in the unit it was entered in.
///
/// Text form is `<number> <unit>` with unit `cm/s` or `m/s`. Serialization uses
/// a canonical scientific form without exponent padding, so "1e-1 cm/s" survives a
/// parse/serialize round trip unchanged and "0.1 cm/s" normalizes to it.
class Permeability {
public:
    Permeability() = default;
    Permeability(double value, PermeabilityUnit unit);

    static Permeability parse(std::string_view text);
    static Permeability metres_per_second(double v) { return {v, PermeabilityUnit::MetrePerSecond}; }
    static Permeability centimetres_per_second(double v) { return {v, PermeabilityUnit::CentimetrePerSecond}; }

    double m_per_s() const noexcept { return si_; }
    double value() const noexcept { return value_; }
    PermeabilityUnit unit() const noexcept { return unit_; }
    std::string to_string() const;

    friend bool operator==(const Permeability&, const Permeability&) = default;

private:
    double value_ = 1.0;
    PermeabilityUnit unit_ = PermeabilityUnit::MetrePerSecond;
    double si_ = 1.0;
};

/// Shortest round-trip scientific form: 1e-1, 2.5e0, 9.7e-6.
std::string format_scientific(double v);

/// Strength parameters carried for reporting only; seepage code never reads them.
struct StrengthMetadata {
    double unit_weight = 0.0;     // kN/m3
    double friction_angle = 0.0;  // degrees
    double cohesion = 0.0;        // kN/m2

    friend bool operator==(const StrengthMetadata&, const StrengthMetadata&) = default;
};

struct MaterialProperties {
    std::string name;
    Permeability permeability;
    StrengthMetadata strength;

    double k_sat() const noexcept { return permeability.m_per_s(); }

    /// Throws ValidationError unless 0 < k_sat <= 1 m/s and metadata is non-negative.
    void validate() const;

    friend bool operator==(const MaterialProperties&, const MaterialProperties&) = default;
};

/// Material roles of the zoned embankment builder.
enum class MaterialRole { UpstreamShell, DownstreamShell, Core, Foundation, Filter, Drain, Waste };

std::string_view role_key(MaterialRole role);
inline constexpr MaterialRole kAllRoles[] = {MaterialRole::UpstreamShell, MaterialRole::DownstreamShell,
                                             MaterialRole::Core,          MaterialRole::Foundation,
                                             MaterialRole::Filter,        MaterialRole::Drain,
                                             MaterialRole::Waste};

/// Sahand material table (K in cm/s, unit weight, friction angle, cohesion).
MaterialProperties sahand_material(MaterialRole role);

/// Low-permeability concrete facing used by the cover intervention (1e-5 cm/s).
MaterialProperties default_concrete_cover();

}  // namespace damseep
