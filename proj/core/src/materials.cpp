#include "damseep/materials.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <string>

#include "damseep/error.hpp"

namespace damseep {

namespace {

double to_si(double value, PermeabilityUnit unit) {
    return unit == PermeabilityUnit::CentimetrePerSecond ? value / 100.0 : value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

Permeability::Permeability(double value, PermeabilityUnit unit)
    : value_(value), unit_(unit), si_(to_si(value, unit)) {}

Permeability Permeability::parse(std::string_view text) {
    const std::string_view t = trim(text);
    const auto space = t.find_first_of(" \t");
    if (space == std::string_view::npos)
        throw ValidationError("permeability '" + std::string(text) + "' has no unit (expected cm/s or m/s)");
    const std::string_view number = trim(t.substr(0, space));
    const std::string_view unit = trim(t.substr(space));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), v);
    if (ec != std::errc{} || ptr != number.data() + number.size() || !std::isfinite(v))
        throw ValidationError("permeability '" + std::string(text) + "' is not a number");
    if (unit == "cm/s") return {v, PermeabilityUnit::CentimetrePerSecond};
    if (unit == "m/s") return {v, PermeabilityUnit::MetrePerSecond};
    throw ValidationError("permeability unit '" + std::string(unit) + "' not one of cm/s, m/s");
}

std::string format_scientific(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    std::string s(buf, res.ptr);
    const auto e = s.find('e');
    if (e == std::string::npos) return s;
    std::string mant = s.substr(0, e);
    std::string exp = s.substr(e + 1);
    bool neg = false;
    if (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) {
        neg = exp[0] == '-';
        exp.erase(0, 1);
    }
    while (exp.size() > 1 && exp[0] == '0') exp.erase(0, 1);
    return mant + "e" + (neg ? "-" : "") + exp;
}

std::string Permeability::to_string() const {
    return format_scientific(value_) + (unit_ == PermeabilityUnit::CentimetrePerSecond ? " cm/s" : " m/s");
}

void MaterialProperties::validate() const {
    const double k = k_sat();
    if (!(k > 0.0) || k > 1.0)
        throw ValidationError("material '" + name + "': k_sat " + permeability.to_string() +
                              " outside (0, 1] m/s");
    if (strength.unit_weight < 0 || strength.friction_angle < 0 || strength.cohesion < 0)
        throw ValidationError("material '" + name + "': strength metadata must be non-negative");
}

std::string_view role_key(MaterialRole role) {
    switch (role) {
        case MaterialRole::UpstreamShell: return "upstream_shell";
        case MaterialRole::DownstreamShell: return "downstream_shell";
        case MaterialRole::Core: return "core";
        case MaterialRole::Foundation: return "foundation";
        case MaterialRole::Filter: return "filter";
        case MaterialRole::Drain: return "drain";
        case MaterialRole::Waste: return "waste";
    }
    return "";
}

MaterialProperties sahand_material(MaterialRole role) {
    auto cm = [](double v) { return Permeability::centimetres_per_second(v); };
    switch (role) {
        case MaterialRole::UpstreamShell: return {"Upstream shell", cm(1e-1), {20, 35, 30}};
        case MaterialRole::DownstreamShell: return {"Downstream shell", cm(1e-1), {20, 35, 30}};
        case MaterialRole::Core: return {"Core", cm(1e-8), {20, 30, 50}};
        case MaterialRole::Foundation: return {"Stone foundation", cm(1e-4), {21, 35, 0}};
        case MaterialRole::Filter: return {"Filter", cm(1e-2), {18, 35, 0}};
        case MaterialRole::Drain: return {"Drain adjacent to the filter", cm(1), {18, 35, 0}};
        case MaterialRole::Waste: return {"Bottom waste material", cm(1e-2), {19, 30, 0}};
    }
    throw ValidationError("unknown material role");
}

MaterialProperties default_concrete_cover() {
    return {"Concrete cover", Permeability::centimetres_per_second(1e-5), {24, 0, 0}};
}

}  // namespace damseep
