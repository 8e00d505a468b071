#include "damseep/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "damseep/error.hpp"

namespace damseep {

using json = nlohmann::json;

namespace {

/// Object reader that remembers which keys were consumed, so leftovers can be reported.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where()));
    }

    const json* find(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, double def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number()) throw ConfigError(fmt::format("{}: expected a number", at(key)));
        const double d = v->get<double>();
        if (!std::isfinite(d)) throw ConfigError(fmt::format("{}: must be finite", at(key)));
        return d;
    }
    int integer(const std::string& key, int def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", at(key)));
        return v->get<int>();
    }
    bool boolean(const std::string& key, bool def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", at(key)));
        return v->get<bool>();
    }
    std::string string(const std::string& key, std::string def) {
        const json* v = find(key);
        if (!v) return def;
        if (!v->is_string()) throw ConfigError(fmt::format("{}: expected a string", at(key)));
        return v->get<std::string>();
    }
    std::optional<double> optional_number(const std::string& key, std::optional<double> def) {
        const json* v = find(key);
        if (!v) return def;
        if (v->is_null()) return std::nullopt;
        return number(key, 0.0);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(fmt::format("{}: unknown key", at(k)));
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

MaterialProperties parse_material(const json& j, const std::string& path, const MaterialProperties* base) {
    Reader r(j, path);
    MaterialProperties m = base ? *base : MaterialProperties{};
    m.name = r.string("name", base ? base->name : "");
    if (m.name.empty()) throw ConfigError(fmt::format("{}: material needs a name", r.at("name")));
    if (const json* k = r.find("k")) {
        if (!k->is_string())
            throw ConfigError(fmt::format("{}: permeability needs a unit, e.g. \"1e-4 cm/s\"", r.at("k")));
        try {
            m.permeability = Permeability::parse(k->get<std::string>());
        } catch (const ValidationError& e) {
            throw ConfigError(fmt::format("{}: {}", r.at("k"), e.what()));
        }
    } else if (!base) {
        throw ConfigError(fmt::format("{}: missing permeability", r.at("k")));
    }
    m.strength.unit_weight = r.number("unit_weight", m.strength.unit_weight);
    m.strength.friction_angle = r.number("friction_angle", m.strength.friction_angle);
    m.strength.cohesion = r.number("cohesion", m.strength.cohesion);
    r.finish();
    try {
        m.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return m;
}

using MaterialTable = std::map<std::string, MaterialProperties>;

const MaterialProperties& material_ref(Reader& r, const MaterialTable& table, const std::string& def) {
    const std::string id = r.string("material", def);
    const auto it = table.find(id);
    if (it == table.end()) throw ConfigError(fmt::format("{}: unknown material '{}'", r.at("material"), id));
    return it->second;
}

/// Applies one `interventions` object onto `iv`; a null value removes an inherited entry.
void parse_interventions(const json& j, const std::string& path, const MaterialTable& mats, Interventions& iv) {
    Reader r(j, path);
    auto section = [&](const char* key, auto& slot, auto&& fill) {
        const json* v = r.find(key);
        if (!v) return;
        if (v->is_null()) {
            slot.reset();
            return;
        }
        Reader sub(*v, r.at(key));
        slot.emplace();
        fill(sub, *slot);
        sub.finish();
    };
    auto wall = [&](Reader& s, CutoffWall& w) {
        w.depth = s.number("depth", w.depth);
        w.thickness = s.number("thickness", w.thickness);
        w.offset = s.number("offset", w.offset);
        w.material = material_ref(s, mats, "core");
    };
    section("cutoff_under_core", iv.cutoff_under_core, wall);
    section("cutoff_upstream_heel", iv.cutoff_upstream_heel, wall);
    section("concrete_cover", iv.concrete_cover, [&](Reader& s, ConcreteCover& c) {
        c.thickness = s.number("thickness", c.thickness);
        c.plinth_depth = s.number("plinth_depth", c.plinth_depth);
        c.plinth_width = s.number("plinth_width", c.plinth_width);
        c.material = material_ref(s, mats, "concrete_cover");
    });
    section("clay_blanket", iv.clay_blanket, [&](Reader& s, ClayBlanket& c) {
        c.thickness = s.number("thickness", c.thickness);
        c.length = s.number("length", c.length);
        c.material = material_ref(s, mats, "core");
    });
    section("core_blanket", iv.core_blanket, [&](Reader& s, CoreBlanket& c) {
        c.thickness = s.number("thickness", c.thickness);
        c.length = s.number("length", c.length);
        c.material = material_ref(s, mats, "core");
    });
    section("blanket_drain", iv.blanket_drain, [&](Reader& s, DrainSpec& d) {
        d.depth = s.number("depth", 3.0);
        d.material = material_ref(s, mats, "drain");
    });
    section("claw_drain", iv.claw_drain, [&](Reader& s, DrainSpec& d) {
        d.depth = s.number("depth", 10.0);
        d.width = s.number("width", d.width);
        d.material = material_ref(s, mats, "drain");
    });
    if (const json* v = r.find("foundation_depth_override")) {
        if (v->is_null()) iv.foundation_depth_override.reset();
        else iv.foundation_depth_override = r.number("foundation_depth_override", 0.0);
    }
    r.finish();
}

void parse_section(const json& j, SahandParams& p) {
    Reader r(j, "section");
    p.bed_elevation = r.number("bed_elevation", p.bed_elevation);
    p.height_from_bed = r.number("height_from_bed", p.height_from_bed);
    p.crest_elevation = r.number("crest_elevation", p.bed_elevation + p.height_from_bed);
    p.crest_width = r.number("crest_width", p.crest_width);
    p.upstream_slope = r.number("upstream_slope", p.upstream_slope);
    p.downstream_slope = r.number("downstream_slope", p.downstream_slope);
    p.core_top_width = r.number("core_top_width", p.core_top_width);
    p.core_slope = r.number("core_slope", p.core_slope);
    p.filter_width = r.number("filter_width", p.filter_width);
    p.drain_width = r.number("drain_width", p.drain_width);
    p.chimney_freeboard = r.number("chimney_freeboard", p.chimney_freeboard);
    p.waste_thickness = r.number("waste_thickness", p.waste_thickness);
    p.foundation_depth = r.number("foundation_depth", p.foundation_depth);
    p.domain_width = r.number("domain_width", p.domain_width);
    p.upstream_reach = r.number("upstream_reach", p.upstream_reach);
    p.crest_length = r.number("crest_length", p.crest_length);
    p.reservoir_level = r.number("reservoir_level", p.reservoir_level);
    p.tailwater_level = r.optional_number("tailwater_level", p.tailwater_level);
    r.finish();
}

json material_json(const MaterialProperties& m) {
    return {{"name", m.name},
            {"k", m.permeability.to_string()},
            {"unit_weight", m.strength.unit_weight},
            {"friction_angle", m.strength.friction_angle},
            {"cohesion", m.strength.cohesion}};
}

}  // namespace

DamSection RunConfig::build_section() const { return build_sahand_section(section); }

const Scenario& RunConfig::scenario(std::string_view name) const {
    for (const auto& s : scenarios)
        if (s.name == name) return s;
    throw ConfigError(fmt::format("no scenario named '{}'", name));
}

std::vector<PiezometerRecord> RunConfig::piezometer_records(const DamSection& sec) const {
    std::vector<PiezometerRecord> out;
    for (const auto& p : piezometers)
        out.push_back({p.name, {sec.layout.axis_x + p.axis_offset, p.elevation}, 0.0, p.datum_offset});
    return out;
}

RunConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    Reader r(root, "");
    RunConfig c;
    r.find("$schema");
    r.find("description");

    if (const json* s = r.find("section")) parse_section(*s, c.section);

    for (MaterialRole role : kAllRoles) c.materials[std::string(role_key(role))] = sahand_material(role);
    c.materials["concrete_cover"] = default_concrete_cover();
    if (const json* m = r.find("materials")) {
        Reader mr(*m, "materials");
        for (const auto& [id, val] : m->items()) {
            mr.find(id);
            const auto it = c.materials.find(id);
            c.materials[id] = parse_material(val, "materials." + id, it == c.materials.end() ? nullptr : &it->second);
        }
    }
    c.section.materials.clear();
    for (MaterialRole role : kAllRoles) c.section.materials.push_back(c.materials.at(std::string(role_key(role))));

    Interventions common;
    if (const json* ci = r.find("common_interventions")) parse_interventions(*ci, "common_interventions", c.materials, common);

    std::set<std::string> names;
    if (const json* list = r.find("scenarios")) {
        if (!list->is_array()) throw ConfigError("scenarios: expected an array");
        for (std::size_t i = 0; i < list->size(); ++i) {
            const std::string path = fmt::format("scenarios[{}]", i);
            Reader sr((*list)[i], path);
            Scenario s;
            s.name = sr.string("name", "");
            if (s.name.empty()) throw ConfigError(path + ".name: scenario needs a name");
            if (!names.insert(s.name).second) throw ConfigError(fmt::format("{}.name: duplicate scenario '{}'", path, s.name));
            s.reservoir_level = sr.number("reservoir_level", c.section.reservoir_level);
            s.tailwater_level = sr.optional_number("tailwater_level", c.section.tailwater_level);
            if (sr.boolean("inherit_common", true)) s.interventions = common;
            if (const json* iv = sr.find("interventions")) parse_interventions(*iv, path + ".interventions", c.materials, s.interventions);
            sr.finish();
            c.scenarios.push_back(std::move(s));
        }
    }
    if (c.scenarios.empty()) {
        Scenario s;
        s.reservoir_level = c.section.reservoir_level;
        s.tailwater_level = c.section.tailwater_level;
        s.interventions = common;
        c.scenarios.push_back(s);
    }
    c.baseline = r.string("baseline", c.scenarios.front().name);
    if (!names.empty() && !names.count(c.baseline))
        throw ConfigError(fmt::format("baseline: unknown scenario '{}'", c.baseline));

    if (const json* s = r.find("solver")) {
        Reader sr(*s, "solver");
        auto& st = c.solver;
        st.relax = sr.number("relax", st.relax);
        st.tol_head = sr.number("tol_head", st.tol_head);
        st.max_outer_iters = sr.integer("max_outer_iters", st.max_outer_iters);
        st.kr_min = sr.number("kr_min", st.kr_min);
        st.p_transition = sr.number("p_transition", st.p_transition);
        st.linear_tol = sr.number("linear_tol", st.linear_tol);
        st.max_linear_iters = sr.integer("max_linear_iters", st.max_linear_iters);
        sr.finish();
    }
    try {
        c.solver.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(fmt::format("solver: {}", e.what()));
    }
    if (const json* m = r.find("mesh")) {
        Reader mr(*m, "mesh");
        c.mesh.target_size = mr.number("target_size", c.mesh.target_size);
        c.mesh.min_angle = mr.number("min_angle", c.mesh.min_angle);
        mr.finish();
    }
    if (!(c.mesh.target_size > 0)) throw ConfigError("mesh.target_size: must be > 0");
    if (c.mesh.min_angle < 15.0 || c.mesh.min_angle > 30.0) throw ConfigError("mesh.min_angle: must lie in [15, 30]");
    c.output_dir = r.string("output_dir", c.output_dir.string());

    if (const json* list = r.find("piezometers")) {
        if (!list->is_array()) throw ConfigError("piezometers: expected an array");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < list->size(); ++i) {
            const std::string path = fmt::format("piezometers[{}]", i);
            Reader pr((*list)[i], path);
            PiezometerSpec p;
            p.name = pr.string("name", "");
            if (p.name.empty()) throw ConfigError(path + ".name: piezometer needs a name");
            if (!seen.insert(p.name).second) throw ConfigError(fmt::format("{}.name: duplicate '{}'", path, p.name));
            if (!pr.find("axis_offset") || !pr.find("elevation"))
                throw ConfigError(path + ": axis_offset and elevation are required");
            p.axis_offset = pr.number("axis_offset", 0.0);
            p.elevation = pr.number("elevation", 0.0);
            p.datum_offset = pr.number("datum_offset", 0.0);
            pr.finish();
            c.piezometers.push_back(p);
        }
    }

    c.calibration.parameters = {{c.materials.at("foundation").name, -9.0, -2.0}};
    if (const json* cal = r.find("calibration")) {
        Reader cr(*cal, "calibration");
        if (const json* list = cr.find("parameters")) {
            if (!list->is_array() || list->empty()) throw ConfigError("calibration.parameters: expected a non-empty array");
            c.calibration.parameters.clear();
            for (std::size_t i = 0; i < list->size(); ++i) {
                Reader pr((*list)[i], fmt::format("calibration.parameters[{}]", i));
                FreeParameter p;
                p.material = material_ref(pr, c.materials, "").name;
                p.lower = pr.number("lower", p.lower);
                p.upper = pr.number("upper", p.upper);
                pr.finish();
                if (!(p.lower < p.upper)) throw ConfigError(pr.at("lower") + ": lower must be below upper");
                c.calibration.parameters.push_back(p);
            }
        }
        c.calibration.fit_datum = cr.boolean("fit_datum", c.calibration.fit_datum);
        c.calibration.budget = cr.integer("budget", c.calibration.budget);
        c.calibration.mesh_size = cr.number("mesh_size", c.calibration.mesh_size);
        cr.finish();
    }
    if (const json* s = r.find("screening")) {
        Reader sr(*s, "screening");
        auto& t = c.screening;
        t.min_correlation = sr.number("min_correlation", t.min_correlation);
        t.min_variance = sr.number("min_variance", t.min_variance);
        const int n = sr.integer("min_samples", static_cast<int>(t.min_samples));
        if (n < 2) throw ConfigError("screening.min_samples: must be >= 2");
        t.min_samples = static_cast<std::size_t>(n);
        sr.finish();
    }
    if (const json* s = r.find("report")) {
        Reader rr(*s, "report");
        c.report.anomaly_ratio = rr.number("anomaly_ratio", c.report.anomaly_ratio);
        c.report.yellow_lps = rr.number("yellow_lps", c.report.yellow_lps);
        c.report.red_lps = rr.number("red_lps", c.report.red_lps);
        rr.finish();
    }
    r.finish();

    // geometry and scenarios are checked up front so a sweep never starts on a broken config
    DamSection sec;
    try {
        sec = c.build_section();
    } catch (const Error& e) {
        throw ConfigError(fmt::format("section: {}", e.what()));
    }
    for (const auto& s : c.scenarios) {
        try {
            validate_scenario(s, sec);
        } catch (const Error& e) {
            throw ConfigError(fmt::format("scenario '{}': {}", s.name, e.what()));
        }
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string echo_config(const RunConfig& c) {
    const auto& p = c.section;
    json sec = {{"bed_elevation", p.bed_elevation},   {"height_from_bed", p.height_from_bed},
                {"crest_elevation", p.crest_elevation}, {"crest_width", p.crest_width},
                {"upstream_slope", p.upstream_slope}, {"downstream_slope", p.downstream_slope},
                {"core_top_width", p.core_top_width}, {"core_slope", p.core_slope},
                {"filter_width", p.filter_width},     {"drain_width", p.drain_width},
                {"chimney_freeboard", p.chimney_freeboard}, {"waste_thickness", p.waste_thickness},
                {"foundation_depth", p.foundation_depth}, {"domain_width", p.domain_width},
                {"upstream_reach", p.upstream_reach}, {"crest_length", p.crest_length},
                {"reservoir_level", p.reservoir_level},
                {"tailwater_level", p.tailwater_level ? json(*p.tailwater_level) : json(nullptr)}};
    json mats = json::object();
    for (const auto& [id, m] : c.materials) mats[id] = material_json(m);

    auto id_of = [&](const MaterialProperties& m) {
        for (const auto& [id, mm] : c.materials)
            if (mm == m) return id;
        return m.name;
    };
    json scen = json::array();
    for (const auto& s : c.scenarios) {
        const auto& iv = s.interventions;
        json ij = json::object();
        auto wall = [&](const CutoffWall& w) {
            return json{{"depth", w.depth}, {"thickness", w.thickness}, {"offset", w.offset}, {"material", id_of(w.material)}};
        };
        if (iv.cutoff_under_core) ij["cutoff_under_core"] = wall(*iv.cutoff_under_core);
        if (iv.cutoff_upstream_heel) ij["cutoff_upstream_heel"] = wall(*iv.cutoff_upstream_heel);
        if (const auto& v = iv.concrete_cover)
            ij["concrete_cover"] = {{"thickness", v->thickness}, {"plinth_depth", v->plinth_depth},
                                    {"plinth_width", v->plinth_width}, {"material", id_of(v->material)}};
        if (const auto& v = iv.clay_blanket)
            ij["clay_blanket"] = {{"thickness", v->thickness}, {"length", v->length}, {"material", id_of(v->material)}};
        if (const auto& v = iv.core_blanket)
            ij["core_blanket"] = {{"thickness", v->thickness}, {"length", v->length}, {"material", id_of(v->material)}};
        if (const auto& v = iv.blanket_drain) ij["blanket_drain"] = {{"depth", v->depth}, {"material", id_of(v->material)}};
        if (const auto& v = iv.claw_drain)
            ij["claw_drain"] = {{"depth", v->depth}, {"width", v->width}, {"material", id_of(v->material)}};
        if (iv.foundation_depth_override) ij["foundation_depth_override"] = *iv.foundation_depth_override;
        scen.push_back({{"name", s.name},
                        {"reservoir_level", s.reservoir_level},
                        {"tailwater_level", s.tailwater_level ? json(*s.tailwater_level) : json(nullptr)},
                        {"inherit_common", false},
                        {"interventions", ij}});
    }
    json piez = json::array();
    for (const auto& pz : c.piezometers)
        piez.push_back({{"name", pz.name}, {"axis_offset", pz.axis_offset}, {"elevation", pz.elevation},
                        {"datum_offset", pz.datum_offset}});
    json params = json::array();
    for (const auto& fp : c.calibration.parameters) {
        std::string id = fp.material;
        for (const auto& [mid, m] : c.materials)
            if (m.name == fp.material) {
                id = mid;
                break;
            }
        params.push_back({{"material", id}, {"lower", fp.lower}, {"upper", fp.upper}});
    }
    const auto& st = c.solver;
    json out = {{"section", sec},
                {"materials", mats},
                {"scenarios", scen},
                {"baseline", c.baseline},
                {"solver",
                 {{"relax", st.relax},
                  {"tol_head", st.tol_head},
                  {"max_outer_iters", st.max_outer_iters},
                  {"kr_min", st.kr_min},
                  {"p_transition", st.p_transition},
                  {"linear_tol", st.linear_tol},
                  {"max_linear_iters", st.max_linear_iters}}},
                {"mesh", {{"target_size", c.mesh.target_size}, {"min_angle", c.mesh.min_angle}}},
                {"output_dir", c.output_dir.string()},
                {"piezometers", piez},
                {"calibration",
                 {{"parameters", params},
                  {"fit_datum", c.calibration.fit_datum},
                  {"budget", c.calibration.budget},
                  {"mesh_size", c.calibration.mesh_size}}},
                {"screening",
                 {{"min_correlation", c.screening.min_correlation},
                  {"min_variance", c.screening.min_variance},
                  {"min_samples", c.screening.min_samples}}},
                {"report",
                 {{"anomaly_ratio", c.report.anomaly_ratio},
                  {"yellow_lps", c.report.yellow_lps},
                  {"red_lps", c.report.red_lps}}}};
    return out.dump(2) + "\n";
}

std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace damseep
