#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "damseep/error.hpp"
#include "damseep/postproc.hpp"

namespace damseep {

namespace {

void require_converged(const SeepageSolution& s) {
    if (!s.converged) throw NotConvergedError("flow-net export needs a converged solution");
    if (!s.mesh) throw ValidationError("solution carries no mesh");
}

// 17 significant digits round-trips every double through decimal text
std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

void write_vtk(const SeepageSolution& s, std::ostream& os) {
    require_converged(s);
    const Mesh& m = *s.mesh;
    const auto& hf = s.head_field;
    const std::size_t nn = m.nodes.size(), ne = m.elements.size();

    os << "# vtk DataFile Version 3.0\n";
    os << "damseep seepage solution\n";
    os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << nn << " double\n";
    for (const Point& p : m.nodes) os << num(p.x) << ' ' << num(p.y) << " 0\n";
    os << "CELLS " << ne << ' ' << 4 * ne << '\n';
    for (const Element& e : m.elements) os << "3 " << e.nodes[0] << ' ' << e.nodes[1] << ' ' << e.nodes[2] << '\n';
    os << "CELL_TYPES " << ne << '\n';
    for (std::size_t e = 0; e < ne; ++e) os << "5\n";

    os << "POINT_DATA " << nn << '\n';
    os << "SCALARS head double 1\nLOOKUP_TABLE default\n";
    for (double h : hf.head) os << num(h) << '\n';
    os << "SCALARS pressure_head double 1\nLOOKUP_TABLE default\n";
    for (double p : hf.pressure_head) os << num(p) << '\n';

    os << "CELL_DATA " << ne << '\n';
    os << "VECTORS velocity double\n";
    for (std::size_t e = 0; e < ne; ++e) {
        const Point v = e < s.velocity.size() ? s.velocity[e] : Point{};
        os << num(v.x) << ' ' << num(v.y) << " 0\n";
    }
    os << "SCALARS saturation double 1\nLOOKUP_TABLE default\n";
    for (std::size_t e = 0; e < ne; ++e) os << num(e < hf.saturation.size() ? hf.saturation[e] : 1.0) << '\n';
    os << "SCALARS zone int 1\nLOOKUP_TABLE default\n";
    for (const Element& e : m.elements) os << e.zone << '\n';
    if (!os) throw IoError("failed while writing VTK data");
}

VtkData read_vtk(std::istream& is) {
    VtkData d;
    std::string line;
    auto bad = [](const std::string& what) { return IoError("malformed VTK: " + what); };
    if (!std::getline(is, line) || line.rfind("# vtk DataFile Version", 0) != 0) throw bad("missing header");
    std::getline(is, line);  // title
    std::string tok;
    if (!(is >> tok) || tok != "ASCII") throw bad("only ASCII files are supported");

    auto read_doubles = [&](std::size_t n, std::vector<double>& out) {
        out.resize(n);
        for (auto& v : out) {
            if (!(is >> tok)) throw bad("truncated data block");
            try {
                v = std::stod(tok);
            } catch (const std::exception&) {
                throw bad("bad number '" + tok + "'");
            }
        }
    };
    enum class Section { None, Point, Cell } where = Section::None;
    std::size_t n = 0;
    while (is >> tok) {
        if (tok == "DATASET") {
            is >> tok;
            if (tok != "UNSTRUCTURED_GRID") throw bad("dataset " + tok);
        } else if (tok == "POINTS") {
            std::string type;
            is >> n >> type;
            std::vector<double> xyz;
            read_doubles(3 * n, xyz);
            d.points.resize(n);
            for (std::size_t i = 0; i < n; ++i) d.points[i] = {xyz[3 * i], xyz[3 * i + 1]};
        } else if (tok == "CELLS") {
            std::size_t count = 0, size = 0;
            is >> count >> size;
            d.cells.resize(count);
            for (auto& c : d.cells) {
                int k = 0;
                is >> k;
                if (k != 3) throw bad("only triangles are supported");
                is >> c[0] >> c[1] >> c[2];
            }
            if (!is) throw bad("truncated CELLS");
        } else if (tok == "CELL_TYPES") {
            std::size_t count = 0;
            is >> count;
            for (std::size_t i = 0; i < count; ++i) is >> tok;
        } else if (tok == "POINT_DATA") {
            is >> n;
            where = Section::Point;
        } else if (tok == "CELL_DATA") {
            is >> n;
            where = Section::Cell;
        } else if (tok == "SCALARS") {
            std::string name, type, lt, table;
            is >> name >> type;
            // optional component count before LOOKUP_TABLE
            is >> lt;
            if (lt != "LOOKUP_TABLE") is >> lt;
            is >> table;
            std::vector<double> vals;
            read_doubles(n, vals);
            if (where == Section::Point && name == "head") d.head = std::move(vals);
            else if (where == Section::Point && name == "pressure_head") d.pressure_head = std::move(vals);
            else if (where == Section::Cell && name == "saturation") d.saturation = std::move(vals);
        } else if (tok == "VECTORS") {
            std::string name, type;
            is >> name >> type;
            std::vector<double> vals;
            read_doubles(3 * n, vals);
            if (where == Section::Cell && name == "velocity") {
                d.velocity.resize(n);
                for (std::size_t i = 0; i < n; ++i) d.velocity[i] = {vals[3 * i], vals[3 * i + 1]};
            }
        } else {
            throw bad("unexpected keyword '" + tok + "'");
        }
    }
    if (d.points.empty()) throw bad("no POINTS block");
    return d;
}

void write_svg(const SeepageSolution& s, const DamSection& section, std::ostream& os, const FlowNetOptions& opt) {
    require_converged(s);
    const Mesh& m = *s.mesh;
    const auto& head = s.head_field.head;

    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Point& p : m.nodes) {
        x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const double margin = 20.0;
    const double scale = (opt.width_px - 2 * margin) / std::max(x1 - x0, 1e-12);
    const double height = (y1 - y0) * scale + 2 * margin;
    auto X = [&](double x) { return margin + (x - x0) * scale; };
    auto Y = [&](double y) { return margin + (y1 - y) * scale; };
    auto pt = [&](Point p) { return fmt::format("{:.2f},{:.2f}", X(p.x), Y(p.y)); };

    fmt::print(os, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    fmt::print(os,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{:.0f}\" height=\"{:.0f}\" "
               "viewBox=\"0 0 {:.2f} {:.2f}\">\n",
               opt.width_px, height, opt.width_px, height);
    fmt::print(os, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // zones coloured by material
    std::map<std::string, std::size_t> colour_of;
    for (const auto& mat : section.materials) colour_of.emplace(mat.name, colour_of.size());
    fmt::print(os, "<g id=\"zones\" stroke=\"#555\" stroke-width=\"0.5\">\n");
    for (const Zone& z : section.zones) {
        std::string pts;
        for (const Point& p : z.polygon) pts += pt(p) + ' ';
        const auto it = colour_of.find(z.material);
        const std::string fill = opt.palette.empty() ? std::string("#dddddd")
                                 : opt.palette[(it == colour_of.end() ? 0 : it->second) % opt.palette.size()];
        fmt::print(os, "<polygon class=\"zone\" data-name=\"{}\" points=\"{}\" fill=\"{}\"/>\n", z.name, pts, fill);
    }
    fmt::print(os, "</g>\n");

    if (opt.contour_count > 0) {
        const auto [lo, hi] = std::minmax_element(head.begin(), head.end());
        fmt::print(os, "<g id=\"equipotentials\" stroke=\"#1f4e9c\" stroke-width=\"0.8\" fill=\"none\">\n");
        for (int c = 1; c <= opt.contour_count; ++c) {
            const double level = *lo + (*hi - *lo) * c / (opt.contour_count + 1.0);
            std::string d;
            for (const Element& e : m.elements) {
                Point hits[3];
                int nh = 0;
                for (int i = 0; i < 3 && nh < 2; ++i) {
                    const int a = e.nodes[i], b = e.nodes[(i + 1) % 3];
                    const double ha = head[a] - level, hb = head[b] - level;
                    if ((ha < 0) == (hb < 0)) continue;
                    const double t = ha / (ha - hb);
                    hits[nh++] = m.nodes[a] + t * (m.nodes[b] - m.nodes[a]);
                }
                if (nh == 2) d += "M" + pt(hits[0]) + "L" + pt(hits[1]);
            }
            if (!d.empty()) fmt::print(os, "<path class=\"equipotential\" data-head=\"{:.3f}\" d=\"{}\"/>\n", level, d);
        }
        fmt::print(os, "</g>\n");
    }

    const PhreaticLine pl = phreatic_line(s);
    if (!pl.points.empty()) {
        std::string pts;
        for (const Point& p : pl.points) pts += pt(p) + ' ';
        fmt::print(os, "<polyline id=\"phreatic\" points=\"{}\" fill=\"none\" stroke=\"#0077ff\" stroke-width=\"2\"/>\n",
                   pts);
    }

    if (opt.velocity_glyphs && !s.velocity.empty()) {
        // one glyph per cell of a coarse grid, length on a log scale of the flux
        const double cell = std::max((x1 - x0) / 60.0, 1e-9);
        std::map<std::pair<int, int>, std::size_t> pick;
        double vmax = 0.0;
        for (std::size_t e = 0; e < m.elements.size(); ++e) {
            const Point c = m.element_centroid(e);
            const auto key = std::make_pair(static_cast<int>((c.x - x0) / cell), static_cast<int>((c.y - y0) / cell));
            pick.emplace(key, e);
            vmax = std::max(vmax, norm(s.velocity[e]));
        }
        if (vmax > 0.0) {
            fmt::print(os, "<g id=\"velocity\" stroke=\"#b22222\" stroke-width=\"0.8\">\n");
            for (const auto& [key, e] : pick) {
                const double v = norm(s.velocity[e]);
                const double rel = v > 0 ? std::clamp(1.0 + std::log10(v / vmax) / 6.0, 0.0, 1.0) : 0.0;
                if (rel <= 0.0) continue;
                const Point c = m.element_centroid(e);
                const Point tip = c + (0.8 * cell * rel / v) * s.velocity[e];
                fmt::print(os, "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", X(c.x), Y(c.y),
                           X(tip.x), Y(tip.y));
            }
            fmt::print(os, "</g>\n");
        }
    }
    fmt::print(os, "</svg>\n");
    if (!os) throw IoError("failed while writing SVG data");
}

void export_flow_net(const SeepageSolution& s, const DamSection& section, const std::filesystem::path& stem,
                     const FlowNetOptions& opt) {
    auto path_with = [&](const char* ext) {
        auto p = stem;
        p += ext;
        return p;
    };
    const auto vtk = path_with(".vtk"), svg = path_with(".svg");
    {
        std::ofstream f(vtk);
        if (!f) throw IoError("cannot open " + vtk.string() + " for writing");
        write_vtk(s, f);
    }
    {
        std::ofstream f(svg);
        if (!f) throw IoError("cannot open " + svg.string() + " for writing");
        write_svg(s, section, f, opt);
    }
}

}  // namespace damseep
