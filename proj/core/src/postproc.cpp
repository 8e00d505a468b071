#include "damseep/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "damseep/error.hpp"

namespace damseep {

namespace {

constexpr double kBaryTol = 1e-10;

/// Barycentric coordinates of p in element e.
std::array<double, 3> barycentric(const Mesh& m, std::size_t e, Point p) {
    const auto t = m.element_points(e);
    const double a = cross(t[1] - t[0], t[2] - t[0]);
    const double l0 = cross(t[1] - p, t[2] - p) / a;
    const double l1 = cross(t[2] - p, t[0] - p) / a;
    return {l0, l1, 1.0 - l0 - l1};
}

void require_converged(const SeepageSolution& s, const char* what) {
    if (!s.converged) throw NotConvergedError(std::string(what) + " requires a converged solution");
    if (!s.mesh) throw ValidationError("solution has no mesh");
}

}  // namespace

ElementLocator::ElementLocator(const Mesh& mesh) : mesh_(&mesh) {
    if (mesh.nodes.empty()) return;
    double x1 = -std::numeric_limits<double>::infinity(), y1 = x1;
    x0_ = y0_ = std::numeric_limits<double>::infinity();
    for (const auto& p : mesh.nodes) {
        x0_ = std::min(x0_, p.x);
        y0_ = std::min(y0_, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    const double area = std::max((x1 - x0_) * (y1 - y0_), 1e-300);
    cell_ = std::max(std::sqrt(area / std::max<std::size_t>(mesh.elements.size(), 1)) * 2.0, 1e-12);
    nx_ = std::max(1, static_cast<int>(std::ceil((x1 - x0_) / cell_)) + 1);
    ny_ = std::max(1, static_cast<int>(std::ceil((y1 - y0_) / cell_)) + 1);
    buckets_.resize(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_));
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto t = mesh.element_points(e);
        const double ex0 = std::min({t[0].x, t[1].x, t[2].x}), ex1 = std::max({t[0].x, t[1].x, t[2].x});
        const double ey0 = std::min({t[0].y, t[1].y, t[2].y}), ey1 = std::max({t[0].y, t[1].y, t[2].y});
        const int i0 = std::clamp(static_cast<int>((ex0 - x0_) / cell_), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((ex1 - x0_) / cell_), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((ey0 - y0_) / cell_), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((ey1 - y0_) / cell_), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j * nx_ + i)].push_back(static_cast<int>(e));
    }
}

int ElementLocator::find(Point p) const {
    if (buckets_.empty()) return -1;
    const int i = static_cast<int>(std::floor((p.x - x0_) / cell_));
    const int j = static_cast<int>(std::floor((p.y - y0_) / cell_));
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    int best = -1;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int e : buckets_[static_cast<std::size_t>(j * nx_ + i)]) {
        const auto l = barycentric(*mesh_, static_cast<std::size_t>(e), p);
        const double mn = std::min({l[0], l[1], l[2]});
        if (mn >= 0.0) return e;
        if (mn > best_min) {
            best_min = mn;
            best = e;
        }
    }
    return best_min >= -kBaryTol ? best : -1;
}

double probe_head(const SeepageSolution& s, Point p) {
    if (!s.mesh) throw ValidationError("solution has no mesh");
    return probe_head(s, ElementLocator(*s.mesh), p);
}

double probe_head(const SeepageSolution& s, const ElementLocator& loc, Point p) {
    const Mesh& m = *s.mesh;
    const int e = loc.find(p);
    if (e < 0) throw OutOfDomainError(fmt::format("point ({}, {}) lies outside the mesh", p.x, p.y));
    const auto& n = m.elements[static_cast<std::size_t>(e)].nodes;
    for (int v : n)
        if (m.nodes[v] == p) return s.head_field.head[v];
    const auto l = barycentric(m, static_cast<std::size_t>(e), p);
    const auto& h = s.head_field.head;
    return l[0] * h[n[0]] + l[1] * h[n[1]] + l[2] * h[n[2]];
}

DischargeReport make_discharge_report(double q_per_meter, double crest_length, std::string scenario_id) {
    if (!(crest_length > 0.0)) throw ValidationError("crest length must be > 0");
    DischargeReport r;
    r.q_per_meter = q_per_meter;
    r.crest_length = crest_length;
    r.q_total_lps = q_per_meter * (crest_length * 1000.0);  // scale the length first so 5.5e-6 x 450 lands on 2.475
    r.scenario_id = std::move(scenario_id);
    return r;
}

DischargeReport total_discharge(const SeepageSolution& s, const DamSection& section, std::string scenario_id) {
    require_converged(s, "discharge");
    return make_discharge_report(s.inflow(), section.crest_length, std::move(scenario_id));
}

PhreaticLine phreatic_line(const SeepageSolution& s) {
    require_converged(s, "phreatic line");
    const Mesh& m = *s.mesh;
    const auto& p = s.head_field.pressure_head;
    PhreaticLine line;

    // crossing points live on mesh edges; key them by the node pair
    std::map<std::pair<int, int>, int> vid;
    std::vector<Point> verts;
    std::vector<std::vector<int>> adj;
    auto crossing = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = vid.find(key);
        if (it != vid.end()) return it->second;
        const double t = p[a] / (p[a] - p[b]);
        verts.push_back(m.nodes[a] + t * (m.nodes[b] - m.nodes[a]));
        adj.emplace_back();
        const int id = static_cast<int>(verts.size()) - 1;
        vid.emplace(key, id);
        return id;
    };
    for (const auto& el : m.elements) {
        int ends[2], k = 0;
        for (int i = 0; i < 3; ++i) {
            const int a = el.nodes[i], b = el.nodes[(i + 1) % 3];
            if ((p[a] > 0.0) != (p[b] > 0.0)) ends[k++] = crossing(a, b);
        }
        if (k == 2 && ends[0] != ends[1]) {
            adj[ends[0]].push_back(ends[1]);
            adj[ends[1]].push_back(ends[0]);
        }
    }
    if (verts.empty()) {
        line.confined = std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0; });
        return line;
    }

    // connected pieces; keep the one spanning the widest horizontal range
    std::vector<int> comp(verts.size(), -1);
    std::vector<std::vector<int>> members;
    for (std::size_t v = 0; v < verts.size(); ++v) {
        if (comp[v] >= 0) continue;
        const int c = static_cast<int>(members.size());
        members.emplace_back();
        std::vector<int> stack{static_cast<int>(v)};
        comp[v] = c;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            members[c].push_back(u);
            for (int w : adj[u])
                if (comp[w] < 0) {
                    comp[w] = c;
                    stack.push_back(w);
                }
        }
    }
    int best = 0;
    double best_span = -1.0;
    for (std::size_t c = 0; c < members.size(); ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int v : members[c]) {
            lo = std::min(lo, verts[v].x);
            hi = std::max(hi, verts[v].x);
        }
        if (hi - lo > best_span) {
            best_span = hi - lo;
            best = static_cast<int>(c);
        }
    }
    // start from the most upstream end of the path (or the leftmost vertex of a loop)
    int start = -1;
    for (int v : members[best])
        if (adj[v].size() == 1 && (start < 0 || verts[v].x < verts[start].x)) start = v;
    if (start < 0)
        for (int v : members[best])
            if (start < 0 || verts[v].x < verts[start].x) start = v;
    std::vector<int> order{start};
    std::vector<char> seen(verts.size(), 0);
    seen[start] = 1;
    for (int cur = start;;) {
        int next = -1;
        for (int w : adj[cur])
            if (!seen[w]) {
                next = w;
                break;
            }
        if (next < 0) break;
        seen[next] = 1;
        order.push_back(next);
        cur = next;
    }
    for (int v : order)
        if (line.points.empty() || verts[v].x > line.points.back().x) line.points.push_back(verts[v]);
    return line;
}

GradientField gradient_field(const SeepageSolution& s) {
    if (!s.mesh) throw ValidationError("solution has no mesh");
    const Mesh& m = *s.mesh;
    GradientField g;
    g.gradient.resize(m.elements.size());
    g.magnitude.resize(m.elements.size());
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto t = m.element_points(e);
        const auto& n = m.elements[e].nodes;
        const double a2 = cross(t[1] - t[0], t[2] - t[0]);
        double gx = 0.0, gy = 0.0;
        for (int i = 0; i < 3; ++i) {
            const Point& pj = t[(i + 1) % 3];
            const Point& pk = t[(i + 2) % 3];
            gx += (pj.y - pk.y) * s.head_field.head[n[i]];
            gy += (pk.x - pj.x) * s.head_field.head[n[i]];
        }
        g.gradient[e] = {gx / a2, gy / a2};
        g.magnitude[e] = norm(g.gradient[e]);
    }
    return g;
}

ExitGradient exit_gradient(const SeepageSolution& s, const DamSection& section, const GradientField& f) {
    const Mesh& m = *s.mesh;
    std::vector<char> downstream_node(m.nodes.size(), 0);
    std::map<std::pair<int, int>, bool> dedges;
    for (const auto& be : m.boundary_edges) {
        if (be.segment < 0) continue;
        if (section.boundaries.at(static_cast<std::size_t>(be.segment)).side != BoundarySide::Downstream) continue;
        dedges[std::minmax(be.nodes[0], be.nodes[1])] = true;
    }
    ExitGradient best;
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto& n = m.elements[e].nodes;
        bool touches = false;
        for (int i = 0; i < 3 && !touches; ++i) touches = dedges.count(std::minmax(n[i], n[(i + 1) % 3])) > 0;
        if (touches && f.magnitude[e] > best.magnitude) {
            best.magnitude = f.magnitude[e];
            best.element = static_cast<int>(e);
        }
    }
    return best;
}

double exit_elevation(const SeepageSolution& s, const DamSection& section) {
    const Mesh& m = *s.mesh;
    std::vector<char> downstream(m.nodes.size(), 0);
    for (const auto& be : m.boundary_edges)
        if (be.segment >= 0 &&
            section.boundaries.at(static_cast<std::size_t>(be.segment)).side == BoundarySide::Downstream)
            downstream[be.nodes[0]] = downstream[be.nodes[1]] = 1;
    double top = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < s.dirichlet_nodes.size(); ++k) {
        const int v = s.dirichlet_nodes[k];
        if (downstream[v] && s.boundary_flux[k] < 0.0 && !(m.nodes[v].y <= top)) top = m.nodes[v].y;
    }
    return top;
}

double cut_line_discharge(const SeepageSolution& s, double x) {
    if (!s.mesh) throw ValidationError("solution has no mesh");
    const Mesh& m = *s.mesh;
    double q = 0.0;
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto t = m.element_points(e);
        const double lo = std::min({t[0].x, t[1].x, t[2].x}), hi = std::max({t[0].x, t[1].x, t[2].x});
        // half-open so a vertical edge on the cut is counted once
        if (!(lo < x && x <= hi)) continue;
        double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
        for (int i = 0; i < 3; ++i) {
            const Point a = t[i], b = t[(i + 1) % 3];
            if (a.x == x) {
                ymin = std::min(ymin, a.y);
                ymax = std::max(ymax, a.y);
            }
            if ((a.x - x) * (b.x - x) < 0.0) {
                const double y = a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
        if (ymax > ymin) q += s.velocity[e].x * (ymax - ymin);
    }
    return q;
}

}  // namespace damseep
