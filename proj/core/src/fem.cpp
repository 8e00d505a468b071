#include "damseep/fem.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "damseep/error.hpp"

namespace damseep {

void SolverSettings::validate() const {
    if (!(relax > 0.0 && relax <= 1.0)) throw ValidationError("relax must lie in (0, 1]");
    if (!(tol_head > 0.0)) throw ValidationError("tol_head must be > 0");
    if (max_outer_iters < 1) throw ValidationError("max_outer_iters must be >= 1");
    if (!(kr_min > 0.0 && kr_min < 1.0)) throw ValidationError("kr_min must lie in (0, 1)");
    if (!(p_transition > 0.0)) throw ValidationError("p_transition must be > 0");
    if (!(linear_tol > 0.0 && linear_tol < 1.0)) throw ValidationError("linear_tol must lie in (0, 1)");
    if (max_linear_iters < 0) throw ValidationError("max_linear_iters must be >= 0");
}

Eigen::Matrix3d element_conductance(const std::array<Point, 3>& p, double k_sat, double k_r) {
    const double area2 = cross(p[1] - p[0], p[2] - p[0]);
    if (!(area2 > 0.0))
        throw DegenerateElementError(fmt::format("element ({}, {}) ({}, {}) ({}, {}) has non-positive area", p[0].x,
                                                 p[0].y, p[1].x, p[1].y, p[2].x, p[2].y));
    double b[3], c[3];
    for (int i = 0; i < 3; ++i) {
        const Point& pj = p[(i + 1) % 3];
        const Point& pk = p[(i + 2) % 3];
        b[i] = pj.y - pk.y;
        c[i] = pk.x - pj.x;
    }
    const double s = k_sat * k_r / (2.0 * area2);
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = s * (b[i] * b[j] + c[i] * c[j]);
    return m;
}

std::vector<double> element_conductivities(const Mesh& mesh, const DamSection& section) {
    std::vector<double> per_zone(section.zones.size());
    for (std::size_t z = 0; z < section.zones.size(); ++z) {
        const auto* m = section.find_material(section.zones[z].material);
        if (!m)
            throw ConfigError("zone '" + section.zones[z].name + "' references unknown material '" +
                              section.zones[z].material + "'");
        per_zone[z] = m->k_sat();
    }
    std::vector<double> k(mesh.elements.size());
    for (std::size_t e = 0; e < k.size(); ++e) {
        const int z = mesh.elements[e].zone;
        if (z < 0 || static_cast<std::size_t>(z) >= per_zone.size())
            throw ConfigError(fmt::format("element {} carries zone id {} with no material", e, z));
        k[e] = per_zone[z];
    }
    return k;
}

SparseMatrix assemble_matrix(const Mesh& mesh, std::span<const double> k_element, std::span<const double> kr) {
    if (k_element.size() != mesh.elements.size()) throw ValidationError("one conductivity per element required");
    if (!kr.empty() && kr.size() != mesh.elements.size()) throw ValidationError("one k_r per element required");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto ke = element_conductance(mesh.element_points(e), k_element[e], kr.empty() ? 1.0 : kr[e]);
        const auto& n = mesh.elements[e].nodes;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(n[i], n[j], ke(i, j));
    }
    const auto nn = static_cast<Eigen::Index>(mesh.nodes.size());
    SparseMatrix a(nn, nn);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

namespace {

LinearSystem eliminate(SparseMatrix full, const DirichletValues& fixed) {
    LinearSystem s;
    const auto n = static_cast<std::size_t>(full.rows());
    if (fixed.size() != n) throw ValidationError("Dirichlet vector must have one entry per node");
    s.reduced_index.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (!fixed[i]) {
            s.reduced_index[i] = static_cast<int>(s.free_nodes.size());
            s.free_nodes.push_back(static_cast<int>(i));
        }
    const auto m = static_cast<Eigen::Index>(s.free_nodes.size());
    s.rhs = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(full.nonZeros()));
    for (int r : s.free_nodes) {
        const int rr = s.reduced_index[r];
        for (SparseMatrix::InnerIterator it(full, r); it; ++it) {
            const auto c = static_cast<std::size_t>(it.col());
            if (fixed[c])
                s.rhs[rr] -= it.value() * *fixed[c];
            else
                trip.emplace_back(rr, s.reduced_index[c], it.value());
        }
    }
    s.reduced.resize(m, m);
    s.reduced.setFromTriplets(trip.begin(), trip.end());
    s.reduced.makeCompressed();
    s.full = std::move(full);
    s.fixed = fixed;
    return s;
}

}  // namespace

LinearSystem assemble(const Mesh& mesh, std::span<const double> k_element, std::span<const double> kr,
                      const DirichletValues& fixed) {
    return eliminate(assemble_matrix(mesh, k_element, kr), fixed);
}

LinearSolveResult solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol, int max_iters,
                               const Eigen::VectorXd* x0) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n || b.size() != n) throw ValidationError("linear system dimensions disagree");
    LinearSolveResult res;
    res.x = (x0 && x0->size() == n) ? *x0 : Eigen::VectorXd::Zero(n);
    if (n == 0) return res;
    if (max_iters <= 0) max_iters = static_cast<int>(std::max<Eigen::Index>(2000, 2 * n));

    // Symmetric Jacobi scaling first: conductivities span many decades.
    Eigen::VectorXd d = a.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(d[i] > 0.0)) throw SolverError(fmt::format("matrix diagonal entry {} is not positive", i), {});
        d[i] = 1.0 / std::sqrt(d[i]);
    }
    Eigen::SparseMatrix<double> as = d.asDiagonal() * a * d.asDiagonal();
    const Eigen::VectorXd bs = d.cwiseProduct(b);
    Eigen::VectorXd y = res.x.cwiseQuotient(d);

    const double bnorm = b.norm(), bsnorm = bs.norm();
    if (bnorm == 0.0) {
        res.x.setZero();
        res.residual_history.push_back(0.0);
        return res;
    }

    Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic;
    ic.compute(as);
    const bool have_ic = ic.info() == Eigen::Success;

    auto precond = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
        if (have_ic) return ic.solve(r);
        return r;
    };

    Eigen::VectorXd r = bs - as * y;
    auto rel = [&](const Eigen::VectorXd& rs) {
        return std::max(rs.norm() / bsnorm, rs.cwiseQuotient(d).norm() / bnorm);
    };
    double rr = rel(r);
    res.residual_history.push_back(rr);
    if (rr <= rel_tol) return res;

    Eigen::VectorXd z = precond(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    for (int it = 1; it <= max_iters; ++it) {
        const Eigen::VectorXd ap = as * p;
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) break;
        const double alpha = rz / pap;
        y += alpha * p;
        r -= alpha * ap;
        if (it % 50 == 0) r = bs - as * y;  // limit drift of the recursive residual
        rr = rel(r);
        res.residual_history.push_back(rr);
        res.iterations = it;
        if (rr <= rel_tol) {
            const Eigen::VectorXd rt = bs - as * y;
            if (rel(rt) <= rel_tol) {
                res.x = y.cwiseProduct(d);
                return res;
            }
            r = rt;
        }
        z = precond(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw SolverError(fmt::format("conjugate gradients stopped at relative residual {:.3e} after {} iterations "
                                  "(target {:.1e})",
                                  res.residual_history.back(), res.iterations, rel_tol),
                      res.residual_history);
}

std::vector<double> solve_system(const LinearSystem& s, double rel_tol, const std::vector<double>* guess) {
    const std::size_t n = s.fixed.size();
    std::vector<double> h(n, 0.0);
    Eigen::VectorXd x0(static_cast<Eigen::Index>(s.free_nodes.size()));
    for (std::size_t i = 0; i < s.free_nodes.size(); ++i)
        x0[static_cast<Eigen::Index>(i)] = guess ? (*guess)[static_cast<std::size_t>(s.free_nodes[i])] : 0.0;
    if (!guess) {
        // start from the mean prescribed head; zero is far from any head in m a.s.l.
        double sum = 0.0;
        int cnt = 0;
        for (const auto& f : s.fixed)
            if (f) {
                sum += *f;
                ++cnt;
            }
        x0.setConstant(cnt ? sum / cnt : 0.0);
    }
    const auto res = solve_linear(s.reduced, s.rhs, rel_tol, 0, &x0);
    for (std::size_t i = 0; i < n; ++i) h[i] = s.fixed[i] ? *s.fixed[i] : res.x[s.reduced_index[i]];
    return h;
}

std::vector<double> solve_confined(const Mesh& mesh, std::span<const double> k_element, const DirichletValues& fixed,
                                   double rel_tol) {
    if (std::none_of(fixed.begin(), fixed.end(), [](const auto& f) { return f.has_value(); }))
        throw ValidationError("at least one Dirichlet node is required");
    return solve_system(assemble(mesh, k_element, {}, fixed), rel_tol);
}

double relative_permeability(double p, const SolverSettings& s) {
    if (p >= 0.0) return 1.0;
    if (p <= -s.p_transition) return s.kr_min;
    return s.kr_min + (1.0 - s.kr_min) * (1.0 + p / s.p_transition);
}

double SeepageSolution::inflow() const {
    double q = 0.0;
    for (double f : boundary_flux)
        if (f > 0.0) q += f;
    return q;
}

double SeepageSolution::outflow() const {
    double q = 0.0;
    for (double f : boundary_flux)
        if (f < 0.0) q -= f;
    return q;
}

NodeConditions node_conditions(const Mesh& mesh, const DamSection& section) {
    NodeConditions c;
    c.fixed.assign(mesh.nodes.size(), std::nullopt);
    c.seepage_candidate.assign(mesh.nodes.size(), 0);
    for (const auto& e : mesh.boundary_edges) {
        if (e.segment < 0) continue;
        const auto& bc = section.boundaries.at(static_cast<std::size_t>(e.segment)).condition;
        for (int v : e.nodes) {
            if (bc.kind == BoundaryCondition::Kind::FixedHead) {
                if (c.fixed[v] && *c.fixed[v] != bc.head)
                    throw ValidationError(fmt::format("node at ({}, {}) receives two different fixed heads",
                                                      mesh.nodes[v].x, mesh.nodes[v].y));
                c.fixed[v] = bc.head;
            } else if (bc.kind == BoundaryCondition::Kind::SeepageFace) {
                c.seepage_candidate[v] = 1;
            }
        }
    }
    for (std::size_t v = 0; v < mesh.nodes.size(); ++v)
        if (c.fixed[v]) c.seepage_candidate[v] = 0;
    return c;
}

SeepageSolution solve_unconfined(std::shared_ptr<const Mesh> mesh, const DamSection& section,
                                 const SolverSettings& settings) {
    if (!mesh) throw ValidationError("mesh is null");
    auto k = element_conductivities(*mesh, section);
    return solve_unconfined(mesh, std::move(k), node_conditions(*mesh, section), settings);
}

namespace {

std::vector<double> reactions_at(const SparseMatrix& full, const std::vector<double>& h, const std::vector<int>& nodes) {
    std::vector<double> r(nodes.size(), 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(full, nodes[i]); it; ++it) s += it.value() * h[it.col()];
        r[i] = s;
    }
    return r;
}

Point element_gradient(const std::array<Point, 3>& p, const std::array<double, 3>& h) {
    const double area2 = cross(p[1] - p[0], p[2] - p[0]);
    double gx = 0.0, gy = 0.0;
    for (int i = 0; i < 3; ++i) {
        const Point& pj = p[(i + 1) % 3];
        const Point& pk = p[(i + 2) % 3];
        gx += (pj.y - pk.y) * h[i];
        gy += (pk.x - pj.x) * h[i];
    }
    return {gx / area2, gy / area2};
}


double relative_permeability_slope(double p, const SolverSettings& s) {
    if (p >= 0.0 || p <= -s.p_transition) return 0.0;
    return (1.0 - s.kr_min) / s.p_transition;
}

/// One damped Newton step on A(k_r(h)) h = 0 over the free nodes, using the exact
/// derivative of the k_r ramp. A step is kept when it halves the scaled residual or
/// shrinks `gap`, the Picard head change, below 0.9 * gap0; otherwise nothing is returned.
std::optional<std::vector<double>> newton_step(const Mesh& mesh, std::span<const double> k,
                                               const SolverSettings& st, const DirichletValues& fixed,
                                               std::vector<double> h,
                                               const std::function<double(const std::vector<double>&)>& gap,
                                               double gap0) {
    const std::size_t nn = mesh.nodes.size(), ne = mesh.elements.size();
    for (std::size_t v = 0; v < nn; ++v)
        if (fixed[v]) h[v] = *fixed[v];
    std::vector<int> idx(nn, -1);
    int nf = 0;
    for (std::size_t v = 0; v < nn; ++v)
        if (!fixed[v]) idx[v] = nf++;
    if (nf == 0) return std::nullopt;

    std::vector<Eigen::Matrix3d> unit(ne);
    for (std::size_t e = 0; e < ne; ++e) unit[e] = element_conductance(mesh.element_points(e), 1.0, 1.0);

    auto centroid_p = [&](const std::vector<double>& hh, std::size_t e) {
        double p = 0.0;
        for (int v : mesh.elements[e].nodes) p += hh[v] - mesh.nodes[v].y;
        return p / 3.0;
    };
    // residual and diagonal at a head vector
    auto residual = [&](const std::vector<double>& hh, Eigen::VectorXd& r, Eigen::VectorXd& d) {
        r.setZero(nf);
        d.setZero(nf);
        for (std::size_t e = 0; e < ne; ++e) {
            const auto& n = mesh.elements[e].nodes;
            const double ke = k[e] * relative_permeability(centroid_p(hh, e), st);
            const Eigen::Vector3d he(hh[n[0]], hh[n[1]], hh[n[2]]);
            const Eigen::Vector3d fe = ke * (unit[e] * he);
            for (int i = 0; i < 3; ++i) {
                if (idx[n[i]] < 0) continue;
                r[idx[n[i]]] += fe[i];
                d[idx[n[i]]] += ke * unit[e](i, i);
            }
        }
    };
    Eigen::VectorXd r0, d0;
    residual(h, r0, d0);
    for (Eigen::Index i = 0; i < nf; ++i)
        if (!(d0[i] > 0.0)) return std::nullopt;
    const Eigen::VectorXd dinv = d0.cwiseInverse();
    if (r0.cwiseProduct(dinv).norm() == 0.0) return h;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& n = mesh.elements[e].nodes;
        const double p = centroid_p(h, e);
        const double ke = k[e] * relative_permeability(p, st);
        const double dke = k[e] * relative_permeability_slope(p, st) / 3.0;
        const Eigen::Vector3d he(h[n[0]], h[n[1]], h[n[2]]);
        const Eigen::Vector3d w = dke * (unit[e] * he);
        for (int i = 0; i < 3; ++i) {
            const int ri = idx[n[i]];
            if (ri < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int cj = idx[n[j]];
                if (cj < 0) continue;
                trip.emplace_back(ri, cj, dinv[ri] * (ke * unit[e](i, j) + w[i]));
            }
        }
    }
    Eigen::SparseMatrix<double> jac(nf, nf);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd delta = lu.solve(-r0.cwiseProduct(dinv));
    if (lu.info() != Eigen::Success || !delta.allFinite()) return std::nullopt;

    double lambda = 1.0;
    std::vector<double> trial(nn);
    const double r0n = r0.cwiseProduct(dinv).norm();
    Eigen::VectorXd rt, dt;
    for (int k_try = 0; k_try < 8; ++k_try, lambda *= 0.5) {
        for (std::size_t v = 0; v < nn; ++v) trial[v] = idx[v] < 0 ? h[v] : h[v] + lambda * delta[idx[v]];
        residual(trial, rt, dt);
        if (rt.cwiseProduct(dinv).norm() < 0.5 * r0n) return trial;
        if (gap(trial) < 0.9 * gap0) return trial;
    }
    return std::nullopt;
}

}  // namespace

namespace {

/// Fixed-point iteration at one ramp width; the public solver chains several of these.
SeepageSolution picard_stage(std::shared_ptr<const Mesh> mesh_ptr, std::vector<double> element_k,
                             const NodeConditions& cond, const SolverSettings& settings,
                             const std::vector<double>* initial_head) {
    if (!mesh_ptr) throw ValidationError("mesh is null");
    const Mesh& mesh = *mesh_ptr;
    const std::size_t nn = mesh.nodes.size(), ne = mesh.elements.size();
    if (element_k.size() != ne) throw ValidationError("one conductivity per element required");
    if (cond.fixed.size() != nn || cond.seepage_candidate.size() != nn)
        throw ValidationError("node conditions do not match the mesh");
    if (std::none_of(cond.fixed.begin(), cond.fixed.end(), [](const auto& f) { return f.has_value(); }))
        throw ValidationError("unconfined solve needs at least one fixed-head node");

    SeepageSolution sol;
    sol.mesh = mesh_ptr;
    for (std::size_t v = 0; v < nn; ++v)
        if (cond.seepage_candidate[v]) sol.seepage_nodes.push_back(static_cast<int>(v));
    std::vector<char> active(sol.seepage_nodes.size(), 1);

    std::vector<double> kr(ne, 1.0);
    std::vector<double> h_cur;
    int stable = 0;
    // nodes that flipped repeatedly are frozen in their last state to stop chattering
    std::vector<int> flips(sol.seepage_nodes.size(), 0);

    if (initial_head) {
        if (initial_head->size() != nn) throw ValidationError("initial head does not match the mesh");
        h_cur = *initial_head;
        for (std::size_t v = 0; v < nn; ++v)
            if (cond.fixed[v]) h_cur[v] = *cond.fixed[v];
        for (std::size_t s = 0; s < sol.seepage_nodes.size(); ++s) {
            const int v = sol.seepage_nodes[s];
            active[s] = h_cur[v] >= mesh.nodes[v].y - settings.tol_head;
        }
        for (std::size_t e = 0; e < ne; ++e) {
            double p = 0.0;
            for (int v : mesh.elements[e].nodes) p += h_cur[v] - mesh.nodes[v].y;
            kr[e] = relative_permeability(p / 3.0, settings);
        }
    }

    std::vector<double> h_new;
    constexpr std::size_t kAndersonDepth = 5;
    std::deque<Eigen::VectorXd> dx_hist, dg_hist;
    Eigen::VectorXd x_prev, g_prev;
    double last_dh = std::numeric_limits<double>::infinity();
    // Newton takes over only once Anderson has stopped improving the head change
    bool newton_mode = false;
    double best_dh = std::numeric_limits<double>::infinity();
    int best_it = 0;
    double relax = settings.relax;  // halved whenever Newton gives up
    for (int it = 1; it <= settings.max_outer_iters; ++it) {
        DirichletValues fixed = cond.fixed;
        for (std::size_t s = 0; s < sol.seepage_nodes.size(); ++s)
            if (active[s]) fixed[sol.seepage_nodes[s]] = mesh.nodes[sol.seepage_nodes[s]].y;
        const LinearSystem sys = assemble(mesh, element_k, kr, fixed);
        try {
            h_new = solve_system(sys, settings.linear_tol, h_cur.empty() ? nullptr : &h_cur);
        } catch (const SolverError& e) {
            sol.diagnostic = e.what();
            sol.outer_iterations = it;
            sol.converged = false;
            if (h_cur.empty()) throw;
            h_new = h_cur;
            break;
        }

        std::vector<int> dir;
        for (std::size_t v = 0; v < nn; ++v)
            if (fixed[v]) dir.push_back(static_cast<int>(v));
        const auto reac = reactions_at(sys.full, h_new, dir);
        double scale = 0.0;
        for (double r : reac) scale = std::max(scale, std::abs(r));

        const double dh = [&] {
            if (h_cur.empty()) return std::numeric_limits<double>::infinity();
            double m = 0.0;
            for (std::size_t v = 0; v < nn; ++v) m = std::max(m, std::abs(h_new[v] - h_cur[v]));
            return m;
        }();
        sol.head_change_history.push_back(dh);

        sol.dirichlet_nodes = dir;
        sol.boundary_flux = reac;
        sol.seepage_face_active = active;
        sol.head_field.saturation = kr;
        sol.outer_iterations = it;

        bool changed = false;
        for (std::size_t s = 0; s < sol.seepage_nodes.size(); ++s) {
            const int v = sol.seepage_nodes[s];
            if (flips[s] >= 6) continue;
            if (active[s]) {
                const auto pos = std::lower_bound(dir.begin(), dir.end(), v) - dir.begin();
                if (reac[static_cast<std::size_t>(pos)] > 1e-9 * scale) {
                    active[s] = 0;
                    changed = true;
                    ++flips[s];
                }
            } else if (h_new[v] > mesh.nodes[v].y) {
                active[s] = 1;
                changed = true;
                ++flips[s];
            }
        }
        stable = changed ? 0 : stable + 1;
        if (changed || dh < 0.5 * best_dh) {
            best_dh = dh;
            best_it = it;
        }

        if (dh < settings.tol_head && stable >= 2) {
            sol.converged = true;
            break;
        }

        std::optional<std::vector<double>> newton;
        if (!h_cur.empty() && !changed && (newton_mode || it - best_it >= 8)) {
            auto gap = [&](const std::vector<double>& h) {
                std::vector<double> kr_h(ne);
                for (std::size_t e = 0; e < ne; ++e) {
                    double p = 0.0;
                    for (int v : mesh.elements[e].nodes) p += h[v] - mesh.nodes[v].y;
                    kr_h[e] = relative_permeability(p / 3.0, settings);
                }
                const auto next = solve_system(assemble(mesh, element_k, kr_h, fixed), settings.linear_tol, &h);
                double m = 0.0;
                for (std::size_t v = 0; v < nn; ++v) m = std::max(m, std::abs(next[v] - h[v]));
                return m;
            };
            try {
                // a Newton run that stops shrinking the gap is dropped like a failed step
                if (!newton_mode || it - best_it < 16)
                    newton = newton_step(mesh, element_k, settings, fixed, h_cur, gap, dh);
            } catch (const SolverError&) {
                newton.reset();
            }
            if (!newton) relax = std::max(0.5 * relax, 0.05);
            newton_mode = newton.has_value();
            if (!newton) {
                best_dh = dh;
                best_it = it;
            }
        }
        if (newton) {
            h_cur = std::move(*newton);
            dx_hist.clear();
            dg_hist.clear();
            x_prev.resize(0);
        } else if (h_cur.empty()) {
            h_cur = h_new;
        } else {
            // Anderson mixing on the relaxed Picard map. Plain relaxation cannot settle the
            // self-reinforcing k_r feedback at dry seepage-face nodes; the secant history can.
            Eigen::Map<const Eigen::VectorXd> x(h_cur.data(), static_cast<Eigen::Index>(nn));
            Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(h_new.data(), static_cast<Eigen::Index>(nn)) - x;
            if (changed || x_prev.size() == 0 || dh > 10.0 * last_dh) {
                dx_hist.clear();
                dg_hist.clear();
            } else {
                dx_hist.push_back(x - x_prev);
                dg_hist.push_back(g - g_prev);
                if (dx_hist.size() > kAndersonDepth) {
                    dx_hist.pop_front();
                    dg_hist.pop_front();
                }
            }
            last_dh = dh;
            x_prev = x;
            g_prev = g;
            Eigen::VectorXd next = x + relax * g;
            if (!dg_hist.empty()) {
                const auto m = static_cast<Eigen::Index>(dg_hist.size());
                Eigen::MatrixXd dgm(static_cast<Eigen::Index>(nn), m), dxm(static_cast<Eigen::Index>(nn), m);
                for (Eigen::Index j = 0; j < m; ++j) {
                    dgm.col(j) = dg_hist[static_cast<std::size_t>(j)];
                    dxm.col(j) = dx_hist[static_cast<std::size_t>(j)];
                }
                const Eigen::VectorXd gamma = dgm.colPivHouseholderQr().solve(g);
                if (gamma.allFinite()) next -= (dxm + relax * dgm) * gamma;
            }
            Eigen::Map<Eigen::VectorXd>(h_cur.data(), static_cast<Eigen::Index>(nn)) = next;
        }
        for (std::size_t e = 0; e < ne; ++e) {
            const auto& n = mesh.elements[e].nodes;
            double p = 0.0;
            for (int v : n) p += h_cur[v] - mesh.nodes[v].y;
            kr[e] = relative_permeability(p / 3.0, settings);
        }
    }
    if (!sol.converged && sol.diagnostic.empty()) {
        const bool chatter = std::any_of(flips.begin(), flips.end(), [](int f) { return f >= 6; });
        sol.diagnostic = fmt::format("no convergence in {} outer iterations (last head change {:.3e} m{})",
                                     sol.outer_iterations, sol.head_change_history.back(),
                                     chatter ? ", seepage-face active set oscillating" : "");
    }

    sol.head_field.head = h_new;
    sol.head_field.pressure_head.resize(nn);
    for (std::size_t v = 0; v < nn; ++v) sol.head_field.pressure_head[v] = h_new[v] - mesh.nodes[v].y;
    sol.velocity.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& n = mesh.elements[e].nodes;
        const Point g = element_gradient(mesh.element_points(e), {h_new[n[0]], h_new[n[1]], h_new[n[2]]});
        const double k = element_k[e] * sol.head_field.saturation[e];
        sol.velocity[e] = {-k * g.x, -k * g.y};
    }
    sol.element_k = std::move(element_k);
    return sol;
}

}  // namespace

SeepageSolution solve_unconfined(std::shared_ptr<const Mesh> mesh_ptr, std::vector<double> element_k,
                                 const NodeConditions& cond, const SolverSettings& settings,
                                 const std::vector<double>* initial_head) {
    settings.validate();
    // Continuation in the ramp width: wider ramps weaken the k_r feedback, and each stage
    // starts the next one close to its fixed point. Only the last stage, at the requested
    // width and tolerance, decides convergence.
    std::vector<double> head;
    if (initial_head) head = *initial_head;
    std::vector<double> history;
    int used = 0;
    for (double factor : {8.0, 4.0, 2.0}) {
        SolverSettings st = settings;
        st.p_transition = settings.p_transition * factor;
        st.tol_head = std::max(settings.tol_head, 1e-3);
        st.max_outer_iters = std::min(40, settings.max_outer_iters / 8);
        if (st.max_outer_iters < 1) break;
        auto stage = picard_stage(mesh_ptr, element_k, cond, st, head.empty() ? nullptr : &head);
        used += stage.outer_iterations;
        history.insert(history.end(), stage.head_change_history.begin(), stage.head_change_history.end());
        head = std::move(stage.head_field.head);
    }
    SolverSettings last = settings;
    last.max_outer_iters = settings.max_outer_iters - used;
    auto sol = picard_stage(mesh_ptr, std::move(element_k), cond, last, head.empty() ? nullptr : &head);
    sol.outer_iterations += used;
    history.insert(history.end(), sol.head_change_history.begin(), sol.head_change_history.end());
    sol.head_change_history = std::move(history);
    if (!sol.converged && sol.diagnostic.rfind("no convergence", 0) == 0)
        sol.diagnostic = fmt::format("no convergence in {} outer iterations (last head change {:.3e} m{})",
                                     sol.outer_iterations, sol.head_change_history.back(),
                                     sol.diagnostic.find("oscillating") != std::string::npos
                                         ? ", seepage-face active set oscillating"
                                         : "");
    return sol;
}

std::vector<double> dirichlet_reaction_flux(const SeepageSolution& s) {
    if (!s.converged) throw NotConvergedError("reaction fluxes requested from an unconverged solution");
    if (!s.mesh) throw ValidationError("solution has no mesh");
    const auto full = assemble_matrix(*s.mesh, s.element_k, s.head_field.saturation);
    return reactions_at(full, s.head_field.head, s.dirichlet_nodes);
}

}  // namespace damseep
