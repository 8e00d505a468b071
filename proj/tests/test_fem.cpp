#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "damseep/error.hpp"
#include "damseep/fem.hpp"
#include "fixtures.hpp"

using namespace damseep;

namespace {

// Textbook linear-triangle stiffness written out independently of the library.
Eigen::Matrix3d hand_conductance(const std::array<Point, 3>& t, double k) {
    const double b[3] = {t[1].y - t[2].y, t[2].y - t[0].y, t[0].y - t[1].y};
    const double c[3] = {t[2].x - t[1].x, t[0].x - t[2].x, t[1].x - t[0].x};
    const double a2 = (t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y);
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = k * (b[i] * b[j] + c[i] * c[j]) / (2.0 * a2);
    return m;
}

DirichletValues boundary_dirichlet(const Mesh& m, auto&& field) {
    DirichletValues fixed(m.nodes.size());
    for (const auto& be : m.boundary_edges)
        for (int v : be.nodes) fixed[v] = field(m.nodes[v]);
    return fixed;
}

}  // namespace

TEST_CASE("element conductance matches the hand formula") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        std::array<Point, 3> t{Point{u(rng), u(rng)}, Point{u(rng), u(rng)}, Point{u(rng), u(rng)}};
        if (signed_area(t) < 0) std::swap(t[1], t[2]);
        if (signed_area(t) < 1e-3) continue;
        const double k = std::pow(10.0, u(rng));
        const Eigen::Matrix3d a = element_conductance(t, k, 0.5);
        const Eigen::Matrix3d b = hand_conductance(t, 0.5 * k);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
        // constants are in the null space, eigenvalues non-negative
        CHECK(a.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * a.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("degenerate elements are rejected") {
    CHECK_THROWS_AS(element_conductance({Point{0, 0}, Point{0, 1}, Point{1, 0}}, 1.0), DegenerateElementError);
    CHECK_THROWS_AS(element_conductance({Point{0, 0}, Point{1, 1}, Point{2, 2}}, 1.0), DegenerateElementError);
}

TEST_CASE("relative permeability ramp") {
    SolverSettings s;
    s.kr_min = 1e-3;
    s.p_transition = 2.0;
    CHECK(relative_permeability(0.0, s) == 1.0);
    CHECK(relative_permeability(5.0, s) == 1.0);
    CHECK(relative_permeability(-2.0, s) == doctest::Approx(1e-3));
    CHECK(relative_permeability(-1.0, s) == doctest::Approx(0.5 * (1.0 + 1e-3)));
    CHECK(relative_permeability(-50.0, s) == 1e-3);
    double prev = 0.0;
    for (double p = -3.0; p <= 1.0; p += 0.01) {
        const double kr = relative_permeability(p, s);
        CHECK(kr >= prev);
        prev = kr;
    }
}

TEST_CASE("solver settings validation names the field") {
    auto bad = [](auto mutate, const char* field) {
        SolverSettings s;
        mutate(s);
        try {
            s.validate();
            FAIL("accepted bad ", field);
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    bad([](SolverSettings& s) { s.tol_head = 0.0; }, "tol_head");
    bad([](SolverSettings& s) { s.kr_min = 1.0; }, "kr_min");
    bad([](SolverSettings& s) { s.max_outer_iters = 0; }, "max_outer_iters");
    bad([](SolverSettings& s) { s.relax = 1.5; }, "relax");
    bad([](SolverSettings& s) { s.p_transition = -1.0; }, "p_transition");
    CHECK_NOTHROW(SolverSettings{}.validate());
}

TEST_CASE("linear field reproduced on unstructured meshes (patch test)") {
    const DamSection s = apply_scenario(build_sahand_section({}), fixtures::sahand_scenario());
    const Mesh m = triangulate(s, 15.0);
    const std::vector<double> k(m.elements.size(), 3e-6);
    auto exact = [](Point p) { return 1580.0 + 0.01 * (p.x - 250.0) - 0.03 * (p.y - 1550.0); };
    const auto h = solve_confined(m, k, boundary_dirichlet(m, exact), 1e-14);
    double err = 0.0;
    for (std::size_t v = 0; v < m.nodes.size(); ++v) err = std::max(err, std::abs(h[v] - exact(m.nodes[v])));
    CHECK(err <= 1e-9);
}

TEST_CASE("assembled matrix is symmetric with zero row sums") {
    const auto s = fixtures::DupuitCase{}.section();
    const Mesh m = triangulate(s, 2.0);
    std::vector<double> k(m.elements.size());
    for (std::size_t e = 0; e < k.size(); ++e) k[e] = 1.0 + static_cast<double>(e % 7);
    const SparseMatrix a = assemble_matrix(m, k);
    const Eigen::MatrixXd d(a);
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * d.cwiseAbs().maxCoeff());
    CHECK(d.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * d.cwiseAbs().maxCoeff());
    CHECK_THROWS_AS(assemble_matrix(m, std::vector<double>(3, 1.0)), ValidationError);
}

TEST_CASE("conjugate gradients") {
    const auto s = fixtures::DupuitCase{}.section();
    const Mesh m = triangulate(s, 1.0);
    const std::vector<double> k(m.elements.size(), 1.0);
    DirichletValues fixed(m.nodes.size());
    for (std::size_t v = 0; v < m.nodes.size(); ++v)
        if (m.nodes[v].x == 0.0) fixed[v] = 1.0;
        else if (m.nodes[v].x == 20.0) fixed[v] = 0.0;
    const LinearSystem sys = assemble(m, k, {}, fixed);
    const auto r = solve_linear(sys.reduced, sys.rhs, 1e-12);
    CHECK(r.iterations > 0);
    CHECK(r.residual_history.back() <= 1e-12);
    CHECK((sys.reduced * r.x - sys.rhs).norm() <= 1e-10 * sys.rhs.norm());

    SUBCASE("gives up with the residual history") {
        try {
            solve_linear(sys.reduced, sys.rhs, 1e-14, 2);
            FAIL("expected SolverError");
        } catch (const SolverError& e) {
            CHECK(e.residual_history().size() >= 2);
        }
    }
    SUBCASE("uniform flow between two walls") {
        const auto h = solve_system(sys);
        for (std::size_t v = 0; v < m.nodes.size(); ++v)
            CHECK(h[v] == doctest::Approx(1.0 - m.nodes[v].x / 20.0).epsilon(1e-9));
    }
}

TEST_CASE("Dirichlet conflicts and missing anchors") {
    const auto s = fixtures::DupuitCase{}.section();
    const Mesh m = triangulate(s, 2.0);
    const std::vector<double> k(m.elements.size(), 1.0);
    CHECK_THROWS_AS(solve_confined(m, k, DirichletValues(m.nodes.size())), ValidationError);
    CHECK_THROWS_AS(assemble(m, k, {}, DirichletValues(2)), ValidationError);
}

TEST_CASE("unconfined solution invariants") {
    const fixtures::DupuitCase dc;
    const auto s = dc.section();
    const auto mesh = std::make_shared<const Mesh>(triangulate(s, 1.0));
    const SeepageSolution sol = solve_unconfined(mesh, s);
    REQUIRE(sol.converged);
    CHECK(sol.diagnostic.empty());
    CHECK(sol.outer_iterations >= 1);
    CHECK(sol.head_change_history.size() == static_cast<std::size_t>(sol.outer_iterations));
    CHECK(sol.head_change_history.back() < SolverSettings{}.tol_head);

    CHECK(std::is_sorted(sol.dirichlet_nodes.begin(), sol.dirichlet_nodes.end()));
    CHECK(sol.boundary_flux.size() == sol.dirichlet_nodes.size());
    CHECK(sol.seepage_face_active.size() == sol.seepage_nodes.size());
    CHECK(std::abs(sol.inflow() - sol.outflow()) <= 1e-6 * sol.inflow());

    // complementarity on the seepage face
    const auto& h = sol.head_field.head;
    const double tol = SolverSettings{}.tol_head;
    for (std::size_t i = 0; i < sol.seepage_nodes.size(); ++i) {
        const int v = sol.seepage_nodes[i];
        if (sol.seepage_face_active[i]) {
            CHECK(h[v] == doctest::Approx(mesh->nodes[v].y));
            const auto it = std::lower_bound(sol.dirichlet_nodes.begin(), sol.dirichlet_nodes.end(), v);
            REQUIRE(it != sol.dirichlet_nodes.end());
            CHECK(sol.boundary_flux[it - sol.dirichlet_nodes.begin()] <= 1e-9 * sol.inflow());
        } else {
            CHECK(h[v] <= mesh->nodes[v].y + tol);
        }
    }
    for (double kr : sol.head_field.saturation) {
        CHECK(kr >= SolverSettings{}.kr_min);
        CHECK(kr <= 1.0);
    }
    // heads stay between the reservoir levels
    for (double v : h) {
        CHECK(v <= dc.h1 + 1e-6);
        CHECK(v >= dc.h2 - 1e-6);
    }
    CHECK(sol.inflow() == doctest::Approx(dc.discharge()).epsilon(0.1));
    const auto reactions = dirichlet_reaction_flux(sol);
    for (std::size_t i = 0; i < reactions.size(); ++i)
        CHECK(reactions[i] == doctest::Approx(sol.boundary_flux[i]).epsilon(1e-9).scale(sol.inflow()));
}

TEST_CASE("non-convergence is reported, not thrown") {
    const auto s = fixtures::DupuitCase{}.section();
    const auto mesh = std::make_shared<const Mesh>(triangulate(s, 1.0));
    SolverSettings st;
    st.max_outer_iters = 2;
    const SeepageSolution sol = solve_unconfined(mesh, s, st);
    CHECK_FALSE(sol.converged);
    CHECK(sol.outer_iterations == 2);
    CHECK(sol.diagnostic.find("no convergence") != std::string::npos);
    CHECK_THROWS_AS(dirichlet_reaction_flux(sol), NotConvergedError);
}

TEST_CASE("warm start reaches the same solution") {
    const auto s = fixtures::DupuitCase{}.section();
    const auto mesh = std::make_shared<const Mesh>(triangulate(s, 1.0));
    const auto k = element_conductivities(*mesh, s);
    const auto cond = node_conditions(*mesh, s);
    const SeepageSolution cold = solve_unconfined(mesh, k, cond);
    REQUIRE(cold.converged);
    const SeepageSolution warm = solve_unconfined(mesh, k, cond, {}, &cold.head_field.head);
    REQUIRE(warm.converged);
    for (std::size_t v = 0; v < mesh->nodes.size(); ++v)
        CHECK(warm.head_field.head[v] == doctest::Approx(cold.head_field.head[v]).epsilon(1e-3));
    const std::vector<double> wrong(3, 0.0);
    CHECK_THROWS_AS(solve_unconfined(mesh, k, cond, {}, &wrong), ValidationError);
}

TEST_CASE("node conditions: fixed head beats seepage face") {
    const auto s = fixtures::DupuitCase{}.section();
    const Mesh m = triangulate(s, 1.0);
    const auto nc = node_conditions(m, s);
    for (std::size_t v = 0; v < m.nodes.size(); ++v) {
        const Point p = m.nodes[v];
        if (p.x == 0.0 && p.y <= 10.0) CHECK(nc.fixed[v] == 10.0);
        if (p.x == 20.0 && p.y <= 2.0) {
            CHECK(nc.fixed[v] == 2.0);
            CHECK_FALSE(nc.seepage_candidate[v]);
        }
        if (p.x == 20.0 && p.y > 2.0) {
            CHECK_FALSE(nc.fixed[v].has_value());
            CHECK(nc.seepage_candidate[v]);
        }
    }
}
