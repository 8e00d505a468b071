#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "damseep/mesh.hpp"
#include "damseep/section.hpp"

namespace damseep {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SolverSettings {
    double relax = 0.5;
    double tol_head = 1e-4;        // m
    int max_outer_iters = 200;
    double kr_min = 1e-4;
    double p_transition = 0.5;     // m
    double linear_tol = 1e-10;     // relative residual
    int max_linear_iters = 0;      // 0 picks a size-dependent cap

    /// Throws ValidationError naming the offending field.
    void validate() const;

    friend bool operator==(const SolverSettings&, const SolverSettings&) = default;
};

/// Conductance matrix of a linear triangle for div(k grad h) = 0.
/// Throws DegenerateElementError when the signed area is not positive.
Eigen::Matrix3d element_conductance(const std::array<Point, 3>& tri, double k_sat, double k_r = 1.0);

/// Saturated conductivity per element, m/s. Throws ConfigError for zones without a material.
std::vector<double> element_conductivities(const Mesh& mesh, const DamSection& section);

/// Global (unconstrained) conductance matrix; `kr` may be empty for fully saturated.
SparseMatrix assemble_matrix(const Mesh& mesh, std::span<const double> k_element, std::span<const double> kr = {});

/// Per-node prescribed head; nullopt marks a free node.
using DirichletValues = std::vector<std::optional<double>>;

struct LinearSystem {
    SparseMatrix full;           // before elimination
    SparseMatrix reduced;        // free-node block
    Eigen::VectorXd rhs;         // load from eliminated Dirichlet values
    std::vector<int> free_nodes;
    std::vector<int> reduced_index;  // node -> row in `reduced`, -1 for Dirichlet nodes
    DirichletValues fixed;
};

LinearSystem assemble(const Mesh& mesh, std::span<const double> k_element, std::span<const double> kr,
                      const DirichletValues& fixed);

struct LinearSolveResult {
    Eigen::VectorXd x;
    int iterations = 0;
    std::vector<double> residual_history;  // relative residual norms
};

/// Preconditioned conjugate gradients (incomplete Cholesky). Throws SolverError with the
/// residual history when the tolerance is not met within `max_iters`.
LinearSolveResult solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol = 1e-10,
                               int max_iters = 0, const Eigen::VectorXd* x0 = nullptr);

/// Nodal heads of the whole system (free values solved, Dirichlet values copied).
std::vector<double> solve_system(const LinearSystem& system, double rel_tol = 1e-10,
                                 const std::vector<double>* guess = nullptr);

/// Saturated solve with the given Dirichlet values.
std::vector<double> solve_confined(const Mesh& mesh, std::span<const double> k_element, const DirichletValues& fixed,
                                   double rel_tol = 1e-10);

/// Relative permeability ramp on the pressure head.
double relative_permeability(double pressure_head, const SolverSettings& settings);

struct HeadField {
    std::vector<double> head;           // per node, m a.s.l.
    std::vector<double> pressure_head;  // per node, m
    std::vector<double> saturation;     // k_r per element
};

struct SeepageSolution {
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> element_k;      // saturated k per element
    HeadField head_field;
    std::vector<int> dirichlet_nodes;   // fixed-head nodes plus active seepage-face nodes, ascending
    std::vector<double> boundary_flux;  // reaction at each dirichlet node, m^3/s per m, + into the domain
    std::vector<int> seepage_nodes;     // seepage-face candidates, ascending
    std::vector<char> seepage_face_active;
    std::vector<Point> velocity;        // Darcy flux per element, m/s
    bool converged = false;
    int outer_iterations = 0;
    std::vector<double> head_change_history;
    std::string diagnostic;

    double inflow() const;   // sum of positive reactions
    double outflow() const;  // magnitude of the sum of negative reactions
};

/// How each node is constrained by the section boundaries: a fixed head wins over a
/// seepage face, which wins over impermeable.
struct NodeConditions {
    DirichletValues fixed;
    std::vector<char> seepage_candidate;
};

NodeConditions node_conditions(const Mesh& mesh, const DamSection& section);

/// Fixed-mesh free-surface solve with seepage-face switching. Never throws on
/// non-convergence; check `converged`.
SeepageSolution solve_unconfined(std::shared_ptr<const Mesh> mesh, const DamSection& section,
                                 const SolverSettings& settings = {});

/// `initial_head`, when given, seeds the iteration (warm start) instead of a saturated solve.
SeepageSolution solve_unconfined(std::shared_ptr<const Mesh> mesh, std::vector<double> element_k,
                                 const NodeConditions& conditions, const SolverSettings& settings = {},
                                 const std::vector<double>* initial_head = nullptr);

/// Residual of the unconstrained equations at the solution's Dirichlet nodes
/// (aligned with `dirichlet_nodes`). Throws NotConvergedError on unconverged input.
std::vector<double> dirichlet_reaction_flux(const SeepageSolution& solution);

}  // namespace damseep
