////////////////////////////////////////////////////////////////////////////////
// macro_solver.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Homogenized viscoelastic wave equation
//      rho_eff u'' - div(A_h e(u) + int_0^t S(t-s) e(u) ds + R(t) e(u0)) = f
//  with u = 0 on the boundary, on a 1D interval (P2, uniaxial strain) or a 2D
//  rectangle (P1 triangles, plane strain).
//
//  The kernel is a Prony series S = sum_k G_k exp(-gamma_k t). Histories are
//  kept per dof, W_k(t) = int_0^t exp(-gamma_k (t-s)) u(s) ds, so the memory
//  stress is sum_k G_k e(W_k). Time stepping is Newmark average acceleration;
//  the memory force uses the exact step average of W_k for a displacement that
//  is linear in time over the step. With B_k = -G_k the stored energy
//      kinetic + 1/2 (A_h - sum B_k/gamma_k) e(u):e(u)
//              + sum 1/(2 gamma_k) B_k e(Q_k):e(Q_k),   Q_k = u - gamma_k W_k,
//  then changes by the work of the loads minus int B_k e(Q_k):e(Q_k) dt.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "homog/kernel_analysis.hpp"
#include "homog/tensor_core.hpp"

namespace homog {

using FieldFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &x)>;
using ForceFn = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd &x)>;

struct MacroSpec {
    int dim = 1;
    double lx = 1.0, ly = 1.0;
    int nx = 16, ny = 8;
    double rho_s = 1.0, rho_l = 1.0;
    double fluid_fraction = 0.0;  // |O|
    // Tensors may be given in the cell dimension (2); a 1D rod keeps the 11-11 entry.
    Tensor4 A_h{2};
    PronyKernel kernel;
    std::vector<double> R_t;
    std::vector<Tensor4> R_table;
    bool well_prepared = true;    // R forcing off
    FieldFn u0, u1, v0;           // empty means zero
    ForceFn f;
};

struct MacroQuadPoint {
    double weight = 0.0;
    Eigen::VectorXd x;
    std::vector<int> dofs;  // free index per element dof, -1 on the boundary
    Eigen::MatrixXd N;      // ncomp x element dofs
    Eigen::MatrixXd D;      // packed strain x element dofs
};

struct MacroProblem {
    int dim = 1;
    int ncomp = 1;
    Eigen::MatrixXd nodes;             // n_nodes x dim
    std::vector<int> free_of_dof;      // full dof -> free index or -1
    std::vector<int> dof_of_free;
    std::vector<MacroQuadPoint> qp;

    double rho_s = 1.0, rho_l = 1.0, fluid_fraction = 0.0, rho_eff = 1.0;
    Tensor4 A_h{1};
    PronyKernel kernel;
    std::vector<double> R_t;
    std::vector<Tensor4> R_table;
    bool use_R = false;
    ForceFn f;

    Eigen::VectorXd u0, v_init, a0;    // free dofs
    SpMat M, K_A;
    std::vector<SpMat> K_G;

    mutable long R_evaluations = 0;

    int n_free() const { return static_cast<int>(dof_of_free.size()); }
    int n_nodes() const { return static_cast<int>(nodes.rows()); }
    SpMat stiffness(const Tensor4 &c) const;
    Eigen::VectorXd load(double t) const;
    // Linear in t between table entries, last entry held beyond the table.
    Tensor4 R_at(double t) const;
    Eigen::VectorXd R_forcing(double t) const;  // K(R(t)) u0, zero when unused
    Eigen::MatrixXd full_field(const Eigen::VectorXd &u) const;  // n_nodes x ncomp
    double kinetic(const Eigen::VectorXd &v) const { return 0.5 * v.dot(M * v); }

    struct Cache;
    std::shared_ptr<Cache> cache;
};

// Tensor in the macro dimension.
Tensor4 restrict_tensor(const Tensor4 &t, int dim);
double effective_density(double rho_s, double rho_l, double fluid_fraction);

MacroProblem build_macro_problem(const MacroSpec &spec);

struct EnergyLedger {
    double kinetic = 0.0;
    double elastic_modified = 0.0;
    double memory_aux = 0.0;
    double dissipated = 0.0;  // cumulative
    double work = 0.0;        // cumulative work of f and of the R forcing
    double stored() const { return kinetic + elastic_modified + memory_aux; }
};

struct MacroState {
    double t = 0.0;
    Eigen::VectorXd u, v, a;
    std::vector<Eigen::VectorXd> W;
    EnergyLedger energy;
};

MacroState initial_state(const MacroProblem &p);
MacroState step(const MacroProblem &p, const MacroState &s, double dt);

struct EnergyRow {
    double t, kinetic, elastic_modified, memory_aux, dissipated, total;
};

struct MacroRun {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> u;  // free dofs per stored step
    std::vector<EnergyRow> energy;   // every step
    double balance_residual = 0.0;   // max |stored + dissipated - work - stored(0)| / scale
    double max_increase = 0.0;       // max (stored_{n+1} - stored_n) / stored_0
};

// Uniform steps; the step count is ceil(T/dt) and dt is shrunk to fit.
MacroRun run(const MacroProblem &p, double T, double dt, int store_every = 1);

// --- single-term kernel in auxiliary-variable form ---------------------------

struct PbejRun {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> u;
    std::vector<EnergyRow> energy;
    double residual = 0.0;      // max over steps of the energy-identity defect, relative
    double max_increase = 0.0;  // max step change of the modified energy with f = 0 terms removed
};

// u'' with stress (A_h - B/gamma) e(u) + (1/gamma) B e(w'), w' + gamma w = u,
// midpoint rule in time. The defect compares the energy difference with the
// trapezoid rule applied to dissipation and power.
PbejRun solve_pbej_auxiliary(const MacroProblem &p, double T, double dt);

// --- memory stress check -----------------------------------------------------

enum class DirectRule { Trapezoid, Product };

struct ConsistencyReport {
    double max_deviation = 0.0;  // relative to the largest probed stress
    double scale = 0.0;
    int probes = 0;
};

// Recursion replayed over the stored displacements against a direct sum over
// the whole history at 10 probe times and up to 10 quadrature points. Product
// integrates exp(-gamma (t-s)) exactly against the piecewise linear strain.
ConsistencyReport convolution_consistency(const MacroProblem &p, const std::vector<double> &t,
                                          const std::vector<Eigen::VectorXd> &u,
                                          DirectRule rule = DirectRule::Trapezoid);

// Memory stress from the recursion at every quadrature point, final time.
std::vector<Eigen::VectorXd> memory_stress(const MacroProblem &p, const std::vector<double> &t,
                                           const std::vector<Eigen::VectorXd> &u);

} // namespace homog
