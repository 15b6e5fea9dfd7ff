////////////////////////////////////////////////////////////////////////////////
// cell_operators.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Cell operators on a fixed discretization:
//    Z      periodic corrector of the perforated cell (traction free on dO),
//    R1     elastic lift of an interface field h (rigid part of the trace free),
//    R2/R3  Stokes velocity/pressure driven by the traction of R1 h,
//    T      h -> trace of R2 h, a dissipative map on the rigid-free space H.
//  and the effective quantities built on them: the instantaneous tensor A_h,
//  the memory kernel S(t), the initial-memory tensor R(t) and the Laplace
//  domain response A_h + LS(z).
//
//  Fields in H are handled in the coordinates of CellDiscretization::hbasis.
//  Besides the L2 structure, H carries the energy product
//      <h, k>_E = int_{Y\O} A e(R1 h) : e(R1 k),
//  in which T is self-adjoint and negative definite. T is diagonalized in that
//  product: T V = V diag(lambda), V^T G_E V = I.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "homog/cell_fem.hpp"
#include "homog/tensor_core.hpp"

namespace homog {

struct R1Solution {
    Eigen::VectorXd u;         // periodic solid field
    Eigen::VectorXd traction;  // interface functional v -> int_{dO} A e(u) nu . v
    Eigen::VectorXd rigid;     // rigid coefficients: trace(u) = h + rigid * alpha
};

struct StokesSolution {
    Eigen::VectorXd velocity;
    Eigen::VectorXd pressure;
};

// Spectral data of T on H.
struct TSpectrum {
    Eigen::MatrixXd T;         // d x d, hbasis coordinates
    Eigen::MatrixXd gram;      // G_E, energy Gram matrix of hbasis
    Eigen::VectorXd lambda;    // eigenvalues, ascending (most negative first)
    Eigen::MatrixXd modes;     // V, G_E-orthonormal eigenvectors
    Eigen::MatrixXd flux;      // 3 x d, stress functional F on hbasis
    double residual = 0.0;     // ||T V - V diag(lambda)|| / ||T||
    bool fallback = false;     // exponential through Pade instead of the eigenbasis
    // Zero eigenvalues up to roundoff. An incompressible inclusion conserves the
    // interface volume flux int_{dO} h . nu, so T has a one dimensional kernel;
    // these modes sit at the end of lambda.
    int n_conserved = 0;
    double abscissa() const { return lambda.size() ? lambda.maxCoeff() : 0.0; }
    // Abscissa on the volume preserving subspace, where the semigroup decays.
    double decay_abscissa() const {
        int k = static_cast<int>(lambda.size()) - 1 - n_conserved;
        return k >= 0 ? lambda[k] : 0.0;
    }
};

class CellOperatorSet {
public:
    CellOperatorSet(const CellDiscretization &disc, const Tensor4 &a, double mu);
    ~CellOperatorSet();
    CellOperatorSet(const CellOperatorSet &) = delete;
    CellOperatorSet &operator=(const CellOperatorSet &) = delete;

    const CellDiscretization &disc() const { return m_disc; }
    const Tensor4 &A() const { return m_a; }
    double mu() const { return m_mu; }
    int h_dim() const { return m_disc.h_dim(); }

    const SpMat &elastic() const { return m_ks; }
    const SpMat &fluid_gram() const { return m_kf; }

    // Raw solves. h is a full interface vector.
    Eigen::VectorXd corrector(const Eigen::Vector3d &xi) const;
    R1Solution lift(const Eigen::VectorXd &h) const;
    StokesSolution stokes(const Eigen::VectorXd &traction) const;

    // Stress functional  -A int e(R1 h) - int_O (2 mu e(R2 h) - R3 h I), packed.
    Eigen::Vector3d flux(const R1Solution &r1, const StokesSolution &st) const;

    // Tensor of the perforated cell:  A_Z xi = int_{Y\O} A (xi + e(Z xi)).
    const Tensor4 &perforated_tensor() const;
    // Columns: hbasis coordinates of Q(xi_j y + Z xi_j) for the packed basis.
    const Eigen::MatrixXd &strain_coords() const;
    // Columns: hbasis coordinates of Q(xi_j y).
    Eigen::MatrixXd linear_coords() const;

    // Built on first use (d lift and Stokes solves).
    const TSpectrum &spectrum() const;

    // Modal data of the kernel: S(t) = P diag(lambda e^{lambda t}) Bm.
    Eigen::MatrixXd modal_left() const;   // P  = F V       (3 x d)
    Eigen::MatrixXd modal_right() const;  // Bm = V^T G_E C (d x 3)

private:
    struct Factors;
    const CellDiscretization &m_disc;
    Tensor4 m_a;
    double m_mu;
    SpMat m_ks, m_kf;
    Eigen::MatrixXd m_lstrain_s, m_lstrain_f;
    Eigen::VectorXd m_pint;
    std::unique_ptr<Factors> m_f;
    mutable std::unique_ptr<Tensor4> m_az;
    mutable std::unique_ptr<Eigen::MatrixXd> m_c;
    mutable std::unique_ptr<TSpectrum> m_spec;
};

// --- operators on fields -----------------------------------------------------

Eigen::VectorXd solve_Z(const CellOperatorSet &ops, const SymMat &xi);
// Throws Precondition when the rigid defect of h exceeds 1e-10.
Eigen::VectorXd solve_R1(const CellOperatorSet &ops, const Eigen::VectorXd &h);
StokesSolution solve_R2R3(const CellOperatorSet &ops, const Eigen::VectorXd &h);
Eigen::VectorXd apply_T(const CellOperatorSet &ops, const Eigen::VectorXd &h);
const TSpectrum &build_T_matrix(const CellOperatorSet &ops);

// exp(t T) on coordinates and on full interface vectors (Q applied first).
Eigen::VectorXd semigroup_coords(const CellOperatorSet &ops, double t, const Eigen::VectorXd &c);
Eigen::VectorXd semigroup_apply(const CellOperatorSet &ops, double t, const Eigen::VectorXd &h0);
// int A e(R1 h) : e(R1 h) for h given by coordinates.
double elastic_energy(const CellOperatorSet &ops, const Eigen::VectorXd &c);

// --- effective tensors ------------------------------------------------------

Tensor4 compute_Ah(const CellOperatorSet &ops);
Tensor4 compute_Ah_energy(const CellOperatorSet &ops);

struct MemoryKernelSamples {
    std::vector<double> t;
    std::vector<Tensor4> S;
    std::vector<Tensor4> R;  // initial-memory tensor: R(t) xi = R force of xi y
    Tensor4 A_h{2};
    std::map<std::string, double> meta;
};

// Geometric steps from 1e-3/fast up to t = 1/slow, uniform afterwards, until
// ||S|| < stop_ratio ||S(0)|| (fast/slow: extreme decay rates of T).
std::vector<double> default_time_grid(const CellOperatorSet &ops, double stop_ratio = 1e-8);
MemoryKernelSamples sample_S(const CellOperatorSet &ops, const std::vector<double> &grid);
Tensor4 kernel_at(const CellOperatorSet &ops, double t);
// S(0) without the eigenbasis: F T C and the energy form C^T G_E T C.
Tensor4 kernel_at_zero_direct(const CellOperatorSet &ops);
Tensor4 kernel_at_zero_energy(const CellOperatorSet &ops);

SymMat compute_R_force(const CellOperatorSet &ops, double t, const Eigen::VectorXd &phi);
Tensor4 R_tensor(const CellOperatorSet &ops, double t);

// --- Laplace domain ---------------------------------------------------------

struct LaplaceResponse {
    CTensor4 tensor{2};                     // A_h + LS(z), filled for the default xi set
    std::vector<Eigen::Vector3cd> response; // (A_h + LS(z)) xi per xi
    std::vector<double> fluid_strain;    // per basis xi: int_O |e(eta)|^2
    std::vector<double> solid_energy;    // per basis xi: int A (xi + e(zeta)) : conj(.)
};
// Monolithic complex cell problem; xi_set defaults to the packed basis.
LaplaceResponse laplace_solve(const CellOperatorSet &ops, cdouble z,
                              const std::vector<Eigen::VectorXcd> &xi_set = {});
CTensor4 laplace_direct(const CellOperatorSet &ops, cdouble z);
// Same quantity from the eigenbasis of T: A_h + sum lambda/(z - lambda) P_m Bm_m.
CTensor4 laplace_modal(const CellOperatorSet &ops, cdouble z);

struct CoercivityReport {
    double floor = 0.0;
    cdouble argmin_z{0.0, 0.0};
    int argmin_xi = -1;
    std::vector<double> values;  // z-major, then xi
};
// Re z in {0.01, 0.1, 1, 10} x Im z in {0, 1, 10}. Real xi gives conjugate
// solutions at conj(z), so the lower half plane adds nothing.
std::vector<cdouble> default_coercivity_grid();
// min over the grid of (1 + 1/|z|^2) int_O |e(eta)|^2 for unit xi.
CoercivityReport coercivity_scan(const CellOperatorSet &ops, const std::vector<cdouble> &z_grid,
                                 const std::vector<Eigen::VectorXcd> &xi_set);

// --- micro energy identity --------------------------------------------------

struct MicroEnergyReport {
    double residual = 0.0;         // max over interior samples
    double scale = 0.0;            // max |lhs|, for relative statements
    double min_dissipation = 0.0;  // min of 2 mu int_O |e(eta)|^2
    std::vector<double> lhs, energy, dissipation;
};
// E given at increasing times (packed), linear in between, E(0) = 0.
MicroEnergyReport micro_energy_residual(const CellOperatorSet &ops, const std::vector<double> &t,
                                        const std::vector<Eigen::Vector3d> &E);

} // namespace homog
