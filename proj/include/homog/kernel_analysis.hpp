////////////////////////////////////////////////////////////////////////////////
// kernel_analysis.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Post-processing of sampled memory kernels: exponential decay fit, Prony
//  compression, Laplace transforms, and positivity checks of A_h + LS(z) and of
//  the time-domain work inequality.
//
//  A Prony kernel is S(t) = sum_k G_k exp(-gamma_k t) with gamma_k > 0, so that
//  LS(z) = sum_k G_k / (gamma_k + z).
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "homog/cell_operators.hpp"
#include "homog/tensor_core.hpp"

namespace homog {

struct PronyTerm {
    double rate = 0.0;
    Tensor4 weight{2};
};

struct PronyKernel {
    Tensor4 A_h{2};
    std::vector<PronyTerm> terms;
    double residual = 0.0;   // max_k ||fit(t_k) - S(t_k)|| / ||S(0)||
    bool stagnated = false;  // optimizer stopped without meeting its tolerances
    std::string source;

    int dim() const { return A_h.dim(); }
    Tensor4 eval(double t) const;
    // Closed form; throws Pole when Re z <= -min rate.
    CTensor4 laplace(cdouble z) const;
    double min_rate() const;
};

struct DecayFit {
    double lambda_hat = 0.0;  // decay rate
    double Lambda_hat = 0.0;  // prefactor
    double r_squared = 0.0;
    int knee = -1;            // first sample with ||S|| < ||S(0)|| / 2
    int used = 0;             // samples in the regression
};

// Regression of log||S(t)|| on t from the knee on. Throws Fit when fewer than
// 8 samples follow the knee or the fitted slope is not negative.
DecayFit fit_exponential(const std::vector<double> &t, const std::vector<Tensor4> &S);
DecayFit fit_exponential(const MemoryKernelSamples &s);

// Rates shared by all entries (Levenberg-Marquardt on log rates), weights by
// linear least squares. Starts from the K-1 term fit plus one scanned rate.
PronyKernel fit_prony(const MemoryKernelSamples &s, int K);

// The cell kernel is exactly a Prony series in the eigenbasis of T; dissipative
// modes only.
PronyKernel modal_prony(const CellOperatorSet &ops);

// Laplace transform of linearly interpolated samples (the exponential factor is
// integrated exactly on each interval) plus the tail of the exponential fit
// beyond the last sample.
CTensor4 laplace_of_samples(const MemoryKernelSamples &s, cdouble z);
CTensor4 laplace_of_samples(const MemoryKernelSamples &s, cdouble z, const DecayFit &tail);

// --- passivity ---------------------------------------------------------------

// z -> LS(z)
using LaplaceFn = std::function<CTensor4(cdouble)>;

struct PassivityPoint {
    cdouble z;
    int xi = 0;
    double raw1 = 0.0;     // Re((A_h + LS) xi : conj(z xi))
    double raw2 = 0.0;     // -Im(...) Im z
    double margin1 = 0.0;  // raw1 / ((Re z + |z|^2/(1+|z|^2)) |xi|^2)
    double margin2 = 0.0;  // raw2 / (|Im z|^2 |xi|^2); +inf on the real axis
};

struct PassivityReport {
    std::vector<PassivityPoint> points;
    double c = 0.0;  // min of all margins
    double min_margin1 = 0.0, min_margin2 = 0.0;
    bool pass = false;
};

// Re z in 7 log points over [1e-2, 10], Im z in {0, +-0.5, +-2, +-10, +-50}.
std::vector<cdouble> default_passivity_grid();
// Packed basis followed by n_random complex unit vectors from a seeded generator.
std::vector<Eigen::VectorXcd> passivity_xi_set(int n_random, std::uint64_t seed, int dim = 2);

PassivityReport certify_passivity(const Tensor4 &A_h, const LaplaceFn &LS, const std::vector<cdouble> &z_grid,
                                  const std::vector<Eigen::VectorXcd> &xi_set);

// --- time-domain work inequality --------------------------------------------

struct WorkInequality {
    double lhs = 0.0;       // int_0^T (A_h E + int_0^t S(t-s) E ds) : E' dt
    double e_final = 0.0;   // |E(T)|^2
    double v_integral = 0.0;// int_0^T |V|^2, V' + V = E', V(0) = 0
    double v_final = 0.0;   // |V(T)|^2
    double rhs = 0.0;       // sum of the three
    double margin = 0.0;    // lhs / rhs (0 when rhs == 0)
};

// E piecewise linear through (t_k, E_k) with E_0 = 0; every segment is split
// into `substeps` pieces for the outer trapezoid rule.
WorkInequality check_prASnl(const Tensor4 &A_h, const PronyKernel &kernel, const std::vector<double> &t,
                            const std::vector<Eigen::VectorXd> &E, int substeps = 64);

// --- closed-form example -----------------------------------------------------

struct PrexKernel {
    PronyKernel kernel;       // one term: rate gamma, weight -B
    Tensor4 B{2};
    double gamma = 0.0;
    bool condition_holds = false;  // gamma A_h - B positive definite
    CTensor4 LS(cdouble z) const;  // -B / (gamma + z)
};

// Throws InvalidParameter for non-symmetric A_h or B, or gamma <= 0.
PrexKernel prex_kernel(const Tensor4 &A_h, const Tensor4 &B, double gamma);

} // namespace homog
