#include "homog/kernel_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace homog {

// --- PronyKernel ------------------------------------------------------------

Tensor4 PronyKernel::eval(double t) const {
    Tensor4 out = Tensor4::zero(dim());
    for (const auto &term : terms) out = out + term.weight * std::exp(-term.rate * t);
    return out;
}

double PronyKernel::min_rate() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto &term : terms) m = std::min(m, term.rate);
    return m;
}

CTensor4 PronyKernel::laplace(cdouble z) const {
    if (!terms.empty() && z.real() <= -min_rate()) {
        std::ostringstream os;
        os << "Laplace variable " << z << " is left of the pole at " << -min_rate();
        throw Error(ErrorKind::Pole, os.str());
    }
    const int n = packed_size(dim());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (const auto &term : terms) m += term.weight.matrix().cast<cdouble>() / (term.rate + z);
    return CTensor4(dim(), m);
}

// --- decay fit -----------------------------------------------------------------

DecayFit fit_exponential(const std::vector<double> &t, const std::vector<Tensor4> &S) {
    if (t.size() != S.size() || t.empty()) throw Error(ErrorKind::InvalidParameter, "samples are empty or ragged");
    const double s0 = S[0].norm();
    DecayFit fit;
    for (size_t k = 0; k < S.size(); ++k)
        if (S[k].norm() < 0.5 * s0) {
            fit.knee = static_cast<int>(k);
            break;
        }
    if (fit.knee < 0) throw Error(ErrorKind::Fit, "kernel never drops below half of its initial norm");
    // Samples down at roundoff level carry no slope information.
    std::vector<double> x, y;
    for (size_t k = fit.knee; k < S.size(); ++k) {
        double n = S[k].norm();
        if (n > 1e-12 * s0) {
            x.push_back(t[k]);
            y.push_back(std::log(n));
        }
    }
    if (x.size() < 8) {
        std::ostringstream os;
        os << "only " << x.size() << " usable samples past the knee, need 8";
        throw Error(ErrorKind::Fit, os.str());
    }
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    double slope = sxy / sxx;
    if (!(slope < 0)) {
        std::ostringstream os;
        os << "tail does not decay: fitted slope " << slope;
        throw Error(ErrorKind::Fit, os.str());
    }
    fit.lambda_hat = -slope;
    fit.Lambda_hat = std::exp(my - slope * mx);
    fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.used = static_cast<int>(x.size());
    return fit;
}

DecayFit fit_exponential(const MemoryKernelSamples &s) { return fit_exponential(s.t, s.S); }

// --- Prony fit ---------------------------------------------------------------

namespace {

struct VarPro {
    const Eigen::VectorXd &t;
    const Eigen::MatrixXd &Y;  // samples x entries

    Eigen::MatrixXd basis(const Eigen::VectorXd &logr) const {
        Eigen::MatrixXd phi(t.size(), logr.size());
        for (int k = 0; k < logr.size(); ++k) phi.col(k) = (-std::exp(logr[k]) * t.array()).exp().matrix();
        return phi;
    }
    Eigen::MatrixXd weights(const Eigen::MatrixXd &phi) const {
        return phi.colPivHouseholderQr().solve(Y);
    }
    Eigen::MatrixXd residual(const Eigen::VectorXd &logr) const {
        Eigen::MatrixXd phi = basis(logr);
        return phi * weights(phi) - Y;
    }
};

struct VarProFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const VarPro *vp;
    int n_in, n_out;
    int inputs() const { return n_in; }
    int values() const { return n_out; }
    int operator()(const Eigen::VectorXd &x, Eigen::VectorXd &f) const {
        Eigen::MatrixXd r = vp->residual(x);
        f = Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
        return 0;
    }
};

double max_rel_misfit(const Eigen::MatrixXd &r, double s0) {
    return r.rowwise().norm().maxCoeff() / s0;
}

} // namespace

PronyKernel fit_prony(const MemoryKernelSamples &s, int K) {
    if (K < 1) throw Error(ErrorKind::InvalidParameter, "Prony term count must be at least 1");
    if (s.t.size() < static_cast<size_t>(2 * K + 1))
        throw Error(ErrorKind::InvalidParameter, "too few samples for the requested term count");
    const int dim = s.S[0].dim();
    const int m = packed_size(dim);
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(s.t.data(), s.t.size());
    Eigen::MatrixXd Y(t.size(), m * m);
    for (int k = 0; k < t.size(); ++k) Y.row(k) = Eigen::Map<const Eigen::VectorXd>(s.S[k].matrix().data(), m * m);
    const double s0 = s.S[0].norm();
    if (!(s0 > 0)) throw Error(ErrorKind::Fit, "kernel is zero at t = 0");
    VarPro vp{t, Y};

    // Candidate rates span the resolvable range of the grid.
    double tmax = t[t.size() - 1], tmin = t[1];
    double lo = std::log(0.1 / tmax), hi = std::log(10.0 / tmin);
    const int n_scan = 60;

    Eigen::VectorXd logr(0);
    double best_res = std::numeric_limits<double>::infinity();
    bool stagnated = false;
    for (int k = 1; k <= K; ++k) {
        // Scan the new rate with the previous ones fixed.
        Eigen::VectorXd trial(k), best_trial(k);
        trial.head(k - 1) = logr;
        double best_obj = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_scan; ++j) {
            trial[k - 1] = lo + (hi - lo) * j / (n_scan - 1.0);
            double obj = vp.residual(trial).squaredNorm();
            if (obj < best_obj) {
                best_obj = obj;
                best_trial = trial;
            }
        }
        VarProFunctor f{&vp, k, static_cast<int>(Y.size())};
        Eigen::NumericalDiff<VarProFunctor> nd(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<VarProFunctor>> lm(nd);
        lm.parameters.maxfev = 400 * (k + 1);
        lm.parameters.xtol = 1e-12;
        lm.parameters.ftol = 1e-14;
        Eigen::VectorXd x = best_trial;
        auto status = lm.minimize(x);
        double obj = vp.residual(x).squaredNorm();
        if (!x.allFinite() || obj > best_obj) x = best_trial;
        stagnated = (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
                     status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters);
        logr = x;
        best_res = max_rel_misfit(vp.residual(logr), s0);
    }

    // Sort by rate for a canonical layout.
    std::vector<int> order(K);
    for (int k = 0; k < K; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return logr[a] < logr[b]; });
    Eigen::MatrixXd phi = vp.basis(logr);
    Eigen::MatrixXd w = vp.weights(phi);
    PronyKernel out;
    out.A_h = s.A_h;
    for (int k : order) {
        Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(w.row(k).eval().data(), m, m);
        out.terms.push_back({std::exp(logr[k]), Tensor4(dim, g)});
    }
    out.residual = best_res;
    out.stagnated = stagnated;
    out.source = "prony fit";
    return out;
}

PronyKernel modal_prony(const CellOperatorSet &ops) {
    const TSpectrum &s = ops.spectrum();
    Eigen::MatrixXd p = ops.modal_left(), b = ops.modal_right();
    PronyKernel out;
    out.A_h = compute_Ah(ops);
    const int nd = static_cast<int>(s.lambda.size()) - s.n_conserved;
    for (int m = 0; m < nd; ++m) {
        Eigen::Matrix3d g = s.lambda[m] * p.col(m) * b.row(m);
        out.terms.push_back({-s.lambda[m], Tensor4(2, g)});
    }
    out.source = "cell eigenbasis";
    return out;
}

// --- Laplace of samples ------------------------------------------------------

CTensor4 laplace_of_samples(const MemoryKernelSamples &s, cdouble z) {
    return laplace_of_samples(s, z, fit_exponential(s));
}

CTensor4 laplace_of_samples(const MemoryKernelSamples &s, cdouble z, const DecayFit &tail) {
    if (!(z.real() > 0)) throw Error(ErrorKind::InvalidParameter, "Laplace variable needs Re z > 0");
    const int dim = s.S[0].dim();
    const int m = packed_size(dim);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(m, m);
    for (size_t k = 0; k + 1 < s.t.size(); ++k) {
        double dt = s.t[k + 1] - s.t[k];
        cdouble x = z * dt;
        cdouble q0, q1;  // int_0^1 e^{-x u} (1-u) du, int_0^1 e^{-x u} u du
        if (std::abs(x) < 1e-3) {
            q0 = 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
            q1 = 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
        } else {
            cdouble ex = std::exp(-x);
            q1 = (1.0 - ex * (1.0 + x)) / (x * x);
            q0 = (1.0 - ex) / x - q1;
        }
        cdouble f = std::exp(-z * s.t[k]) * dt;
        acc += f * (q0 * s.S[k].matrix().cast<cdouble>() + q1 * s.S[k + 1].matrix().cast<cdouble>());
    }
    double tend = s.t.back();
    acc += s.S.back().matrix().cast<cdouble>() * (std::exp(-z * tend) / (z + tail.lambda_hat));
    return CTensor4(dim, acc);
}

// --- passivity ---------------------------------------------------------------

std::vector<cdouble> default_passivity_grid() {
    std::vector<cdouble> out;
    const double ims[] = {0.0, 0.5, -0.5, 2.0, -2.0, 10.0, -10.0, 50.0, -50.0};
    for (int i = 0; i < 7; ++i) {
        double re = std::pow(10.0, -2.0 + 3.0 * i / 6.0);
        for (double im : ims) out.emplace_back(re, im);
    }
    return out;
}

std::vector<Eigen::VectorXcd> passivity_xi_set(int n_random, std::uint64_t seed, int dim) {
    const int m = packed_size(dim);
    std::vector<Eigen::VectorXcd> out;
    for (int k = 0; k < m; ++k) out.push_back(Eigen::VectorXcd::Unit(m, k));
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int r = 0; r < n_random; ++r) {
        Eigen::VectorXcd v(m);
        for (int k = 0; k < m; ++k) v[k] = cdouble(nd(gen), nd(gen));
        out.push_back(v / v.norm());
    }
    return out;
}

PassivityReport certify_passivity(const Tensor4 &A_h, const LaplaceFn &LS, const std::vector<cdouble> &z_grid,
                                  const std::vector<Eigen::VectorXcd> &xi_set) {
    PassivityReport rep;
    rep.c = rep.min_margin1 = rep.min_margin2 = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXcd ah = A_h.matrix().cast<cdouble>();
    for (cdouble z : z_grid) {
        if (!(z.real() > 0)) throw Error(ErrorKind::InvalidParameter, "passivity grid must lie in Re z > 0");
        Eigen::MatrixXcd m = ah + LS(z).matrix();
        for (size_t j = 0; j < xi_set.size(); ++j) {
            const Eigen::VectorXcd &xi = xi_set[j];
            double n2 = xi.squaredNorm();
            // (M xi) : conj(z xi) = conj(z) xi^H M xi
            cdouble w = std::conj(z) * xi.dot(m * xi);
            PassivityPoint p;
            p.z = z;
            p.xi = static_cast<int>(j);
            p.raw1 = w.real();
            p.raw2 = -w.imag() * z.imag();
            double az2 = std::norm(z);
            p.margin1 = p.raw1 / ((z.real() + az2 / (1.0 + az2)) * n2);
            p.margin2 = z.imag() != 0.0 ? p.raw2 / (z.imag() * z.imag() * n2)
                                        : std::numeric_limits<double>::infinity();
            rep.min_margin1 = std::min(rep.min_margin1, p.margin1);
            rep.min_margin2 = std::min(rep.min_margin2, p.margin2);
            rep.points.push_back(p);
        }
    }
    rep.c = std::min(rep.min_margin1, rep.min_margin2);
    rep.pass = rep.c > 0 && std::isfinite(rep.c);
    return rep;
}

// --- work inequality ---------------------------------------------------------

WorkInequality check_prASnl(const Tensor4 &A_h, const PronyKernel &kernel, const std::vector<double> &t,
                            const std::vector<Eigen::VectorXd> &E, int substeps) {
    if (t.size() != E.size() || t.size() < 2) throw Error(ErrorKind::InvalidParameter, "need at least 2 path points");
    if (E[0].norm() != 0.0) throw Error(ErrorKind::InvalidParameter, "path must start at E(0) = 0");
    if (substeps < 1) throw Error(ErrorKind::InvalidParameter, "substeps must be positive");
    const int m = packed_size(A_h.dim());
    const Eigen::MatrixXd ah = A_h.matrix();
    const int nk = static_cast<int>(kernel.terms.size());
    std::vector<Eigen::VectorXd> hist(nk, Eigen::VectorXd::Zero(m));
    Eigen::VectorXd V = Eigen::VectorXd::Zero(m);
    WorkInequality w;
    auto power = [&](const Eigen::VectorXd &e, const Eigen::VectorXd &de) {
        Eigen::VectorXd sig = ah * e;
        for (int k = 0; k < nk; ++k) sig += kernel.terms[k].weight.matrix() * hist[k];
        return sig.dot(de);
    };
    for (size_t seg = 0; seg + 1 < t.size(); ++seg) {
        double T = t[seg + 1] - t[seg];
        if (!(T > 0)) throw Error(ErrorKind::InvalidParameter, "path times must increase");
        Eigen::VectorXd de = (E[seg + 1] - E[seg]) / T;
        double h = T / substeps;
        for (int j = 0; j < substeps; ++j) {
            Eigen::VectorXd e0 = E[seg] + de * (j * h), e1 = E[seg] + de * ((j + 1) * h);
            double p0 = power(e0, de);
            double v0 = V.squaredNorm();
            // H_k' = -gamma_k H_k + E, exact for linear E.
            for (int k = 0; k < nk; ++k) {
                double x = kernel.terms[k].rate * h;
                double ex = std::exp(-x), a0, a1;
                if (x < 1e-6) {
                    a0 = h * (0.5 - x / 3.0);
                    a1 = h * (0.5 - x / 6.0);
                } else {
                    double p1 = (1.0 - ex) / x, p2 = (x - 1.0 + ex) / (x * x);
                    a1 = h * p2;
                    a0 = h * (p1 - p2);
                }
                hist[k] = ex * hist[k] + a0 * e0 + a1 * e1;
            }
            V = std::exp(-h) * V + (1.0 - std::exp(-h)) * de;
            double p1 = power(e1, de);
            w.lhs += 0.5 * h * (p0 + p1);
            w.v_integral += 0.5 * h * (v0 + V.squaredNorm());
        }
    }
    w.e_final = E.back().squaredNorm();
    w.v_final = V.squaredNorm();
    w.rhs = w.e_final + w.v_integral + w.v_final;
    w.margin = w.rhs > 0 ? w.lhs / w.rhs : 0.0;
    return w;
}

// --- closed-form example -----------------------------------------------------

CTensor4 PrexKernel::LS(cdouble z) const {
    return CTensor4(B.dim(), -B.matrix().cast<cdouble>() / (gamma + z));
}

PrexKernel prex_kernel(const Tensor4 &A_h, const Tensor4 &B, double gamma) {
    if (!(gamma > 0)) throw Error(ErrorKind::InvalidParameter, "gamma must be positive");
    if (A_h.dim() != B.dim()) throw Error(ErrorKind::InvalidParameter, "A_h and B dimensions differ");
    if (A_h.symmetry_defect() > 1e-10 || B.symmetry_defect() > 1e-10)
        throw Error(ErrorKind::InvalidParameter, "A_h and B must be symmetric");
    PrexKernel p;
    p.B = B;
    p.gamma = gamma;
    p.kernel.A_h = A_h;
    p.kernel.terms.push_back({gamma, B * -1.0});
    p.kernel.source = "closed form";
    p.condition_holds = min_sym_eigenvalue(A_h * gamma - B) > 0;
    return p;
}

} // namespace homog
