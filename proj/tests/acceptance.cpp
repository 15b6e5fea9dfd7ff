// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "homog/cell_operators.hpp"
#include "homog/kernel_analysis.hpp"
#include "homog/macro_solver.hpp"

using namespace homog;

namespace {

// Tolerances
constexpr double kAhDualTol = 1e-8;
constexpr double kSymTol = 1e-8;
constexpr double kRuntimeLimit = 30.0;
constexpr double kR2Min = 0.99;
constexpr double kLaplaceTol = 1e-3;
constexpr double kRatioMin = 3.5;
constexpr double kSemigroupTol = 1e-9;
constexpr double kEnergyRise = 1e-10;
constexpr double kLedgerRise = 1e-12;
constexpr double kDriftTol = 1e-6;
constexpr double kRecursionTol = 1e-8;
constexpr double kGoldenTol = 0.10;
constexpr double kPrexTol = 1e-6;
// Coercivity floor of the default cell (R = 0.25, iso(1, 1), mu = 1, h = 0.05)
// on the default grid with the packed basis, frozen from a pipeline run.
constexpr double kCoercivityGolden = 0.19628792614531287;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(const char *id, const std::function<Outcome()> &fn) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
        o = fn();
    } catch (const std::exception &e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), s);
    std::fflush(stdout);
}

std::string fmt(const char *f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double rel(const Eigen::MatrixXcd &a, const Eigen::MatrixXcd &b) { return (a - b).norm() / b.norm(); }

Eigen::VectorXd randn(std::mt19937_64 &rng, int n) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

CellGeometry disk(double h) {
    CellGeometry g;
    g.radius = 0.25;
    g.h = h;
    return g;
}

MacroSpec rod(const PronyKernel &k, int nx = 16) {
    MacroSpec s;
    s.dim = 1;
    s.nx = nx;
    s.A_h = k.A_h;
    s.kernel = k;
    s.u0 = [](const Eigen::VectorXd &x) { return Eigen::VectorXd::Constant(1, std::sin(M_PI * x[0])); };
    return s;
}

} // namespace

int main() {
    std::unique_ptr<CellDiscretization> disc;
    std::unique_ptr<CellOperatorSet> ops;
    Tensor4 ah(2);
    MemoryKernelSamples samples;
    DecayFit fit;
    PronyKernel prony;

    criterion("AC1", [&] {
        auto t0 = std::chrono::steady_clock::now();
        disc = std::make_unique<CellDiscretization>(build_cell(disk(0.05)));
        ops = std::make_unique<CellOperatorSet>(*disc, iso_tensor(1.0, 1.0), 1.0);
        ah = compute_Ah(*ops);
        Tensor4 ae = compute_Ah_energy(*ops);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double dual = (ah.matrix() - ae.matrix()).norm() / ah.norm();
        double sym = ah.symmetry_defect(), mine = min_sym_eigenvalue(ah, kSymTol);
        return Outcome{dual < kAhDualTol && sym < kSymTol && mine > 0 && secs < kRuntimeLimit,
                       fmt("flux/energy rel diff %.2e, symmetry %.2e, min eig %.6f, %.1f s", dual, sym, mine, secs)};
    });

    criterion("AC2", [&] {
        samples = sample_S(*ops, default_time_grid(*ops));
        double sym = 0.0;
        for (const auto &s : samples.S) sym = std::max(sym, s.symmetry_defect());
        fit = fit_exponential(samples);
        return Outcome{sym < kSymTol && fit.r_squared >= kR2Min && fit.lambda_hat > 0,
                       fmt("%.0f samples, max symmetry defect %.2e, tail R^2 %.5f, lambda_hat %.4f",
                           static_cast<double>(samples.t.size()), sym, fit.r_squared, fit.lambda_hat)};
    });

    criterion("AC3", [&] {
        double worst = 0.0;
        for (cdouble z : {cdouble(0.5), cdouble(1.0), cdouble(1.0, 1.0), cdouble(2.0, 4.0), cdouble(0.1, 10.0)}) {
            Eigen::MatrixXcd quad = ah.matrix().cast<cdouble>() + laplace_of_samples(samples, z, fit).matrix();
            worst = std::max(worst, rel(quad, laplace_direct(*ops, z).matrix()));
        }
        return Outcome{worst < kLaplaceTol, fmt("max rel diff over 5 z: %.2e", worst)};
    });

    criterion("AC4", [&] {
        auto xi = passivity_xi_set(20, 1);
        PassivityReport r = certify_passivity(
            samples.A_h, [&](cdouble z) { return laplace_of_samples(samples, z, fit); }, default_passivity_grid(), xi);
        return Outcome{r.pass && r.c > 0, fmt("c = %.4f (min margin1 %.4f, margin2 %.4f), %.0f points", r.c, r.min_margin1,
                                              r.min_margin2, static_cast<double>(r.points.size()))};
    });

    criterion("AC5", [&] {
        std::vector<double> res;
        Eigen::Vector3d xi(1.0, 0.0, 0.0);
        for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
            std::vector<double> t;
            std::vector<Eigen::Vector3d> E;
            int n = static_cast<int>(std::lround(2.0 / dt));
            for (int i = 0; i <= n; ++i) {
                t.push_back(i * dt);
                E.push_back(std::sin(i * dt) * xi);
            }
            res.push_back(micro_energy_residual(*ops, t, E).residual);
        }
        double r1 = res[0] / res[1], r2 = res[1] / res[2], r3 = res[2] / res[3];
        return Outcome{std::min({r1, r2, r3}) >= kRatioMin,
                       fmt("residual ratios %.3f %.3f %.3f, finest %.2e", r1, r2, r3, res[3])};
    });

    criterion("AC6", [&] {
        prony = fit_prony(samples, 4);
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> seg(0.1, 1.0);
        std::uniform_int_distribution<int> nseg(2, 6);
        double worst = 1e300;
        for (int k = 0; k < 100; ++k) {
            std::vector<double> t{0.0};
            std::vector<Eigen::VectorXd> E{Eigen::VectorXd::Zero(3)};
            for (int s = nseg(rng); s > 0; --s) {
                t.push_back(t.back() + seg(rng));
                E.push_back(randn(rng, 3));
            }
            worst = std::min(worst, check_prASnl(prony.A_h, prony, t, E).margin);
        }
        return Outcome{worst > 0, fmt("min margin over 100 paths %.4f (Prony K = 4, residual %.1e)", worst, prony.residual)};
    });

    criterion("AC7", [&] {
        const TSpectrum &s = ops->spectrum();
        std::mt19937_64 rng(7);
        double law = 0.0, rise = 0.0;
        for (int k = 0; k < 10; ++k) {
            Eigen::VectorXd c = randn(rng, s.T.rows());
            double a = 0.2 + 0.3 * k, b = 0.9 + 0.1 * k;
            law = std::max(law, (semigroup_coords(*ops, a + b, c) - semigroup_coords(*ops, a, semigroup_coords(*ops, b, c))).norm() /
                                    c.norm());
        }
        std::vector<double> grid = default_time_grid(*ops);
        for (int k = 0; k < 20; ++k) {
            Eigen::VectorXd c = randn(rng, s.T.rows());
            double prev = c.dot(s.gram * c);
            for (double t : grid) {
                Eigen::VectorXd ct = semigroup_coords(*ops, t, c);
                double e = ct.dot(s.gram * ct);
                rise = std::max(rise, (e - prev) / prev);
                prev = e;
            }
        }
        // One eigenvalue is zero: the interface volume flux is conserved. The
        // abscissa is taken on the volume-preserving complement.
        double abscissa = s.decay_abscissa();
        return Outcome{law < kSemigroupTol && rise < kEnergyRise && abscissa < 0,
                       fmt("law %.2e, energy rise %.2e, abscissa %.4f (volume-free; full %.1e)", law, rise, abscissa,
                           s.abscissa())};
    });

    criterion("AC8", [&] {
        Tensor4 a2 = Tensor4::identity(2) * 2.0;
        PrexKernel p = prex_kernel(a2, Tensor4::identity(2), 1.0);
        MacroProblem mp = build_macro_problem(rod(p.kernel));
        MacroRun r = run(mp, 5.0, 0.01);
        PrexKernel p0 = prex_kernel(a2, Tensor4::zero(2), 1.0);
        MacroProblem m0 = build_macro_problem(rod(p0.kernel));
        MacroRun r0 = run(m0, 10.0, 0.01);
        double e0 = r0.energy.front().total, drift = 0.0;
        for (const auto &row : r0.energy) drift = std::max(drift, std::abs(row.total - e0) / e0);
        return Outcome{r.max_increase <= kLedgerRise && drift < kDriftTol,
                       fmt("max step increase %.2e (B = I), drift %.2e over %.0f steps (B = 0)", r.max_increase, drift,
                           static_cast<double>(r0.energy.size() - 1))};
    });

    criterion("AC9", [&] {
        PrexKernel p = prex_kernel(Tensor4::identity(2) * 2.0, Tensor4::identity(2), 1.0);
        MacroProblem mp = build_macro_problem(rod(p.kernel));
        Eigen::VectorXd phi = Eigen::VectorXd::LinSpaced(mp.n_free(), 0.5, 1.5);
        std::vector<double> t;
        std::vector<Eigen::VectorXd> u;
        for (int i = 0; i <= 200; ++i) {
            t.push_back(0.01 * i);
            u.push_back((i < 100 ? t.back() : 2.0 - t.back()) * phi);
        }
        double single = convolution_consistency(mp, t, u, DirectRule::Product).max_deviation;
        // Multi-term cell kernel: second order against the trapezoid sum.
        MacroProblem mc = build_macro_problem(rod(prony));
        MacroRun a = run(mc, 2.0, 0.02), b = run(mc, 2.0, 0.01);
        double multi = convolution_consistency(mc, b.t, b.u, DirectRule::Product).max_deviation;
        double da = convolution_consistency(mc, a.t, a.u).max_deviation, db = convolution_consistency(mc, b.t, b.u).max_deviation;
        return Outcome{single < kRecursionTol && multi < kRecursionTol && da / db >= kRatioMin,
                       fmt("single-term %.2e, 4-term exact %.2e, trapezoid ratio %.3f (%.2e)", single, multi, da / db, db)};
    });

    criterion("AC10", [&] {
        std::vector<Eigen::VectorXcd> xi;
        for (int j = 0; j < 3; ++j) xi.push_back(Eigen::Vector3cd::Unit(j));
        CoercivityReport r = coercivity_scan(*ops, default_coercivity_grid(), xi);
        double dev = std::abs(r.floor - kCoercivityGolden) / kCoercivityGolden;
        return Outcome{r.floor > 0 && dev <= kGoldenTol,
                       fmt("floor %.6f, golden %.6f, rel deviation %.2e", r.floor, kCoercivityGolden, dev)};
    });

    criterion("AC11", [&] {
        std::vector<Eigen::Matrix3d> a;
        for (double h : {0.1, 0.05, 0.025}) {
            CellDiscretization d = build_cell(disk(h));
            CellOperatorSet o(d, iso_tensor(1.0, 1.0), 1.0);
            a.push_back(compute_Ah(o).matrix());
        }
        double d1 = (a[1] - a[0]).cwiseAbs().maxCoeff(), d2 = (a[2] - a[1]).cwiseAbs().maxCoeff();
        return Outcome{d2 < d1, fmt("successive max differences %.3e, %.3e (A_11 = %.6f at h = 0.025)", d1, d2, a[2](0, 0))};
    });

    criterion("AC12", [&] {
        Tensor4 a2 = Tensor4::identity(2) * 2.0;
        PrexKernel p = prex_kernel(a2, Tensor4::identity(2), 1.0);
        MemoryKernelSamples s;
        for (int i = 0; i <= 40000; ++i) {
            s.t.push_back(40.0 * i / 40000);
            s.S.push_back(p.kernel.eval(s.t.back()));
        }
        DecayFit tail = fit_exponential(s);
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
            cdouble z(0.2 + 0.5 * k, (k % 3 - 1) * 1.5 * k);
            worst = std::max(worst, rel(laplace_of_samples(s, z, tail).matrix(), p.LS(z).matrix()));
        }
        auto grid = default_passivity_grid();
        auto xi = passivity_xi_set(20, 1);
        PassivityReport good = certify_passivity(a2, [&](cdouble z) { return p.LS(z); }, grid, xi);
        PrexKernel q = prex_kernel(Tensor4::identity(2), Tensor4::identity(2) * 3.0, 1.0);
        PassivityReport bad = certify_passivity(Tensor4::identity(2), [&](cdouble z) { return q.LS(z); }, grid, xi);
        return Outcome{worst < kPrexTol && good.pass && !bad.pass,
                       fmt("Laplace rel diff %.2e, c = %.4f (gamma A_h - B > 0), c = %.4f (indefinite)", worst, good.c, bad.c)};
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
