#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "homog/kernel_analysis.hpp"

using namespace homog;

namespace {

Tensor4 spd(double a, double b, double c) {
    Eigen::Matrix3d m;
    m << a, b, 0, b, a, 0, 0, 0, c;
    return Tensor4(2, m);
}

// S(t) = -W1 exp(-r1 t) - W2 exp(-r2 t)
PronyKernel two_term() {
    PronyKernel k;
    k.A_h = spd(4.0, 1.0, 2.5);
    k.terms = {{0.5, spd(-0.3, -0.1, -0.2)}, {3.0, spd(-1.0, 0.2, -0.6)}};
    return k;
}

MemoryKernelSamples sample(const PronyKernel &k, double tmax, int n) {
    MemoryKernelSamples s;
    s.A_h = k.A_h;
    for (int i = 0; i <= n; ++i) {
        double t = tmax * std::pow(static_cast<double>(i) / n, 1.5);
        s.t.push_back(t);
        s.S.push_back(k.eval(t));
    }
    return s;
}

} // namespace

TEST_CASE("Prony kernel evaluation and closed-form Laplace") {
    PronyKernel k = two_term();
    Eigen::Matrix3d expect = k.terms[0].weight.matrix() * std::exp(-0.5 * 2.0) + k.terms[1].weight.matrix() * std::exp(-6.0);
    CHECK((k.eval(2.0).matrix() - expect).norm() < 1e-15);
    cdouble z(1.0, 2.0);
    Eigen::Matrix3cd lz = k.terms[0].weight.matrix().cast<cdouble>() / (z + 0.5) +
                          k.terms[1].weight.matrix().cast<cdouble>() / (z + 3.0);
    CHECK((k.laplace(z).matrix() - lz).norm() < 1e-15);
    CHECK(k.min_rate() == 0.5);
    CHECK_THROWS_AS(k.laplace(cdouble(-0.5, 0.0)), Error);
}

TEST_CASE("exponential fit recovers a single rate") {
    PronyKernel k;
    k.A_h = spd(2, 0, 1);
    k.terms = {{0.8, spd(-1.0, 0.3, -0.5)}};
    MemoryKernelSamples s = sample(k, 30.0, 300);
    DecayFit f = fit_exponential(s);
    CHECK(f.lambda_hat == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(f.Lambda_hat == doctest::Approx(k.terms[0].weight.norm()).epsilon(1e-8));
    CHECK(f.r_squared > 1.0 - 1e-12);
    MemoryKernelSamples grow = s;
    for (size_t i = 0; i < grow.S.size(); ++i) grow.S[i] = k.terms[0].weight * std::exp(0.1 * grow.t[i]);
    CHECK_THROWS_AS(fit_exponential(grow), Error);
}

TEST_CASE("Prony fit recovers a two-term kernel") {
    PronyKernel k = two_term();
    MemoryKernelSamples s = sample(k, 40.0, 400);
    PronyKernel one = fit_prony(s, 1), two = fit_prony(s, 2);
    CHECK(one.residual > two.residual);
    REQUIRE(two.terms.size() == 2);
    CHECK(two.terms[0].rate == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(two.terms[1].rate == doctest::Approx(3.0).epsilon(1e-6));
    CHECK((two.terms[1].weight.matrix() - k.terms[1].weight.matrix()).norm() < 1e-6);
    CHECK(two.residual < 1e-8);
    CHECK_THROWS_AS(fit_prony(s, 0), Error);
}

TEST_CASE("quadrature Laplace of samples matches the closed form") {
    PronyKernel k = two_term();
    MemoryKernelSamples s;
    s.A_h = k.A_h;
    for (int i = 0; i <= 20000; ++i) {
        s.t.push_back(40.0 * i / 20000);
        s.S.push_back(k.eval(s.t.back()));
    }
    for (cdouble z : {cdouble(0.5), cdouble(1.0, 1.0), cdouble(0.1, 10.0)}) {
        Eigen::MatrixXcd a = laplace_of_samples(s, z).matrix(), b = k.laplace(z).matrix();
        CHECK((a - b).norm() < 1e-5 * b.norm());
    }
}

TEST_CASE("passivity certificate on the closed-form kernel") {
    auto grid = default_passivity_grid();
    CHECK(grid.size() == 63);
    auto xi = passivity_xi_set(20, 7);
    REQUIRE(xi.size() == 23);
    for (const auto &x : xi) CHECK(x.norm() == doctest::Approx(1.0));
    auto again = passivity_xi_set(20, 7);
    CHECK((again.back() - xi.back()).norm() == 0.0);

    Tensor4 ah = Tensor4::identity(2) * 2.0;
    PrexKernel good = prex_kernel(ah, Tensor4::identity(2), 1.0);
    CHECK(good.condition_holds);
    PassivityReport r = certify_passivity(ah, [&](cdouble z) { return good.LS(z); }, grid, xi);
    CHECK(r.pass);
    CHECK(r.c > 0.0);
    // Real axis: the second margin does not constrain.
    for (const auto &p : r.points)
        if (p.z.imag() == 0.0) CHECK(std::isinf(p.margin2));

    PrexKernel bad = prex_kernel(ah, Tensor4::identity(2) * 5.0, 1.0);
    CHECK_FALSE(bad.condition_holds);
    PassivityReport rb = certify_passivity(ah, [&](cdouble z) { return bad.LS(z); }, grid, xi);
    CHECK_FALSE(rb.pass);
    CHECK(rb.c < 0.0);
    CHECK_THROWS_AS(prex_kernel(ah, Tensor4::identity(2), 0.0), Error);
}

TEST_CASE("work inequality without memory") {
    PronyKernel none;
    none.A_h = Tensor4::identity(2) * 3.0;
    std::vector<double> t{0.0, 1.0, 2.5};
    std::vector<Eigen::VectorXd> E{Eigen::VectorXd::Zero(3), Eigen::Vector3d(1.0, 0.0, 0.5), Eigen::Vector3d(0.2, -1.0, 0.0)};
    WorkInequality w = check_prASnl(none.A_h, none, t, E);
    // int A E : E' = A |E(T)|^2 / 2 for a constant symmetric A.
    CHECK(w.lhs == doctest::Approx(1.5 * E.back().squaredNorm()).epsilon(1e-12));
    CHECK(w.e_final == doctest::Approx(E.back().squaredNorm()));
    CHECK(w.margin > 0.0);
    E[0] = Eigen::Vector3d(1, 0, 0);
    CHECK_THROWS_AS(check_prASnl(none.A_h, none, t, E), Error);
}

TEST_CASE("work inequality with the closed-form kernel") {
    Tensor4 ah = Tensor4::identity(2) * 2.0;
    PrexKernel p = prex_kernel(ah, Tensor4::identity(2), 1.0);
    std::vector<double> t{0.0, 0.5, 1.5, 3.0};
    std::vector<Eigen::VectorXd> E{Eigen::VectorXd::Zero(3), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(-1, 1, 0),
                                   Eigen::Vector3d(0, 0, 2)};
    WorkInequality a = check_prASnl(ah, p.kernel, t, E, 64), b = check_prASnl(ah, p.kernel, t, E, 256);
    CHECK(a.margin > 0.0);
    CHECK(std::abs(a.lhs - b.lhs) < 1e-3 * std::abs(b.lhs));
}
