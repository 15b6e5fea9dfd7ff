#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "homog/macro_solver.hpp"

using namespace homog;

namespace {

MacroSpec rod(double a, double b, double gamma, int nx = 16) {
    MacroSpec s;
    s.dim = 1;
    s.nx = nx;
    s.A_h = Tensor4::identity(2) * a;
    s.kernel.A_h = s.A_h;
    if (b > 0) s.kernel.terms = {{gamma, Tensor4::identity(2) * -b}};
    s.u0 = [](const Eigen::VectorXd &x) { return Eigen::VectorXd::Constant(1, std::sin(M_PI * x[0])); };
    return s;
}

double midpoint_value(const MacroProblem &p, const Eigen::VectorXd &u) {
    Eigen::MatrixXd f = p.full_field(u);
    for (int i = 0; i < p.n_nodes(); ++i)
        if (std::abs(p.nodes(i, 0) - 0.5) < 1e-12) return f(i, 0);
    FAIL("no node at x = 1/2");
    return 0.0;
}

// Modal amplitude of sin(pi x) under rho q'' + pi^2 (a q - b w) = 0, w' = q - gamma w,
// integrated with classical RK4.
double modal_reference(double rho, double a, double b, double gamma, double T) {
    using V = std::array<double, 3>;  // q, q', w
    auto rhs = [&](const V &y) { return V{y[1], -M_PI * M_PI * (a * y[0] - b * y[2]) / rho, y[0] - gamma * y[2]}; };
    V y{1.0, 0.0, 0.0};
    const int n = 200000;
    double h = T / n;
    for (int i = 0; i < n; ++i) {
        V k1 = rhs(y), y2, y3, y4;
        for (int j = 0; j < 3; ++j) y2[j] = y[j] + 0.5 * h * k1[j];
        V k2 = rhs(y2);
        for (int j = 0; j < 3; ++j) y3[j] = y[j] + 0.5 * h * k2[j];
        V k3 = rhs(y3);
        for (int j = 0; j < 3; ++j) y4[j] = y[j] + h * k3[j];
        V k4 = rhs(y4);
        for (int j = 0; j < 3; ++j) y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return y[0];
}

} // namespace

TEST_CASE("helpers") {
    CHECK(effective_density(2.0, 1.0, 0.25) == doctest::Approx(1.75));
    Tensor4 r = restrict_tensor(iso_tensor(1.0, 1.0), 1);
    CHECK(r.dim() == 1);
    CHECK(r(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("standing wave without memory") {
    // u = sin(pi x) cos(omega t), omega = pi sqrt(a / rho)
    std::vector<double> err;
    for (double dt : {0.02, 0.01, 0.005}) {
        MacroProblem p = build_macro_problem(rod(2.0, 0.0, 1.0));
        MacroRun r = run(p, 1.0, dt);
        double exact = std::cos(M_PI * std::sqrt(2.0));
        err.push_back(std::abs(midpoint_value(p, r.u.back()) - exact));
        double e0 = r.energy.front().total;
        for (const auto &row : r.energy) CHECK(std::abs(row.total - e0) < 1e-12 * e0);
    }
    CHECK(err[2] < 1e-3);
    CHECK(err[0] / err[1] > 3.5);
    CHECK(err[1] / err[2] > 3.5);
}

TEST_CASE("single memory term against the modal ODE") {
    MacroProblem p = build_macro_problem(rod(2.0, 1.0, 1.0, 32));
    MacroRun r = run(p, 2.0, 0.0025);
    double ref = modal_reference(1.0, 2.0, 1.0, 1.0, 2.0);
    CHECK(midpoint_value(p, r.u.back()) == doctest::Approx(ref).epsilon(2e-4));
    CHECK(r.max_increase <= 1e-12);
    CHECK(r.balance_residual < 1e-10);
    CHECK(r.energy.back().dissipated > 0.0);
}

TEST_CASE("auxiliary-variable form agrees with the convolution form") {
    MacroProblem p = build_macro_problem(rod(2.0, 1.0, 1.0));
    PbejRun a = solve_pbej_auxiliary(p, 1.0, 0.005);
    MacroRun b = run(p, 1.0, 0.005);
    CHECK((a.u.back() - b.u.back()).norm() < 1e-3 * b.u.back().norm());
    MacroProblem two = build_macro_problem(rod(2.0, 1.0, 1.0));
    two.kernel.terms.push_back({3.0, Tensor4::identity(2) * -0.5});
    CHECK_THROWS_AS(solve_pbej_auxiliary(two, 1.0, 0.01), Error);
}

TEST_CASE("recursive memory stress against direct sums") {
    MacroProblem p = build_macro_problem(rod(2.0, 1.0, 1.0));
    MacroRun r = run(p, 1.0, 0.01);
    CHECK(convolution_consistency(p, r.t, r.u, DirectRule::Product).max_deviation < 1e-8);
    CHECK(convolution_consistency(p, r.t, r.u, DirectRule::Trapezoid).max_deviation < 1e-3);
}

TEST_CASE("initial data and forcing") {
    MacroSpec s = rod(2.0, 1.0, 1.0);
    s.u0 = [](const Eigen::VectorXd &x) { return Eigen::VectorXd::Constant(1, 1.0 + x[0]); };
    CHECK_THROWS_AS(build_macro_problem(s), Error);

    MacroSpec z = rod(2.0, 1.0, 1.0);
    z.u0 = nullptr;
    MacroProblem pz = build_macro_problem(z);
    MacroRun rz = run(pz, 0.5, 0.01);
    for (const auto &u : rz.u) CHECK(u.norm() == 0.0);

    MacroSpec f = z;
    f.f = [](double, const Eigen::VectorXd &) { return Eigen::VectorXd::Constant(1, 1.0); };
    MacroProblem pf = build_macro_problem(f);
    MacroRun rf = run(pf, 0.5, 0.01);
    CHECK(rf.u.back().norm() > 0.0);
    CHECK(rf.energy.back().total > 0.0);
    CHECK(rf.balance_residual < 1e-10);
}

TEST_CASE("initial memory forcing is read only when requested") {
    MacroSpec s = rod(2.0, 1.0, 1.0);
    s.R_t = {0.0, 1.0, 2.0};
    s.R_table = {Tensor4::identity(2) * 0.3, Tensor4::identity(2) * 0.1, Tensor4::zero(2)};
    s.well_prepared = true;
    MacroProblem a = build_macro_problem(s);
    MacroRun ra = run(a, 0.5, 0.01);
    CHECK(a.R_evaluations == 0);
    s.well_prepared = false;
    MacroProblem b = build_macro_problem(s);
    MacroRun rb = run(b, 0.5, 0.01);
    CHECK(b.R_evaluations > 0);
    CHECK((ra.u.back() - rb.u.back()).norm() > 0.0);
    CHECK(b.R_at(5.0)(0, 0) == 0.0);
    CHECK(b.R_at(0.5)(0, 0) == doctest::Approx(0.2));
}

TEST_CASE("two-dimensional ledger") {
    MacroSpec s;
    s.dim = 2;
    s.nx = 6;
    s.ny = 6;
    s.A_h = iso_tensor(1.0, 1.0);
    s.kernel.A_h = s.A_h;
    s.kernel.terms = {{1.0, Tensor4::identity(2) * -0.3}, {4.0, Tensor4::identity(2) * -0.2}};
    s.u0 = [](const Eigen::VectorXd &x) {
        double b = std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
        return Eigen::Vector2d(b, 0.5 * b).eval();
    };
    MacroProblem p = build_macro_problem(s);
    CHECK(p.ncomp == 2);
    MacroRun r = run(p, 1.0, 0.01);
    CHECK(r.max_increase <= 1e-12);
    CHECK(r.balance_residual < 1e-10);
    CHECK(r.energy.back().total < r.energy.front().total);
}
