#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "homog/cell_operators.hpp"

using namespace homog;

namespace {

struct Fixture {
    CellDiscretization disc;
    CellOperatorSet ops;
    Fixture() : disc(build_cell(geometry())), ops(disc, iso_tensor(1.0, 1.0), 1.0) {}
    static CellGeometry geometry() {
        CellGeometry g;
        g.radius = 0.25;
        g.h = 0.1;
        return g;
    }
};

Fixture &fx() {
    static Fixture f;
    return f;
}

Eigen::VectorXd randn(std::mt19937_64 &rng, int n) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

double min_eig(const Eigen::Matrix3d &m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(0.5 * (m + m.transpose())).eigenvalues()[0];
}

} // namespace

TEST_CASE("effective tensor: two formulas, symmetry, bounds") {
    const auto &ops = fx().ops;
    Tensor4 ah = compute_Ah(ops), ae = compute_Ah_energy(ops);
    CHECK((ah.matrix() - ae.matrix()).norm() < 1e-8 * ah.norm());
    CHECK(ah.symmetry_defect() < 1e-8);
    // Square cell with a centred disk: cubic symmetry.
    CHECK(ah(0, 0) == doctest::Approx(ah(1, 1)).epsilon(1e-8));
    CHECK(std::abs(ah(0, 2)) < 1e-8);
    CHECK(std::abs(ah(1, 2)) < 1e-8);
    // Relaxation orders the tensors: drained perforated cell <= long-time
    // response A_h + LS(0+) <= instantaneous A_h.
    Eigen::Matrix3d relaxed = laplace_modal(ops, cdouble(1e-9, 0.0)).matrix().real();
    CHECK(min_eig(ah.matrix() - relaxed) > -1e-10);
    CHECK(min_eig(relaxed - ops.perforated_tensor().matrix()) > -1e-8);
    CHECK(min_sym_eigenvalue(ah, 1e-8) > 0.0);
}

TEST_CASE("T is dissipative and maps into the rigid-free space") {
    const auto &ops = fx().ops;
    const auto &d = fx().disc;
    std::mt19937_64 rng(11);
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd h = project_Q(d, randn(rng, d.trace_size())).values;
        CHECK(rigid_defect(d, apply_T(ops, h)) < 1e-10);
    }
    const TSpectrum &s = ops.spectrum();
    CHECK(s.residual < 1e-8);
    CHECK(s.n_conserved == 1);
    CHECK(s.decay_abscissa() < 0.0);
    CHECK(s.abscissa() < 1e-10 * std::abs(s.lambda.minCoeff()));
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd g = randn(rng, s.T.rows());
        CHECK(g.dot(s.gram * (s.T * g)) <= 0.0);
    }
    // The conserved mode carries interface volume flux.
    Eigen::VectorXd v = s.modes.col(s.lambda.size() - 1);
    double flux = normal_flux_row(d).dot(from_h_coords(d, v));
    CHECK(std::abs(flux) > 1e-6);
    CHECK_THROWS_AS(solve_R1(ops, Eigen::VectorXd::Ones(d.trace_size())), Error);
}

TEST_CASE("semigroup law and energy decay") {
    const auto &ops = fx().ops;
    std::mt19937_64 rng(2);
    Eigen::VectorXd c = randn(rng, ops.h_dim());
    Eigen::VectorXd a = semigroup_coords(ops, 0.7, semigroup_coords(ops, 1.3, c));
    CHECK((a - semigroup_coords(ops, 2.0, c)).norm() < 1e-9 * c.norm());
    double prev = elastic_energy(ops, c);
    for (double t : {0.01, 0.1, 0.5, 2.0, 8.0}) {
        double e = elastic_energy(ops, semigroup_coords(ops, t, c));
        CHECK(e <= prev * (1 + 1e-12));
        prev = e;
    }
    CHECK_THROWS_AS(semigroup_coords(ops, -1.0, c), Error);
}

TEST_CASE("kernel samples: symmetric, consistent at t = 0") {
    const auto &ops = fx().ops;
    auto grid = default_time_grid(ops);
    REQUIRE(grid.size() > 10);
    CHECK(grid.front() == 0.0);
    MemoryKernelSamples s = sample_S(ops, {0.0, 0.1, 1.0});
    CHECK((s.S[0].matrix() - kernel_at_zero_direct(ops).matrix()).norm() < 1e-10 * s.S[0].norm());
    CHECK((s.S[0].matrix() - kernel_at_zero_energy(ops).matrix()).norm() < 1e-10 * s.S[0].norm());
    for (const auto &x : s.S) CHECK(x.symmetry_defect() < 1e-8);
    CHECK((s.R[1].matrix() - R_tensor(ops, 0.1).matrix()).norm() < 1e-12 * (1 + s.R[1].norm()));
    // The kernel is negative semidefinite at t = 0: S(0) = F T C.
    CHECK(min_eig(-s.S[0].matrix()) > -1e-10 * s.S[0].norm());
}

TEST_CASE("complex cell solve agrees with the eigenbasis route") {
    const auto &ops = fx().ops;
    for (cdouble z : {cdouble(0.5, 0.0), cdouble(1.0, 1.0), cdouble(0.1, 10.0)}) {
        Eigen::MatrixXcd a = laplace_direct(ops, z).matrix(), b = laplace_modal(ops, z).matrix();
        CHECK((a - b).norm() < 1e-8 * a.norm());
        CHECK((a - a.transpose()).norm() < 1e-8 * a.norm());
    }
    CHECK_THROWS_AS(laplace_direct(ops, cdouble(-1.0, 0.0)), Error);
}

TEST_CASE("micro energy identity converges at second order") {
    const auto &ops = fx().ops;
    Eigen::Vector3d xi(0.0, 0.0, 1.0);
    std::vector<double> res;
    for (double dt : {0.1, 0.05, 0.025}) {
        std::vector<double> t;
        std::vector<Eigen::Vector3d> E;
        for (int i = 0; i * dt <= 1.0 + 1e-12; ++i) {
            t.push_back(i * dt);
            E.push_back(std::sin(i * dt) * xi);
        }
        MicroEnergyReport m = micro_energy_residual(ops, t, E);
        CHECK(m.min_dissipation >= 0.0);
        res.push_back(m.residual);
    }
    CHECK(res[0] / res[1] > 3.5);
    CHECK(res[1] / res[2] > 3.5);
}

TEST_CASE("coercivity floor is positive") {
    const auto &ops = fx().ops;
    std::vector<Eigen::VectorXcd> xi{Eigen::Vector3cd::Unit(0), Eigen::Vector3cd::Unit(2)};
    CoercivityReport r = coercivity_scan(ops, {cdouble(0.1, 0.0), cdouble(1.0, 10.0)}, xi);
    CHECK(r.floor > 0.0);
    CHECK(r.values.size() == 4);
    CHECK_THROWS_AS(coercivity_scan(ops, {cdouble(1.0)}, {}), Error);
}
