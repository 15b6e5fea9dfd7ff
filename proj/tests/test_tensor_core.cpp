#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "homog/tensor_core.hpp"

using namespace homog;

namespace {

// Full-index contraction C_ijkl xi_kl for the isotropic law.
Eigen::MatrixXd iso_full(double lam, double mu, const Eigen::MatrixXd &xi) {
    int n = static_cast<int>(xi.rows());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    out(i, j) += (lam * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k))) * xi(k, l);
    return out;
}

Eigen::MatrixXd random_sym(std::mt19937_64 &rng, int n) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
    return 0.5 * (a + a.transpose());
}

} // namespace

TEST_CASE("packing preserves the Frobenius product") {
    std::mt19937_64 rng(3);
    for (int dim : {2, 3}) {
        Eigen::MatrixXd a = random_sym(rng, dim), b = random_sym(rng, dim);
        SymMat pa = SymMat::from_matrix(a), pb = SymMat::from_matrix(b);
        CHECK(pa.dot(pb) == doctest::Approx((a.array() * b.array()).sum()).epsilon(1e-14));
        CHECK((pa.matrix() - a).norm() < 1e-15);
        CHECK(pa.trace() == doctest::Approx(a.trace()));
    }
}

TEST_CASE("isotropic tensor matches index contraction") {
    std::mt19937_64 rng(5);
    for (int dim : {2, 3}) {
        Tensor4 c = iso_tensor(0.7, 1.3, dim);
        for (int k = 0; k < 5; ++k) {
            Eigen::MatrixXd xi = random_sym(rng, dim);
            Eigen::MatrixXd got = c.apply(SymMat::from_matrix(xi)).matrix();
            CHECK((got - iso_full(0.7, 1.3, xi)).norm() < 1e-13);
        }
        CHECK(c.symmetry_defect() < 1e-15);
        CHECK(min_sym_eigenvalue(c) == doctest::Approx(2.6));
    }
}

TEST_CASE("sym_basis is orthonormal and matches packed unit vectors") {
    auto b = sym_basis(3);
    REQUIRE(b.size() == 6);
    for (size_t i = 0; i < b.size(); ++i) {
        CHECK((b[i].packed() - Eigen::VectorXd::Unit(6, static_cast<int>(i))).norm() < 1e-15);
        for (size_t j = 0; j < b.size(); ++j) CHECK(b[i].dot(b[j]) == doctest::Approx(i == j ? 1.0 : 0.0));
    }
}

TEST_CASE("min_sym_eigenvalue rejects non-symmetric tensors") {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 1) = 0.5;
    CHECK_THROWS_AS(min_sym_eigenvalue(Tensor4(2, m)), Error);
    CHECK_THROWS_AS(iso_tensor(1.0, 0.0), Error);
}

TEST_CASE("rigid motions have skew gradients") {
    RigidMotion r(Eigen::Vector2d(0.1, -0.2), Eigen::VectorXd::Constant(1, 0.3));
    Eigen::MatrixXd b = r.skew();
    CHECK((b + b.transpose()).norm() == 0.0);
    Eigen::Vector2d y(0.4, 0.5);
    CHECK((r(y) - (Eigen::Vector2d(0.1, -0.2) + b * y)).norm() < 1e-15);
    CHECK(RigidMotion::space_dim(3) == 6);
}
