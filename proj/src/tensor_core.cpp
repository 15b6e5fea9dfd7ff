#include "homog/tensor_core.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace homog {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;

void check_dim(int dim) {
    if (dim < 1 || dim > 3) {
        std::ostringstream os;
        os << "unsupported dimension " << dim;
        throw Error(ErrorKind::InvalidParameter, os.str());
    }
}
} // namespace

int packed_size(int dim) {
    check_dim(dim);
    return dim * (dim + 1) / 2;
}

std::pair<int, int> packed_entry(int dim, int k) {
    static const int e2[3][2] = {{0, 0}, {1, 1}, {0, 1}};
    static const int e3[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
    check_dim(dim);
    if (dim == 1) return {0, 0};
    if (dim == 2) return {e2[k][0], e2[k][1]};
    return {e3[k][0], e3[k][1]};
}

int packed_index(int dim, int i, int j) {
    if (i == j) return i;
    if (dim == 2) return 2;
    // dim 3: off-diagonal index is 3 + (the missing axis), reversed.
    int missing = 3 - i - j;
    return 3 + missing;
}

double packed_scale(int dim, int k) { return k < dim ? 1.0 : kSqrt2; }

template <class S>
SymMatT<S> SymMatT<S>::from_packed(int dim, const VecX<S> &v) {
    SymMatT r(dim);
    if (v.size() != packed_size(dim))
        throw Error(ErrorKind::InvalidParameter, "packed vector has wrong length");
    r.m_v = v;
    return r;
}

template <class S>
SymMatT<S> SymMatT<S>::from_matrix(const MatX<S> &a) {
    int dim = static_cast<int>(a.rows());
    if (a.cols() != dim) throw Error(ErrorKind::InvalidParameter, "matrix is not square");
    SymMatT r(dim);
    for (int k = 0; k < packed_size(dim); ++k) {
        auto [i, j] = packed_entry(dim, k);
        r.m_v[k] = a(i, j) * S(packed_scale(dim, k));
    }
    return r;
}

template <class S>
SymMatT<S> SymMatT<S>::identity(int dim) {
    SymMatT r(dim);
    for (int i = 0; i < dim; ++i) r.m_v[i] = S(1);
    return r;
}

template <class S>
MatX<S> SymMatT<S>::matrix() const {
    MatX<S> a(m_dim, m_dim);
    for (int i = 0; i < m_dim; ++i)
        for (int j = 0; j < m_dim; ++j) a(i, j) = (*this)(i, j);
    return a;
}

template <class S>
S SymMatT<S>::trace() const {
    S t(0);
    for (int i = 0; i < m_dim; ++i) t += m_v[i];
    return t;
}

template <class S>
Tensor4T<S>::Tensor4T(int dim, const MatX<S> &m) : m_dim(dim), m_m(m) {
    int n = packed_size(dim);
    if (m.rows() != n || m.cols() != n)
        throw Error(ErrorKind::InvalidParameter, "tensor matrix has wrong size");
}

template <class S>
Tensor4T<S> Tensor4T<S>::identity(int dim) {
    int n = packed_size(dim);
    return Tensor4T(dim, MatX<S>::Identity(n, n));
}

template <class S>
SymMatT<S> Tensor4T<S>::apply(const SymMatT<S> &xi) const {
    if (xi.dim() != m_dim) throw Error(ErrorKind::InvalidParameter, "dimension mismatch");
    return SymMatT<S>::from_packed(m_dim, m_m * xi.packed());
}

template <class S>
double Tensor4T<S>::symmetry_defect() const {
    double n = m_m.norm();
    if (n == 0.0) return 0.0;
    return (m_m - m_m.transpose()).norm() / n;
}

template class SymMatT<double>;
template class SymMatT<cdouble>;
template class Tensor4T<double>;
template class Tensor4T<cdouble>;

CTensor4 to_complex(const Tensor4 &t) {
    return CTensor4(t.dim(), t.matrix().cast<cdouble>());
}

CSymMat to_complex(const SymMat &s) {
    return CSymMat::from_packed(s.dim(), s.packed().cast<cdouble>());
}

Tensor4 iso_tensor(double lambda_s, double mu_s, int dim) {
    if (!(mu_s > 0.0)) throw Error(ErrorKind::InvalidParameter, "shear modulus must be positive");
    if (!(lambda_s >= 0.0)) throw Error(ErrorKind::InvalidParameter, "Lame lambda must be non-negative");
    int n = packed_size(dim);
    Eigen::VectorXd p = SymMat::identity(dim).packed();
    Eigen::MatrixXd m = lambda_s * p * p.transpose() + 2.0 * mu_s * Eigen::MatrixXd::Identity(n, n);
    return Tensor4(dim, m);
}

std::vector<SymMat> sym_basis(int dim) {
    if (dim != 2 && dim != 3) throw Error(ErrorKind::InvalidParameter, "sym_basis needs N in {2,3}");
    int n = packed_size(dim);
    std::vector<SymMat> out;
    for (int k = 0; k < n; ++k) out.push_back(SymMat::from_packed(dim, Eigen::VectorXd::Unit(n, k)));
    return out;
}

double min_sym_eigenvalue(const Tensor4 &t, double tol) {
    double defect = t.symmetry_defect();
    if (defect > tol) {
        std::ostringstream os;
        os << "tensor is not symmetric: relative defect " << defect << " exceeds " << tol;
        throw Error(ErrorKind::Precondition, os.str());
    }
    Eigen::MatrixXd s = 0.5 * (t.matrix() + t.matrix().transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

RigidMotion::RigidMotion(int dim)
    : m_dim(dim), m_a(Eigen::VectorXd::Zero(dim)), m_w(Eigen::VectorXd::Zero(dim * (dim - 1) / 2)) {}

RigidMotion::RigidMotion(const Eigen::VectorXd &a, const Eigen::VectorXd &rotation)
    : m_dim(static_cast<int>(a.size())), m_a(a), m_w(rotation) {
    if (m_w.size() != m_dim * (m_dim - 1) / 2)
        throw Error(ErrorKind::InvalidParameter, "rotation parameter count does not match dimension");
}

Eigen::MatrixXd RigidMotion::skew() const {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_dim, m_dim);
    if (m_dim == 2) {
        b(0, 1) = -m_w[0];
        b(1, 0) = m_w[0];
    } else if (m_dim == 3) {
        // (w23, w13, w12) above the diagonal, negated below.
        b(1, 2) = m_w[0]; b(2, 1) = -m_w[0];
        b(0, 2) = m_w[1]; b(2, 0) = -m_w[1];
        b(0, 1) = m_w[2]; b(1, 0) = -m_w[2];
    }
    return b;
}

Eigen::VectorXd RigidMotion::operator()(const Eigen::VectorXd &y) const {
    return m_a + skew() * y;
}

} // namespace homog
