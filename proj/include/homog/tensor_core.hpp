////////////////////////////////////////////////////////////////////////////////
// tensor_core.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Small dense algebra on symmetric N x N matrices and on linear maps between
//  them ("fourth order tensors"). Symmetric matrices are stored in packed
//  coordinates of length m = N(N+1)/2; off-diagonal coordinates carry a sqrt(2)
//  factor so that the Frobenius product xi:eta equals the Euclidean product of
//  the packed vectors. A Tensor4 is then an m x m matrix, and major symmetry
//  of the tensor is plain matrix symmetry.
//
//  Packing order: N=1 (11); N=2 (11, 22, 12); N=3 (11, 22, 33, 23, 13, 12).
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "homog/errors.hpp"

namespace homog {

using cdouble = std::complex<double>;

template <class S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S> using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

int packed_size(int dim);
// Row/column of packed coordinate k.
std::pair<int, int> packed_entry(int dim, int k);
// Packed coordinate of entry (i, j), symmetric in (i, j).
int packed_index(int dim, int i, int j);
// 1 on the diagonal, sqrt(2) off the diagonal.
double packed_scale(int dim, int k);

template <class S>
class SymMatT {
public:
    explicit SymMatT(int dim = 2) : m_dim(dim), m_v(VecX<S>::Zero(packed_size(dim))) {}

    static SymMatT from_packed(int dim, const VecX<S> &v);
    // Takes the upper triangle; the caller is responsible for symmetry.
    static SymMatT from_matrix(const MatX<S> &a);
    static SymMatT identity(int dim);

    int dim() const { return m_dim; }
    const VecX<S> &packed() const { return m_v; }
    VecX<S> &packed() { return m_v; }

    S operator()(int i, int j) const {
        int k = packed_index(m_dim, i, j);
        return (i == j) ? m_v[k] : m_v[k] / S(packed_scale(m_dim, k));
    }
    MatX<S> matrix() const;
    S trace() const;

    // Frobenius product without conjugation.
    S dot(const SymMatT &o) const { return (m_v.array() * o.m_v.array()).sum(); }
    double norm() const { return m_v.norm(); }

    SymMatT operator+(const SymMatT &o) const { return from_packed(m_dim, m_v + o.m_v); }
    SymMatT operator-(const SymMatT &o) const { return from_packed(m_dim, m_v - o.m_v); }
    SymMatT operator*(S a) const { return from_packed(m_dim, m_v * a); }

private:
    int m_dim;
    VecX<S> m_v;
};

template <class S>
class Tensor4T {
public:
    explicit Tensor4T(int dim = 2)
        : m_dim(dim), m_m(MatX<S>::Zero(packed_size(dim), packed_size(dim))) {}
    Tensor4T(int dim, const MatX<S> &m);

    static Tensor4T identity(int dim);
    static Tensor4T zero(int dim) { return Tensor4T(dim); }

    int dim() const { return m_dim; }
    int size() const { return static_cast<int>(m_m.rows()); }
    const MatX<S> &matrix() const { return m_m; }
    MatX<S> &matrix() { return m_m; }
    S operator()(int r, int c) const { return m_m(r, c); }

    SymMatT<S> apply(const SymMatT<S> &xi) const;
    Tensor4T transpose() const { return Tensor4T(m_dim, m_m.transpose()); }
    // ||T - T^T||_F / ||T||_F, zero for the zero tensor.
    double symmetry_defect() const;
    double norm() const { return m_m.norm(); }

    Tensor4T operator+(const Tensor4T &o) const { return Tensor4T(m_dim, m_m + o.m_m); }
    Tensor4T operator-(const Tensor4T &o) const { return Tensor4T(m_dim, m_m - o.m_m); }
    Tensor4T operator*(S a) const { return Tensor4T(m_dim, m_m * a); }

private:
    int m_dim;
    MatX<S> m_m;
};

using SymMat = SymMatT<double>;
using CSymMat = SymMatT<cdouble>;
using Tensor4 = Tensor4T<double>;
using CTensor4 = Tensor4T<cdouble>;

CTensor4 to_complex(const Tensor4 &t);
CSymMat to_complex(const SymMat &s);

// xi -> lambda tr(xi) I + 2 mu xi.
Tensor4 iso_tensor(double lambda_s, double mu_s, int dim = 2);

// Frobenius-orthonormal basis; off-diagonal members are (e_i e_j^T + e_j e_i^T)/sqrt(2).
// In packed coordinates these are the unit vectors.
std::vector<SymMat> sym_basis(int dim);

// Smallest eigenvalue of the symmetric part. Throws when the relative symmetry
// defect exceeds tol.
double min_sym_eigenvalue(const Tensor4 &t, double tol = 1e-10);

// y -> a + B y with B skew-symmetric. The skew part is stored through its
// independent entries so that B + B^T == 0 holds exactly.
class RigidMotion {
public:
    RigidMotion(int dim = 2);
    // dim 2: one rotation parameter; dim 3: (w23, w13, w12).
    RigidMotion(const Eigen::VectorXd &a, const Eigen::VectorXd &rotation);

    int dim() const { return m_dim; }
    const Eigen::VectorXd &translation() const { return m_a; }
    const Eigen::VectorXd &rotation() const { return m_w; }
    Eigen::MatrixXd skew() const;
    Eigen::VectorXd operator()(const Eigen::VectorXd &y) const;

    static int space_dim(int dim) { return dim + dim * (dim - 1) / 2; }

private:
    int m_dim;
    Eigen::VectorXd m_a;
    Eigen::VectorXd m_w;
};

} // namespace homog
