#include "homog/cell_operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

namespace homog {

namespace {

using Trip = Eigen::Triplet<double>;
using CTrip = Eigen::Triplet<cdouble>;
using SpMatC = Eigen::SparseMatrix<cdouble>;

const Eigen::Vector3d kIdPacked(1.0, 1.0, 0.0);

void add_block(std::vector<Trip> &trip, const SpMat &m, int r0, int c0, double s = 1.0) {
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) trip.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
}

void add_block_t(std::vector<Trip> &trip, const SpMat &m, int r0, int c0, double s = 1.0) {
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) trip.emplace_back(r0 + it.col(), c0 + it.row(), s * it.value());
}

void add_dense(std::vector<Trip> &trip, const Eigen::MatrixXd &m, int r0, int c0, double s = 1.0) {
    for (int j = 0; j < m.cols(); ++j)
        for (int i = 0; i < m.rows(); ++i)
            if (m(i, j) != 0.0) trip.emplace_back(r0 + i, c0 + j, s * m(i, j));
}

template <class Solver>
void factorize(Solver &s, const SpMat &m, const char *what) {
    s.analyzePattern(m);
    s.factorize(m);
    if (s.info() != Eigen::Success) {
        std::ostringstream os;
        os << what << " factorization failed: " << s.lastErrorMessage();
        throw Error(ErrorKind::Solver, os.str());
    }
}

SymMat packed_to_sym(const Eigen::Vector3d &v) { return SymMat::from_packed(2, v); }

} // namespace

struct CellOperatorSet::Factors {
    Eigen::SparseLU<SpMat> z, r1, stokes;
    SpMat gs, gf;           // solid/fluid interface traces
    SpMat div;              // n_p x n_f
    Eigen::MatrixXd cmean;  // 2 x n_s, solid mean rows
    Eigen::MatrixXd cbound; // 2 x n_s, interface mean rows
    Eigen::MatrixXd grig;   // 3 x n_f, rigid moments of the fluid trace
    int ns = 0, nf = 0, np = 0, ni2 = 0;
};

CellOperatorSet::CellOperatorSet(const CellDiscretization &disc, const Tensor4 &a, double mu)
    : m_disc(disc), m_a(a), m_mu(mu), m_f(std::make_unique<Factors>()) {
    if (!(mu > 0)) throw Error(ErrorKind::InvalidParameter, "viscosity must be positive");
    m_ks = assemble_elastic(disc, a);
    m_kf = assemble_fluid_strain_gram(disc);
    m_lstrain_s = solid_strain_integral(disc);
    m_lstrain_f = fluid_strain_integral(disc);
    m_pint = pressure_integral(disc);

    Factors &f = *m_f;
    f.ns = disc.n_solid_dofs;
    f.nf = disc.n_fluid_dofs;
    f.np = disc.n_pressure;
    f.ni2 = disc.trace_size();
    f.gs = solid_trace(disc);
    f.gf = fluid_trace(disc);
    f.div = assemble_stokes(disc, mu).divergence;
    f.cmean = solid_mean_rows(disc);
    // Raw translations, not the orthonormalized ones: rows are int_{dO} u_x, int_{dO} u_y.
    Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(f.ni2, 2);
    for (int i = 0; i < disc.n_iface(); ++i) {
        trans(2 * i, 0) = 1.0;
        trans(2 * i + 1, 1) = 1.0;
    }
    f.cbound = (trans.transpose() * disc.iface_mass) * f.gs;
    f.grig = (disc.rigid.transpose() * disc.iface_mass) * f.gf;

    const int ns = f.ns, nf = f.nf, np = f.np, ni2 = f.ni2;
    {
        std::vector<Trip> trip;
        // Pin the first node; the mean is removed after the solve.
        add_block(trip, m_ks, 0, 0);
        for (int c = 0; c < 2; ++c) {
            trip.emplace_back(ns + c, c, 1.0);
            trip.emplace_back(c, ns + c, 1.0);
        }
        SpMat k(ns + 2, ns + 2);
        k.setFromTriplets(trip.begin(), trip.end());
        factorize(f.z, k, "corrector");
    }
    {
        // [K 0 -Gs^T Cb^T; 0 0 R^T 0; -Gs R 0 0; Cb 0 0 0]
        const int oa = ns, ol = ns + 3, om = ns + 3 + ni2, n = om + 2;
        std::vector<Trip> trip;
        add_block(trip, m_ks, 0, 0);
        add_block_t(trip, f.gs, 0, ol, -1.0);
        add_block(trip, f.gs, ol, 0, -1.0);
        add_dense(trip, disc.rigid.transpose(), oa, ol);
        add_dense(trip, disc.rigid, ol, oa);
        add_dense(trip, f.cbound, om, 0);
        add_dense(trip, f.cbound.transpose(), 0, om);
        SpMat k(n, n);
        k.setFromTriplets(trip.begin(), trip.end());
        factorize(f.r1, k, "elastic lift");
    }
    {
        // [2 mu Kf B^T G^T; B 0 0; G 0 0]
        const int op = nf, og = nf + np, n = og + 3;
        std::vector<Trip> trip;
        add_block(trip, m_kf, 0, 0, 2.0 * mu);
        add_block(trip, f.div, op, 0);
        add_block_t(trip, f.div, 0, op);
        add_dense(trip, f.grig, og, 0);
        add_dense(trip, f.grig.transpose(), 0, og);
        SpMat k(n, n);
        k.setFromTriplets(trip.begin(), trip.end());
        factorize(f.stokes, k, "Stokes");
    }
}

CellOperatorSet::~CellOperatorSet() = default;

Eigen::VectorXd CellOperatorSet::corrector(const Eigen::Vector3d &xi) const {
    const Factors &f = *m_f;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f.ns + 2);
    rhs.head(f.ns) = -m_lstrain_s.transpose() * (m_a.matrix() * xi);
    Eigen::VectorXd x = f.z.solve(rhs);
    Eigen::VectorXd z = x.head(f.ns);
    Eigen::Vector2d mean = f.cmean * z / m_disc.solid_area();
    for (int i = 0; i < f.ns / 2; ++i) z.segment<2>(2 * i) -= mean;
    return z;
}

R1Solution CellOperatorSet::lift(const Eigen::VectorXd &h) const {
    const Factors &f = *m_f;
    if (h.size() != f.ni2) throw Error(ErrorKind::InvalidParameter, "interface field has wrong length");
    const int n = f.ns + 3 + f.ni2 + 2;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs.segment(f.ns + 3, f.ni2) = -h;
    Eigen::VectorXd x = f.r1.solve(rhs);
    R1Solution out;
    out.u = x.head(f.ns);
    out.rigid = x.segment(f.ns, 3);
    // K u = Gs^T lambda and K u = -Gs^T t, so the traction functional is -lambda.
    out.traction = -x.segment(f.ns + 3, f.ni2);
    return out;
}

StokesSolution CellOperatorSet::stokes(const Eigen::VectorXd &traction) const {
    const Factors &f = *m_f;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f.nf + f.np + 3);
    rhs.head(f.nf) = f.gf.transpose() * traction;
    Eigen::VectorXd x = f.stokes.solve(rhs);
    return {x.head(f.nf), x.segment(f.nf, f.np)};
}

Eigen::Vector3d CellOperatorSet::flux(const R1Solution &r1, const StokesSolution &st) const {
    Eigen::Vector3d solid = m_a.matrix() * (m_lstrain_s * r1.u);
    Eigen::Vector3d fluid = 2.0 * m_mu * (m_lstrain_f * st.velocity) - m_pint.dot(st.pressure) * kIdPacked;
    return -solid - fluid;
}

const Tensor4 &CellOperatorSet::perforated_tensor() const {
    if (!m_az) {
        Eigen::Matrix3d az;
        double area = m_disc.solid_area();
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d xi = Eigen::Vector3d::Unit(j);
            Eigen::VectorXd z = corrector(xi);
            az.col(j) = m_a.matrix() * (area * xi + m_lstrain_s * z);
        }
        m_az = std::make_unique<Tensor4>(2, az);
    }
    return *m_az;
}

const Eigen::MatrixXd &CellOperatorSet::strain_coords() const {
    if (!m_c) {
        Eigen::MatrixXd c(h_dim(), 3);
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d xi = Eigen::Vector3d::Unit(j);
            Eigen::VectorXd g = trace_of_linear(m_disc, packed_to_sym(xi)) + m_f->gs * corrector(xi);
            c.col(j) = to_h_coords(m_disc, g);
        }
        m_c = std::make_unique<Eigen::MatrixXd>(c);
    }
    return *m_c;
}

Eigen::MatrixXd CellOperatorSet::linear_coords() const {
    Eigen::MatrixXd c(h_dim(), 3);
    for (int j = 0; j < 3; ++j)
        c.col(j) = to_h_coords(m_disc, trace_of_linear(m_disc, packed_to_sym(Eigen::Vector3d::Unit(j))));
    return c;
}

const TSpectrum &CellOperatorSet::spectrum() const {
    if (m_spec) return *m_spec;
    auto s = std::make_unique<TSpectrum>();
    const int d = h_dim();
    s->T.resize(d, d);
    s->gram.resize(d, d);
    s->flux.resize(3, d);
    const Eigen::MatrixXd &phi = m_disc.hbasis;
    Eigen::MatrixXd phim = phi.transpose() * m_disc.iface_mass;
    for (int j = 0; j < d; ++j) {
        R1Solution r1 = lift(phi.col(j));
        StokesSolution st = stokes(r1.traction);
        s->T.col(j) = phim * (m_f->gf * st.velocity);
        s->gram.col(j) = -phi.transpose() * r1.traction;
        s->flux.col(j) = flux(r1, st);
    }
    Eigen::MatrixXd g = 0.5 * (s->gram + s->gram.transpose());
    Eigen::MatrixXd gt = g * s->T;
    Eigen::MatrixXd a = -0.5 * (gt + gt.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, g);
    bool ok = es.info() == Eigen::Success;
    if (ok) {
        // a V = g V diag(mu) with a = -g T gives T V = -V diag(mu).
        s->lambda = -es.eigenvalues().reverse();
        s->modes = es.eigenvectors().rowwise().reverse();
        double tn = s->T.norm();
        s->residual = (s->T * s->modes - s->modes * s->lambda.asDiagonal()).norm() / (tn > 0 ? tn : 1.0);
        ok = std::isfinite(s->residual) && s->residual < 1e-8;
    }
    if (!ok) {
        // Keep whatever eigenvalues are available for reporting; exponentials go through Pade.
        s->fallback = true;
        Eigen::EigenSolver<Eigen::MatrixXd> ev(s->T, false);
        s->lambda = ev.eigenvalues().real();
        std::sort(s->lambda.data(), s->lambda.data() + s->lambda.size());
        s->modes.resize(0, 0);
    }
    double big = s->lambda.cwiseAbs().maxCoeff();
    for (int m = 0; m < s->lambda.size(); ++m)
        if (std::abs(s->lambda[m]) <= 1e-9 * big) ++s->n_conserved;
    m_spec = std::move(s);
    return *m_spec;
}

Eigen::MatrixXd CellOperatorSet::modal_left() const {
    const TSpectrum &s = spectrum();
    if (s.fallback) throw Error(ErrorKind::Solver, "no eigenbasis available for T");
    return s.flux * s.modes;
}

Eigen::MatrixXd CellOperatorSet::modal_right() const {
    const TSpectrum &s = spectrum();
    if (s.fallback) throw Error(ErrorKind::Solver, "no eigenbasis available for T");
    return s.modes.transpose() * (s.gram * strain_coords());
}

// --- operators on fields -----------------------------------------------------

Eigen::VectorXd solve_Z(const CellOperatorSet &ops, const SymMat &xi) {
    if (xi.dim() != 2) throw Error(ErrorKind::InvalidParameter, "cell problems are two dimensional");
    return ops.corrector(xi.packed());
}

Eigen::VectorXd solve_R1(const CellOperatorSet &ops, const Eigen::VectorXd &h) {
    double defect = rigid_defect(ops.disc(), h);
    if (defect > 1e-10) {
        std::ostringstream os;
        os << "interface field has a rigid component: defect " << defect;
        throw Error(ErrorKind::Precondition, os.str());
    }
    return ops.lift(h).u;
}

StokesSolution solve_R2R3(const CellOperatorSet &ops, const Eigen::VectorXd &h) {
    Eigen::VectorXd q = project_Q(ops.disc(), h).values;
    return ops.stokes(ops.lift(q).traction);
}

Eigen::VectorXd apply_T(const CellOperatorSet &ops, const Eigen::VectorXd &h) {
    StokesSolution st = solve_R2R3(ops, h);
    return fluid_trace(ops.disc()) * st.velocity;
}

const TSpectrum &build_T_matrix(const CellOperatorSet &ops) { return ops.spectrum(); }

Eigen::VectorXd semigroup_coords(const CellOperatorSet &ops, double t, const Eigen::VectorXd &c) {
    if (!(t >= 0)) throw Error(ErrorKind::InvalidParameter, "semigroup time must be non-negative");
    if (t == 0) return c;
    const TSpectrum &s = ops.spectrum();
    if (s.fallback) return (t * s.T).exp() * c;
    Eigen::VectorXd m = s.modes.transpose() * (s.gram * c);
    m.array() *= (t * s.lambda.array()).exp();
    return s.modes * m;
}

Eigen::VectorXd semigroup_apply(const CellOperatorSet &ops, double t, const Eigen::VectorXd &h0) {
    if (!(t >= 0)) throw Error(ErrorKind::InvalidParameter, "semigroup time must be non-negative");
    if (t == 0) return h0;
    Eigen::VectorXd c = to_h_coords(ops.disc(), h0);
    return from_h_coords(ops.disc(), semigroup_coords(ops, t, c));
}

double elastic_energy(const CellOperatorSet &ops, const Eigen::VectorXd &c) {
    Eigen::VectorXd u = ops.lift(from_h_coords(ops.disc(), c)).u;
    return u.dot(ops.elastic() * u);
}

// --- effective tensors ------------------------------------------------------

namespace {
// Per basis xi: the solid displacement Z xi - R1 g, and the flux A_h xi.
struct AhParts {
    std::array<Eigen::VectorXd, 3> w;
    Eigen::Matrix3d flux;
};

AhParts ah_parts(const CellOperatorSet &ops) {
    AhParts out;
    const CellDiscretization &d = ops.disc();
    SpMat gs = solid_trace(d);
    Eigen::MatrixXd ls = solid_strain_integral(d);
    double area = d.solid_area();
    for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d xi = Eigen::Vector3d::Unit(j);
        Eigen::VectorXd z = ops.corrector(xi);
        Eigen::VectorXd g = project_Q(d, trace_of_linear(d, packed_to_sym(xi)) + gs * z).values;
        R1Solution r1 = ops.lift(g);
        StokesSolution st = ops.stokes(r1.traction);
        out.w[j] = z - r1.u;
        out.flux.col(j) = ops.A().matrix() * (area * xi + ls * z) + ops.flux(r1, st);
    }
    return out;
}
} // namespace

Tensor4 compute_Ah(const CellOperatorSet &ops) { return Tensor4(2, ah_parts(ops).flux); }

Tensor4 compute_Ah_energy(const CellOperatorSet &ops) {
    AhParts p = ah_parts(ops);
    const CellDiscretization &d = ops.disc();
    Eigen::MatrixXd ls = solid_strain_integral(d);
    const Eigen::Matrix3d a = ops.A().matrix();
    double area = d.solid_area();
    Eigen::Matrix3d out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d xi = Eigen::Vector3d::Unit(i), xj = Eigen::Vector3d::Unit(j);
            out(i, j) = area * xi.dot(a * xj) + xi.dot(a * (ls * p.w[j])) + xj.dot(a * (ls * p.w[i])) +
                        p.w[i].dot(ops.elastic() * p.w[j]);
        }
    return Tensor4(2, out);
}

Tensor4 kernel_at(const CellOperatorSet &ops, double t) {
    const TSpectrum &s = ops.spectrum();
    if (s.fallback) {
        Eigen::MatrixXd e = (t * s.T).exp();
        return Tensor4(2, s.flux * e * s.T * ops.strain_coords());
    }
    Eigen::MatrixXd p = ops.modal_left();
    Eigen::MatrixXd b = ops.modal_right();
    Eigen::VectorXd w = (s.lambda.array() * (t * s.lambda.array()).exp()).matrix();
    return Tensor4(2, p * w.asDiagonal() * b);
}

Tensor4 kernel_at_zero_direct(const CellOperatorSet &ops) {
    const TSpectrum &s = ops.spectrum();
    return Tensor4(2, s.flux * (s.T * ops.strain_coords()));
}

Tensor4 kernel_at_zero_energy(const CellOperatorSet &ops) {
    const TSpectrum &s = ops.spectrum();
    const Eigen::MatrixXd &c = ops.strain_coords();
    return Tensor4(2, c.transpose() * s.gram * s.T * c);
}

std::vector<double> default_time_grid(const CellOperatorSet &ops, double stop_ratio) {
    const TSpectrum &s = ops.spectrum();
    double fast = -s.lambda.minCoeff();
    double slow = -s.decay_abscissa();
    if (!(slow > 0)) throw Error(ErrorKind::Solver, "T is not strictly dissipative; no decay time scale");
    std::vector<double> t{0.0};
    double dt = 1e-3 / fast;
    while (t.back() < 1.0 / slow) {
        t.push_back(t.back() + dt);
        dt *= 1.02;
        dt = std::min(dt, 0.02 / slow);
    }
    double s0 = kernel_at(ops, 0.0).norm();
    const double tmax = 40.0 / slow;
    const double step = 0.02 / slow;
    // The stop test is checked on a coarser stride to keep it cheap.
    while (t.back() < tmax) {
        t.push_back(t.back() + step);
        if (kernel_at(ops, t.back()).norm() < stop_ratio * s0) break;
    }
    return t;
}

MemoryKernelSamples sample_S(const CellOperatorSet &ops, const std::vector<double> &grid) {
    for (size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0) || (k > 0 && !(grid[k] > grid[k - 1])))
            throw Error(ErrorKind::InvalidParameter, "time grid must be non-negative and increasing");
    }
    MemoryKernelSamples out;
    out.t = grid;
    out.A_h = compute_Ah(ops);
    for (double t : grid) {
        out.S.push_back(kernel_at(ops, t));
        out.R.push_back(R_tensor(ops, t));
    }
    return out;
}

SymMat compute_R_force(const CellOperatorSet &ops, double t, const Eigen::VectorXd &phi) {
    const TSpectrum &s = ops.spectrum();
    Eigen::VectorXd c = to_h_coords(ops.disc(), phi);
    Eigen::VectorXd ct = semigroup_coords(ops, t, c);
    return SymMat::from_packed(2, -s.flux * ct);
}

Tensor4 R_tensor(const CellOperatorSet &ops, double t) {
    const TSpectrum &s = ops.spectrum();
    Eigen::MatrixXd c = ops.linear_coords();
    Eigen::Matrix3d out;
    for (int j = 0; j < 3; ++j) out.col(j) = -s.flux * semigroup_coords(ops, t, c.col(j));
    return Tensor4(2, out);
}

// --- Laplace domain ---------------------------------------------------------

LaplaceResponse laplace_solve(const CellOperatorSet &ops, cdouble z, const std::vector<Eigen::VectorXcd> &xi_in) {
    if (!(z.real() > 0)) throw Error(ErrorKind::InvalidParameter, "Laplace variable needs Re z > 0");
    const CellDiscretization &d = ops.disc();
    std::vector<Eigen::VectorXcd> xi_set = xi_in;
    if (xi_set.empty())
        for (int j = 0; j < 3; ++j) xi_set.push_back(Eigen::Vector3cd::Unit(j));

    const int ns = d.n_solid_dofs, nf = d.n_fluid_dofs, np = d.n_pressure, ni2 = d.trace_size();
    const int o_th = ns, o_q = o_th + nf, o_a = o_q + np, o_l = o_a + 3, o_k = o_l + ni2, o_m = o_k + 3;
    const int n = o_m + 2;

    SpMat gs = solid_trace(d), gf = fluid_trace(d);
    SpMat div = assemble_stokes(d, ops.mu()).divergence;
    Eigen::MatrixXd grig = (d.rigid.transpose() * d.iface_mass) * gf;

    std::vector<CTrip> trip;
    auto put = [&](const SpMat &m, int r0, int c0, cdouble s, bool transpose) {
        for (int k = 0; k < m.outerSize(); ++k)
            for (SpMat::InnerIterator it(m, k); it; ++it) {
                int r = transpose ? it.col() : it.row(), c = transpose ? it.row() : it.col();
                trip.emplace_back(r0 + r, c0 + c, s * it.value());
            }
    };
    auto put_dense = [&](const Eigen::MatrixXd &m, int r0, int c0, double s, bool transpose) {
        for (int j = 0; j < m.cols(); ++j)
            for (int i = 0; i < m.rows(); ++i)
                if (m(i, j) != 0.0) {
                    if (transpose) trip.emplace_back(r0 + j, c0 + i, s * m(i, j));
                    else trip.emplace_back(r0 + i, c0 + j, s * m(i, j));
                }
    };
    put(ops.elastic(), 0, 0, 1.0, false);
    put(gs, 0, o_l, -1.0, true);
    put(gs, o_l, 0, -1.0, false);
    // Gauge: pin the first solid node (the response does not see constants).
    for (int c = 0; c < 2; ++c) {
        trip.emplace_back(o_m + c, c, 1.0);
        trip.emplace_back(c, o_m + c, 1.0);
    }
    put(ops.fluid_gram(), o_th, o_th, 2.0 * ops.mu() * z, false);
    put(div, o_q, o_th, 1.0, false);
    put(div, o_th, o_q, 1.0, true);
    put(gf, o_l, o_th, 1.0, false);
    put(gf, o_th, o_l, 1.0, true);
    put_dense(grig, o_k, o_th, 1.0, false);
    put_dense(grig, o_th, o_k, 1.0, true);
    put_dense(d.rigid, o_l, o_a, -1.0, false);
    put_dense(d.rigid, o_a, o_l, -1.0, true);
    SpMatC k(n, n);
    k.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMatC> lu;
    lu.analyzePattern(k);
    lu.factorize(k);
    if (lu.info() != Eigen::Success)
        throw Error(ErrorKind::Solver, "complex cell problem factorization failed: " + lu.lastErrorMessage());

    const Eigen::MatrixXcd ls = solid_strain_integral(d).cast<cdouble>();
    const Eigen::MatrixXcd lf = fluid_strain_integral(d).cast<cdouble>();
    const Eigen::VectorXcd pint = pressure_integral(d).cast<cdouble>();
    const SpMatC kf = ops.fluid_gram().cast<cdouble>(), ks = ops.elastic().cast<cdouble>();
    const Eigen::MatrixXcd a = ops.A().matrix().cast<cdouble>();
    const double area = d.solid_area();
    const double r2 = std::sqrt(2.0);
    LaplaceResponse out;
    for (const Eigen::VectorXcd &xi : xi_set) {
        Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
        rhs.head(ns) = -(ls.transpose() * (a * xi));
        for (int i = 0; i < d.n_iface(); ++i) {
            const Vec2 &y = d.p2_nodes[d.iface_nodes[i]];
            rhs[o_l + 2 * i] = xi[0] * y.x() + xi[2] / r2 * y.y();
            rhs[o_l + 2 * i + 1] = xi[2] / r2 * y.x() + xi[1] * y.y();
        }
        Eigen::VectorXcd x = lu.solve(rhs);
        Eigen::VectorXcd zeta = x.head(ns), theta = x.segment(o_th, nf), q = x.segment(o_q, np);
        Eigen::Vector3cd strain = area * xi + ls * zeta;
        Eigen::Vector3cd resp = a * strain + 2.0 * ops.mu() * z * (lf * theta);
        resp -= (pint.transpose() * q)(0) * Eigen::Vector3cd(1.0, 1.0, 0.0);
        out.response.push_back(resp);
        // eta = z theta
        out.fluid_strain.push_back(std::norm(z) * theta.dot(kf * theta).real());
        // Hermitian form int A (xi + e(zeta)) : conj(xi + e(zeta))
        double se = area * xi.dot(a * xi).real() + 2.0 * xi.dot(a * (ls * zeta)).real() + zeta.dot(ks * zeta).real();
        out.solid_energy.push_back(se);
    }
    if (xi_in.empty()) {
        Eigen::Matrix3cd m;
        for (int j = 0; j < 3; ++j) m.col(j) = out.response[j];
        out.tensor = CTensor4(2, m);
    }
    return out;
}

CTensor4 laplace_direct(const CellOperatorSet &ops, cdouble z) { return laplace_solve(ops, z).tensor; }

CTensor4 laplace_modal(const CellOperatorSet &ops, cdouble z) {
    if (!(z.real() > 0)) throw Error(ErrorKind::InvalidParameter, "Laplace variable needs Re z > 0");
    const TSpectrum &s = ops.spectrum();
    Eigen::MatrixXd p = ops.modal_left(), b = ops.modal_right();
    Eigen::VectorXcd w(s.lambda.size());
    for (int m = 0; m < w.size(); ++m) w[m] = s.lambda[m] / (z - s.lambda[m]);
    Eigen::MatrixXcd ls = p.cast<cdouble>() * w.asDiagonal() * b.cast<cdouble>();
    return CTensor4(2, compute_Ah(ops).matrix().cast<cdouble>() + ls);
}

std::vector<cdouble> default_coercivity_grid() {
    std::vector<cdouble> g;
    for (double re : {0.01, 0.1, 1.0, 10.0})
        for (double im : {0.0, 1.0, 10.0}) g.emplace_back(re, im);
    return g;
}

CoercivityReport coercivity_scan(const CellOperatorSet &ops, const std::vector<cdouble> &z_grid,
                                 const std::vector<Eigen::VectorXcd> &xi_set) {
    if (xi_set.empty()) throw Error(ErrorKind::InvalidParameter, "coercivity scan needs at least one xi");
    for (const auto &xi : xi_set)
        if (std::abs(xi.norm() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidParameter, "xi must have unit norm");
    CoercivityReport out;
    out.floor = std::numeric_limits<double>::infinity();
    for (cdouble z : z_grid) {
        LaplaceResponse r = laplace_solve(ops, z, xi_set);
        for (size_t j = 0; j < xi_set.size(); ++j) {
            double v = (1.0 + 1.0 / std::norm(z)) * r.fluid_strain[j];
            out.values.push_back(v);
            if (v < out.floor) {
                out.floor = v;
                out.argmin_z = z;
                out.argmin_xi = static_cast<int>(j);
            }
        }
    }
    return out;
}

// --- micro energy identity --------------------------------------------------

MicroEnergyReport micro_energy_residual(const CellOperatorSet &ops, const std::vector<double> &t,
                                        const std::vector<Eigen::Vector3d> &E) {
    if (t.size() != E.size() || t.size() < 3) throw Error(ErrorKind::InvalidParameter, "need at least 3 samples");
    if (E[0].norm() != 0.0) throw Error(ErrorKind::InvalidParameter, "path must start at E(0) = 0");
    const TSpectrum &s = ops.spectrum();
    Eigen::MatrixXd b = ops.modal_right();
    const Eigen::Matrix3d az = ops.perforated_tensor().matrix();
    const Eigen::Matrix3d ah = compute_Ah(ops).matrix();
    const int nm = static_cast<int>(s.lambda.size());
    const size_t n = t.size();

    // I_m(t) = lambda_m int_0^t e^{lambda_m (t-s)} b_m . E(s) ds, exact for linear E.
    std::vector<Eigen::VectorXd> integ(n, Eigen::VectorXd::Zero(nm));
    for (size_t k = 1; k < n; ++k) {
        double dt = t[k] - t[k - 1];
        if (!(dt > 0)) throw Error(ErrorKind::InvalidParameter, "times must increase");
        Eigen::VectorXd e0 = b * E[k - 1], e1 = b * E[k];
        for (int m = 0; m < nm; ++m) {
            double l = s.lambda[m], x = -l * dt;
            double ex = std::exp(-x);
            // int_0^dt e^{l (dt - s)} (e0 + (e1 - e0) s/dt) ds, times l.
            double w0, w1;  // weights of e0, e1 after multiplying by l
            if (x < 1e-6) {
                w0 = l * dt * (0.5 - x / 3.0);
                w1 = l * dt * (0.5 - x / 6.0);
            } else {
                double p1 = (1.0 - ex) / x;          // mean of e^{l(dt-s)}
                double p2 = (x - 1.0 + ex) / (x * x); // mean of e^{l(dt-s)} s/dt
                w1 = l * dt * p2;
                w0 = l * dt * (p1 - p2);
            }
            integ[k][m] = ex * integ[k - 1][m] + w0 * e0[m] + w1 * e1[m];
        }
    }
    MicroEnergyReport out;
    out.lhs.resize(n);
    out.energy.resize(n);
    out.dissipation.resize(n);
    std::vector<Eigen::Vector3d> stress(n);
    for (size_t k = 0; k < n; ++k) {
        Eigen::VectorXd a = -(b * E[k]) - integ[k];
        out.energy[k] = E[k].dot(az * E[k]) + a.squaredNorm();
        out.dissipation[k] = -(s.lambda.array() * a.array().square()).sum();
        stress[k] = ah * E[k] + b.transpose() * integ[k];
    }
    out.min_dissipation = *std::min_element(out.dissipation.begin(), out.dissipation.end());
    for (size_t k = 1; k + 1 < n; ++k) {
        double h0 = t[k] - t[k - 1], h1 = t[k + 1] - t[k];
        // Three-point derivative on a possibly non-uniform grid.
        auto deriv = [&](double f0, double f1, double f2) {
            return (-h1 / (h0 * (h0 + h1))) * f0 + ((h1 - h0) / (h0 * h1)) * f1 + (h0 / (h1 * (h0 + h1))) * f2;
        };
        Eigen::Vector3d de;
        for (int c = 0; c < 3; ++c) de[c] = deriv(E[k - 1][c], E[k][c], E[k + 1][c]);
        double dw = deriv(out.energy[k - 1], out.energy[k], out.energy[k + 1]);
        out.lhs[k] = stress[k].dot(de);
        double r = std::abs(0.5 * dw + out.dissipation[k] - out.lhs[k]);
        out.residual = std::max(out.residual, r);
        out.scale = std::max(out.scale, std::abs(out.lhs[k]));
    }
    return out;
}

} // namespace homog
