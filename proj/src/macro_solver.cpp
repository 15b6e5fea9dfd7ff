#include "homog/macro_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace homog {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// I_k(x) = int_0^1 tau^k exp(-x tau) dtau and J_k(x) = (1/(k+1) - I_k(x)) / x.
struct ExpMoments {
    double I0 = 0, I1 = 0, J0 = 0, J1 = 0;
};

ExpMoments exp_moments(double x) {
    ExpMoments m;
    if (x < 1.0) {
        double term = 1.0;  // (-x)^j / j!
        double s = 1.0;     // (-1)^{j+1} x^{j-1} / j!, from j = 1
        for (int j = 0; j < 40; ++j) {
            m.I0 += term / (j + 1);
            m.I1 += term / (j + 2);
            term *= -x / (j + 1);
        }
        for (int j = 1; j < 40; ++j) {
            m.J0 += s / (j + 1);
            m.J1 += s / (j + 2);
            s *= -x / (j + 1);
        }
    } else {
        double ex = std::exp(-x);
        m.I0 = (1.0 - ex) / x;
        m.I1 = (m.I0 - ex) / x;
        m.J0 = (1.0 - m.I0) / x;
        m.J1 = (0.5 - m.I1) / x;
    }
    return m;
}

// One step of W' = u - gamma W with u linear over the step:
//   W_{n+1} = a W_n + c0 u_n + c1 u_{n+1}
//   mean of W over the step = p W_n + b0 u_n + b1 u_{n+1}
struct StepCoefs {
    double gamma, a, c0, c1, p, b0, b1;
};

StepCoefs step_coefs(double gamma, double dt) {
    double x = gamma * dt;
    ExpMoments m = exp_moments(x);
    StepCoefs c;
    c.gamma = gamma;
    c.a = std::exp(-x);
    c.c0 = dt * m.I1;
    c.c1 = dt * (m.I0 - m.I1);
    c.p = m.I0;
    c.b0 = dt * m.J1;
    c.b1 = dt * (m.J0 - m.J1);
    return c;
}

// W at s in [0, dt] given W_n, u_n and u(s) (u linear on [0, s]).
Eigen::VectorXd history_at(double gamma, double s, const Eigen::VectorXd &w, const Eigen::VectorXd &u0,
                           const Eigen::VectorXd &us) {
    if (s == 0.0) return w;
    ExpMoments m = exp_moments(gamma * s);
    return std::exp(-gamma * s) * w + s * (m.I1 * u0 + (m.I0 - m.I1) * us);
}

Eigen::VectorXd gather(const MacroQuadPoint &q, const Eigen::VectorXd &u) {
    Eigen::VectorXd out(q.dofs.size());
    for (size_t i = 0; i < q.dofs.size(); ++i) out[i] = q.dofs[i] >= 0 ? u[q.dofs[i]] : 0.0;
    return out;
}

void scatter(const MacroQuadPoint &q, const Eigen::VectorXd &local, Eigen::VectorXd &out) {
    for (size_t i = 0; i < q.dofs.size(); ++i)
        if (q.dofs[i] >= 0) out[q.dofs[i]] += local[i];
}

// 5-point Gauss-Legendre on [0, 1].
const double kGaussX[5] = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                           0.95308992296933200};
const double kGaussW[5] = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                           0.23931433524968324, 0.11846344252809454};

void build_1d(const MacroSpec &s, MacroProblem &p) {
    const int ne = s.nx, nn = 2 * ne + 1;
    p.nodes.resize(nn, 1);
    for (int i = 0; i < nn; ++i) p.nodes(i, 0) = s.lx * i / (2.0 * ne);
    p.free_of_dof.assign(nn, -1);
    for (int i = 1; i < nn - 1; ++i) {
        p.free_of_dof[i] = static_cast<int>(p.dof_of_free.size());
        p.dof_of_free.push_back(i);
    }
    const double g = 0.5 * std::sqrt(0.6);
    const double gx[3] = {0.5 - g, 0.5, 0.5 + g}, gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    const double he = s.lx / ne;
    for (int e = 0; e < ne; ++e) {
        int nodes[3] = {2 * e, 2 * e + 1, 2 * e + 2};
        for (int k = 0; k < 3; ++k) {
            double xi = gx[k];
            MacroQuadPoint q;
            q.weight = gw[k] * he;
            q.x = Eigen::VectorXd::Constant(1, p.nodes(nodes[0], 0) + xi * he);
            q.N.resize(1, 3);
            q.D.resize(1, 3);
            q.N << (1 - xi) * (1 - 2 * xi), 4 * xi * (1 - xi), xi * (2 * xi - 1);
            q.D << (4 * xi - 3) / he, (4 - 8 * xi) / he, (4 * xi - 1) / he;
            for (int a = 0; a < 3; ++a) q.dofs.push_back(p.free_of_dof[nodes[a]]);
            p.qp.push_back(std::move(q));
        }
    }
}

void build_2d(const MacroSpec &s, MacroProblem &p) {
    const int nx = s.nx, ny = s.ny, nn = (nx + 1) * (ny + 1);
    p.nodes.resize(nn, 2);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            p.nodes(j * (nx + 1) + i, 0) = s.lx * i / nx;
            p.nodes(j * (nx + 1) + i, 1) = s.ly * j / ny;
        }
    p.free_of_dof.assign(2 * nn, -1);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            if (i == 0 || j == 0 || i == nx || j == ny) continue;
            int n = j * (nx + 1) + i;
            for (int c = 0; c < 2; ++c) {
                p.free_of_dof[2 * n + c] = static_cast<int>(p.dof_of_free.size());
                p.dof_of_free.push_back(2 * n + c);
            }
        }
    const double bary[3][2] = {{1.0 / 6, 1.0 / 6}, {2.0 / 3, 1.0 / 6}, {1.0 / 6, 2.0 / 3}};
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int n00 = j * (nx + 1) + i, n10 = n00 + 1, n01 = n00 + nx + 1, n11 = n01 + 1;
            int tris[2][3] = {{n00, n10, n11}, {n00, n11, n01}};
            for (auto &tri : tris) {
                Eigen::Matrix2d J;
                J.col(0) = (p.nodes.row(tri[1]) - p.nodes.row(tri[0])).transpose();
                J.col(1) = (p.nodes.row(tri[2]) - p.nodes.row(tri[0])).transpose();
                double area = 0.5 * J.determinant();
                Eigen::Matrix<double, 3, 2> dref;
                dref << -1, -1, 1, 0, 0, 1;
                Eigen::Matrix<double, 3, 2> grad = dref * J.inverse();
                Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 6);
                for (int a = 0; a < 3; ++a) {
                    D(0, 2 * a) = grad(a, 0);
                    D(1, 2 * a + 1) = grad(a, 1);
                    D(2, 2 * a) = grad(a, 1) / kSqrt2;
                    D(2, 2 * a + 1) = grad(a, 0) / kSqrt2;
                }
                for (auto &b : bary) {
                    double l[3] = {1 - b[0] - b[1], b[0], b[1]};
                    MacroQuadPoint q;
                    q.weight = area / 3.0;
                    q.x = (l[0] * p.nodes.row(tri[0]) + l[1] * p.nodes.row(tri[1]) + l[2] * p.nodes.row(tri[2]))
                              .transpose();
                    q.N = Eigen::MatrixXd::Zero(2, 6);
                    for (int a = 0; a < 3; ++a) {
                        q.N(0, 2 * a) = l[a];
                        q.N(1, 2 * a + 1) = l[a];
                    }
                    q.D = D;
                    for (int a = 0; a < 3; ++a)
                        for (int c = 0; c < 2; ++c) q.dofs.push_back(p.free_of_dof[2 * tri[a] + c]);
                    p.qp.push_back(std::move(q));
                }
            }
        }
}

Eigen::VectorXd nodal_values(const MacroProblem &p, const FieldFn &fn, const char *name, bool check_boundary) {
    const int nn = p.n_nodes();
    Eigen::VectorXd full = Eigen::VectorXd::Zero(nn * p.ncomp);
    if (!fn) return full;
    for (int n = 0; n < nn; ++n) {
        Eigen::VectorXd v = fn(p.nodes.row(n).transpose());
        if (v.size() != p.ncomp) {
            std::ostringstream os;
            os << name << " has " << v.size() << " components, expected " << p.ncomp;
            throw Error(ErrorKind::InvalidParameter, os.str());
        }
        full.segment(n * p.ncomp, p.ncomp) = v;
    }
    if (check_boundary) {
        double big = full.cwiseAbs().maxCoeff();
        for (int d = 0; d < full.size(); ++d)
            if (p.free_of_dof[d] < 0 && std::abs(full[d]) > 1e-12 * std::max(big, 1.0)) {
                std::ostringstream os;
                os << name << " does not vanish on the boundary (value " << full[d] << ")";
                throw Error(ErrorKind::InvalidParameter, os.str());
            }
    }
    return full;
}

Eigen::VectorXd to_free(const MacroProblem &p, const Eigen::VectorXd &full) {
    Eigen::VectorXd out(p.n_free());
    for (int i = 0; i < p.n_free(); ++i) out[i] = full[p.dof_of_free[i]];
    return out;
}

double quad_form(const SpMat &k, const Eigen::VectorXd &x) { return x.dot(k * x); }

} // namespace

// --- problem -----------------------------------------------------------------

struct MacroProblem::Cache {
    double dt = -1.0;
    std::vector<StepCoefs> coefs;
    Eigen::SimplicialLDLT<SpMat> ldlt;
};

Tensor4 restrict_tensor(const Tensor4 &t, int dim) {
    if (t.dim() == dim) return t;
    if (dim == 1) return Tensor4(1, t.matrix().topLeftCorner(1, 1));
    std::ostringstream os;
    os << "cannot use a tensor of dimension " << t.dim() << " in dimension " << dim;
    throw Error(ErrorKind::InvalidParameter, os.str());
}

double effective_density(double rho_s, double rho_l, double fluid_fraction) {
    return rho_s * (1.0 - fluid_fraction) + rho_l * fluid_fraction;
}

SpMat MacroProblem::stiffness(const Tensor4 &c) const {
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto &q : qp) {
        Eigen::MatrixXd ke = q.weight * q.D.transpose() * c.matrix() * q.D;
        for (size_t i = 0; i < q.dofs.size(); ++i) {
            if (q.dofs[i] < 0) continue;
            for (size_t j = 0; j < q.dofs.size(); ++j)
                if (q.dofs[j] >= 0) trip.emplace_back(q.dofs[i], q.dofs[j], ke(i, j));
        }
    }
    SpMat k(n_free(), n_free());
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

Eigen::VectorXd MacroProblem::load(double t) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_free());
    if (!f) return out;
    for (const auto &q : qp) {
        Eigen::VectorXd fv = f(t, q.x);
        scatter(q, q.weight * q.N.transpose() * fv, out);
    }
    return out;
}

Tensor4 MacroProblem::R_at(double t) const {
    ++R_evaluations;
    if (R_t.empty()) return Tensor4::zero(dim);
    if (t <= R_t.front()) return R_table.front();
    if (t >= R_t.back()) return R_table.back();
    auto it = std::upper_bound(R_t.begin(), R_t.end(), t);
    size_t k = static_cast<size_t>(it - R_t.begin()) - 1;
    double s = (t - R_t[k]) / (R_t[k + 1] - R_t[k]);
    return R_table[k] * (1.0 - s) + R_table[k + 1] * s;
}

Eigen::VectorXd MacroProblem::R_forcing(double t) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_free());
    if (!use_R) return out;
    Eigen::MatrixXd r = R_at(t).matrix();
    for (const auto &q : qp) scatter(q, q.weight * q.D.transpose() * (r * (q.D * gather(q, u0))), out);
    return out;
}

Eigen::MatrixXd MacroProblem::full_field(const Eigen::VectorXd &u) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_nodes(), ncomp);
    for (int i = 0; i < n_free(); ++i) {
        int d = dof_of_free[i];
        out(d / ncomp, d % ncomp) = u[i];
    }
    return out;
}

MacroProblem build_macro_problem(const MacroSpec &s) {
    if (s.dim != 1 && s.dim != 2) throw Error(ErrorKind::InvalidParameter, "macro domain must be 1D or 2D");
    if (!(s.lx > 0) || (s.dim == 2 && !(s.ly > 0))) throw Error(ErrorKind::InvalidParameter, "domain size must be positive");
    if (s.nx < 1 || (s.dim == 2 && s.ny < 1)) throw Error(ErrorKind::InvalidParameter, "element counts must be positive");
    if (!(s.rho_s > 0) || !(s.rho_l > 0)) throw Error(ErrorKind::InvalidParameter, "densities must be positive");
    if (!(s.fluid_fraction >= 0 && s.fluid_fraction < 1))
        throw Error(ErrorKind::InvalidParameter, "fluid fraction must lie in [0, 1)");
    if (s.R_t.size() != s.R_table.size()) throw Error(ErrorKind::InvalidParameter, "R table is ragged");
    for (size_t k = 1; k < s.R_t.size(); ++k)
        if (!(s.R_t[k] > s.R_t[k - 1])) throw Error(ErrorKind::InvalidParameter, "R table times must increase");

    MacroProblem p;
    p.dim = s.dim;
    p.ncomp = s.dim;
    p.rho_s = s.rho_s;
    p.rho_l = s.rho_l;
    p.fluid_fraction = s.fluid_fraction;
    p.rho_eff = effective_density(s.rho_s, s.rho_l, s.fluid_fraction);

    p.A_h = restrict_tensor(s.A_h, s.dim);
    if (min_sym_eigenvalue(p.A_h, 1e-8) <= 0) throw Error(ErrorKind::InvalidParameter, "A_h is not positive definite");
    p.kernel.A_h = p.A_h;
    p.kernel.residual = s.kernel.residual;
    p.kernel.stagnated = s.kernel.stagnated;
    p.kernel.source = s.kernel.source;
    for (const auto &term : s.kernel.terms) {
        if (!(term.rate > 0)) throw Error(ErrorKind::InvalidParameter, "kernel rates must be positive");
        p.kernel.terms.push_back({term.rate, restrict_tensor(term.weight, s.dim)});
    }
    p.use_R = !s.well_prepared && !s.R_t.empty();
    for (const auto &r : s.R_table) p.R_table.push_back(restrict_tensor(r, s.dim));
    p.R_t = s.R_t;
    p.f = s.f;

    if (s.dim == 1)
        build_1d(s, p);
    else
        build_2d(s, p);

    std::vector<Eigen::Triplet<double>> trip;
    for (const auto &q : p.qp) {
        Eigen::MatrixXd me = p.rho_eff * q.weight * q.N.transpose() * q.N;
        for (size_t i = 0; i < q.dofs.size(); ++i) {
            if (q.dofs[i] < 0) continue;
            for (size_t j = 0; j < q.dofs.size(); ++j)
                if (q.dofs[j] >= 0) trip.emplace_back(q.dofs[i], q.dofs[j], me(i, j));
        }
    }
    p.M.resize(p.n_free(), p.n_free());
    p.M.setFromTriplets(trip.begin(), trip.end());
    p.K_A = p.stiffness(p.A_h);
    for (const auto &term : p.kernel.terms) p.K_G.push_back(p.stiffness(term.weight));

    p.u0 = to_free(p, nodal_values(p, s.u0, "u0", true));
    Eigen::VectorXd u1 = nodal_values(p, s.u1, "u1", false), v0 = nodal_values(p, s.v0, "v0", false);
    Eigen::VectorXd vel = (s.rho_s * (1.0 - s.fluid_fraction) * u1 + s.rho_l * s.fluid_fraction * v0) / p.rho_eff;
    p.v_init = to_free(p, vel);

    Eigen::SimplicialLDLT<SpMat> mass(p.M);
    if (mass.info() != Eigen::Success) throw Error(ErrorKind::Solver, "mass matrix factorization failed");
    p.a0 = mass.solve(p.load(0.0) - p.K_A * p.u0 - p.R_forcing(0.0));
    p.cache = std::make_shared<MacroProblem::Cache>();
    return p;
}

// --- time stepping -------------------------------------------------------------

namespace {

void stored_energy(const MacroProblem &p, const MacroState &s, EnergyLedger &e) {
    e.kinetic = p.kinetic(s.v);
    e.elastic_modified = 0.5 * quad_form(p.K_A, s.u);
    e.memory_aux = 0.0;
    for (size_t k = 0; k < p.kernel.terms.size(); ++k) {
        double g = p.kernel.terms[k].rate;
        e.elastic_modified += 0.5 / g * quad_form(p.K_G[k], s.u);
        Eigen::VectorXd q = s.u - g * s.W[k];
        e.memory_aux -= 0.5 / g * quad_form(p.K_G[k], q);
    }
}

const MacroProblem::Cache &prepare(const MacroProblem &p, double dt) {
    MacroProblem::Cache &c = *p.cache;
    if (c.dt == dt) return c;
    c.coefs.clear();
    SpMat keff = (2.0 / (dt * dt)) * p.M + 0.5 * p.K_A;
    for (size_t k = 0; k < p.kernel.terms.size(); ++k) {
        c.coefs.push_back(step_coefs(p.kernel.terms[k].rate, dt));
        keff += c.coefs.back().b1 * p.K_G[k];
    }
    c.ldlt.compute(keff);
    if (c.ldlt.info() != Eigen::Success) throw Error(ErrorKind::Solver, "effective stiffness factorization failed");
    c.dt = dt;
    return c;
}

} // namespace

MacroState initial_state(const MacroProblem &p) {
    MacroState s;
    s.u = p.u0;
    s.v = p.v_init;
    s.a = p.a0;
    s.W.assign(p.kernel.terms.size(), Eigen::VectorXd::Zero(p.n_free()));
    stored_energy(p, s, s.energy);
    return s;
}

MacroState step(const MacroProblem &p, const MacroState &s, double dt) {
    if (!(dt > 0)) throw Error(ErrorKind::InvalidParameter, "time step must be positive");
    const auto &c = prepare(p, dt);
    const size_t nk = p.kernel.terms.size();
    double t1 = s.t + dt;
    Eigen::VectorXd fbar = 0.5 * (p.load(s.t) + p.load(t1));
    Eigen::VectorXd rbar = 0.5 * (p.R_forcing(s.t) + p.R_forcing(t1));
    Eigen::VectorXd rhs = (2.0 / dt) * (p.M * s.v) + fbar - rbar - p.K_A * s.u;
    for (size_t k = 0; k < nk; ++k) rhs -= p.K_G[k] * (c.coefs[k].p * s.W[k] + (c.coefs[k].b0 + c.coefs[k].b1) * s.u);
    Eigen::VectorXd du = c.ldlt.solve(rhs);
    if (c.ldlt.info() != Eigen::Success || !du.allFinite()) throw Error(ErrorKind::Solver, "time step solve failed");

    MacroState n;
    n.t = t1;
    n.u = s.u + du;
    n.v = 2.0 / dt * du - s.v;
    n.a = 2.0 / dt * (n.v - s.v) - s.a;
    n.W.resize(nk);
    for (size_t k = 0; k < nk; ++k) n.W[k] = c.coefs[k].a * s.W[k] + c.coefs[k].c0 * s.u + c.coefs[k].c1 * n.u;

    n.energy = s.energy;
    stored_energy(p, n, n.energy);
    n.energy.work += du.dot(fbar - rbar);
    // int_step B_k e(Q_k):e(Q_k), Q_k = u - gamma_k W_k
    double diss = 0.0;
    for (size_t k = 0; k < nk; ++k) {
        double g = p.kernel.terms[k].rate;
        for (int i = 0; i < 5; ++i) {
            double sx = kGaussX[i] * dt;
            Eigen::VectorXd us = s.u + kGaussX[i] * du;
            Eigen::VectorXd q = us - g * history_at(g, sx, s.W[k], s.u, us);
            diss -= kGaussW[i] * dt * quad_form(p.K_G[k], q);
        }
    }
    n.energy.dissipated += diss;
    return n;
}

MacroRun run(const MacroProblem &p, double T, double dt, int store_every) {
    if (!(T >= 0) || !(dt > 0)) throw Error(ErrorKind::InvalidParameter, "run needs T >= 0 and dt > 0");
    if (store_every < 1) throw Error(ErrorKind::InvalidParameter, "store_every must be positive");
    long n = static_cast<long>(std::ceil(T / dt - 1e-9));
    double h = n > 0 ? T / n : dt;
    MacroRun out;
    MacroState s = initial_state(p);
    const double e0 = s.energy.stored();
    auto row = [](const MacroState &st) {
        const auto &e = st.energy;
        return EnergyRow{st.t, e.kinetic, e.elastic_modified, e.memory_aux, e.dissipated, e.stored()};
    };
    out.t.push_back(0.0);
    out.u.push_back(s.u);
    out.energy.push_back(row(s));
    double scale = std::max(e0, std::numeric_limits<double>::min());
    double worst_balance = 0.0;
    for (long k = 1; k <= n; ++k) {
        MacroState next = step(p, s, h);
        next.t = k * h;
        double before = s.energy.stored(), after = next.energy.stored();
        double ref = std::max(before, e0);
        if (ref > 0) out.max_increase = std::max(out.max_increase, (after - before) / ref);
        scale = std::max(scale, std::abs(next.energy.work));
        worst_balance = std::max(worst_balance, std::abs(after + next.energy.dissipated - next.energy.work - e0));
        s = std::move(next);
        out.energy.push_back(row(s));
        if (k % store_every == 0 || k == n) {
            out.t.push_back(s.t);
            out.u.push_back(s.u);
        }
    }
    out.balance_residual = worst_balance / scale;
    return out;
}

// --- auxiliary-variable form -------------------------------------------------------

PbejRun solve_pbej_auxiliary(const MacroProblem &p, double T, double dt) {
    if (p.kernel.terms.size() != 1)
        throw Error(ErrorKind::InvalidParameter, "auxiliary-variable form needs exactly one kernel term");
    if (!(T >= 0) || !(dt > 0)) throw Error(ErrorKind::InvalidParameter, "run needs T >= 0 and dt > 0");
    const double g = p.kernel.terms[0].rate;
    const Tensor4 B = p.kernel.terms[0].weight * -1.0;
    if (min_sym_eigenvalue(p.A_h * g - B, 1e-8) <= 0)
        throw Error(ErrorKind::InvalidParameter, "gamma A_h - B is not positive definite");
    const SpMat KE = p.stiffness(p.A_h - B * (1.0 / g));
    const SpMat KB = p.stiffness(B);

    long n = static_cast<long>(std::ceil(T / dt - 1e-9));
    double h = n > 0 ? T / n : dt;
    const double den = g * (2.0 + g * h);
    SpMat keff = (2.0 / (h * h)) * p.M + 0.5 * KE + (1.0 / den) * KB;
    Eigen::SimplicialLDLT<SpMat> ldlt(keff);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::Solver, "effective stiffness factorization failed");

    Eigen::VectorXd u = p.u0, v = p.v_init, w = Eigen::VectorXd::Zero(p.n_free());
    auto energy = [&](const Eigen::VectorXd &uu, const Eigen::VectorXd &vv, const Eigen::VectorXd &ww, double t,
                      double diss) {
        Eigen::VectorXd q = uu - g * ww;
        EnergyRow r{t, p.kinetic(vv), 0.5 * quad_form(KE, uu), 0.5 / g * quad_form(KB, q), diss, 0.0};
        r.total = r.kinetic + r.elastic_modified + r.memory_aux;
        return r;
    };
    PbejRun out;
    out.t.push_back(0.0);
    out.u.push_back(u);
    out.energy.push_back(energy(u, v, w, 0.0, 0.0));
    double eref = out.energy[0].total;
    double worst = 0.0, diss = 0.0;
    Eigen::VectorXd f0 = p.load(0.0);
    for (long k = 1; k <= n; ++k) {
        double t1 = k * h;
        Eigen::VectorXd f1 = p.load(t1);
        Eigen::VectorXd fbar = 0.5 * (f0 + f1);
        Eigen::VectorXd rhs = (2.0 / h) * (p.M * v) + fbar - KE * u - (2.0 / den) * (KB * (u - g * w));
        Eigen::VectorXd du = ldlt.solve(rhs);
        if (!du.allFinite()) throw Error(ErrorKind::Solver, "time step solve failed");
        Eigen::VectorXd ubar = u + 0.5 * du;
        Eigen::VectorXd wbar = (2.0 * w + h * ubar) / (2.0 + g * h);
        Eigen::VectorXd qbar = ubar - g * wbar;
        Eigen::VectorXd u1 = u + du, v1 = 2.0 / h * du - v, w1 = 2.0 * wbar - w;
        diss += h * quad_form(KB, qbar);
        EnergyRow r = energy(u1, v1, w1, t1, diss);
        // Energy difference against the trapezoid rule for dissipation and power.
        double d0 = quad_form(KB, u - g * w), d1 = quad_form(KB, u1 - g * w1);
        double p0 = f0.dot(v), p1 = f1.dot(v1);
        double defect = r.total - out.energy.back().total + 0.5 * h * (d0 + d1) - 0.5 * h * (p0 + p1);
        eref = std::max(eref, r.total);
        worst = std::max(worst, std::abs(defect) / h);
        double inc = r.total - out.energy.back().total - du.dot(fbar);
        if (eref > 0) out.max_increase = std::max(out.max_increase, inc / eref);
        u = u1;
        v = v1;
        w = w1;
        f0 = f1;
        out.t.push_back(t1);
        out.u.push_back(u);
        out.energy.push_back(r);
    }
    out.residual = eref > 0 ? worst / eref : worst;
    return out;
}

// --- memory stress ---------------------------------------------------------------

namespace {

// W_k at every sample of a displacement history.
std::vector<std::vector<Eigen::VectorXd>> replay_histories(const MacroProblem &p, const std::vector<double> &t,
                                                           const std::vector<Eigen::VectorXd> &u) {
    if (t.size() != u.size() || t.empty()) throw Error(ErrorKind::InvalidParameter, "trajectory is empty or ragged");
    const size_t nk = p.kernel.terms.size();
    std::vector<std::vector<Eigen::VectorXd>> W(nk);
    for (size_t k = 0; k < nk; ++k) {
        W[k].push_back(Eigen::VectorXd::Zero(u[0].size()));
        for (size_t j = 0; j + 1 < t.size(); ++j) {
            StepCoefs c = step_coefs(p.kernel.terms[k].rate, t[j + 1] - t[j]);
            W[k].push_back(c.a * W[k].back() + c.c0 * u[j] + c.c1 * u[j + 1]);
        }
    }
    return W;
}

} // namespace

std::vector<Eigen::VectorXd> memory_stress(const MacroProblem &p, const std::vector<double> &t,
                                           const std::vector<Eigen::VectorXd> &u) {
    auto W = replay_histories(p, t, u);
    std::vector<Eigen::VectorXd> out;
    for (const auto &q : p.qp) {
        Eigen::VectorXd sig = Eigen::VectorXd::Zero(q.D.rows());
        for (size_t k = 0; k < W.size(); ++k) sig += p.kernel.terms[k].weight.matrix() * (q.D * gather(q, W[k].back()));
        out.push_back(sig);
    }
    return out;
}

ConsistencyReport convolution_consistency(const MacroProblem &p, const std::vector<double> &t,
                                          const std::vector<Eigen::VectorXd> &u, DirectRule rule) {
    ConsistencyReport rep;
    auto W = replay_histories(p, t, u);
    const int nt = static_cast<int>(t.size());
    const int nq = static_cast<int>(p.qp.size());
    if (nt < 2 || nq == 0 || W.empty()) return rep;
    std::vector<int> probes_q, probes_t;
    for (int i = 0; i < std::min(10, nq); ++i) {
        int q = nq == 1 ? 0 : static_cast<int>(std::lround(i * (nq - 1) / 9.0));
        if (probes_q.empty() || probes_q.back() != q) probes_q.push_back(q);
    }
    for (int i = 1; i <= 10; ++i) {
        int n = static_cast<int>(std::lround(i * (nt - 1) / 10.0));
        if (n >= 1 && (probes_t.empty() || probes_t.back() != n)) probes_t.push_back(n);
    }
    double worst = 0.0;
    for (int qi : probes_q) {
        const auto &q = p.qp[qi];
        std::vector<Eigen::VectorXd> e(nt);
        for (int j = 0; j < nt; ++j) e[j] = q.D * gather(q, u[j]);
        for (int n : probes_t) {
            Eigen::VectorXd rec = Eigen::VectorXd::Zero(q.D.rows()), dir = rec;
            for (size_t k = 0; k < W.size(); ++k) {
                double g = p.kernel.terms[k].rate;
                const Eigen::MatrixXd &G = p.kernel.terms[k].weight.matrix();
                rec += G * (q.D * gather(q, W[k][n]));
                Eigen::VectorXd acc = Eigen::VectorXd::Zero(q.D.rows());
                for (int j = 0; j < n; ++j) {
                    double hj = t[j + 1] - t[j];
                    if (rule == DirectRule::Trapezoid) {
                        acc += 0.5 * hj * (std::exp(-g * (t[n] - t[j])) * e[j] + std::exp(-g * (t[n] - t[j + 1])) * e[j + 1]);
                    } else {
                        ExpMoments m = exp_moments(g * hj);
                        acc += std::exp(-g * (t[n] - t[j + 1])) * hj * (m.I1 * e[j] + (m.I0 - m.I1) * e[j + 1]);
                    }
                }
                dir += G * acc;
            }
            rep.scale = std::max(rep.scale, rec.norm());
            worst = std::max(worst, (rec - dir).norm());
            ++rep.probes;
        }
    }
    rep.max_deviation = rep.scale > 0 ? worst / rep.scale : worst;
    return rep;
}

} // namespace homog
