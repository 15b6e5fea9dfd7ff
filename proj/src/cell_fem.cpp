#include "homog/cell_fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace homog {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kPeriodicTol = 1e-10;

using Key = std::pair<long long, long long>;
Key coord_key(const Vec2 &p) {
    return {std::llround(p.x() * 1e9), std::llround(p.y() * 1e9)};
}

std::array<Vec2, 3> tri_verts(const CellDiscretization &d, int t) {
    const auto &e = d.p2_tris[t];
    return {d.p2_nodes[e[0]], d.p2_nodes[e[1]], d.p2_nodes[e[2]]};
}

// Packed strain of the shape function with gradient g, for displacement component c.
Eigen::Vector3d shape_strain(const Vec2 &g, int c) {
    if (c == 0) return Eigen::Vector3d(g.x(), 0.0, g.y() / kSqrt2);
    return Eigen::Vector3d(0.0, g.y(), g.x() / kSqrt2);
}

} // namespace

const std::vector<QuadPoint> &triangle_rule() {
    static const std::vector<QuadPoint> rule = [] {
        const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
        const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
        return std::vector<QuadPoint>{
            {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
            {a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
            {a2, b2, b2, w2}, {b2, a2, b2, w2}, {b2, b2, a2, w2},
        };
    }();
    return rule;
}

double triangle_area(const std::array<Vec2, 3> &v) {
    return 0.5 * ((v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x());
}

void p2_shape(const std::array<Vec2, 3> &v, const QuadPoint &q, double n[6], Vec2 grad[6]) {
    double twoA = 2.0 * triangle_area(v);
    Vec2 g0((v[1].y() - v[2].y()) / twoA, (v[2].x() - v[1].x()) / twoA);
    Vec2 g1((v[2].y() - v[0].y()) / twoA, (v[0].x() - v[2].x()) / twoA);
    Vec2 g2((v[0].y() - v[1].y()) / twoA, (v[1].x() - v[0].x()) / twoA);
    const double l0 = q.l0, l1 = q.l1, l2 = q.l2;
    if (n) {
        n[0] = l0 * (2 * l0 - 1);
        n[1] = l1 * (2 * l1 - 1);
        n[2] = l2 * (2 * l2 - 1);
        n[3] = 4 * l0 * l1;
        n[4] = 4 * l1 * l2;
        n[5] = 4 * l2 * l0;
    }
    if (grad) {
        grad[0] = (4 * l0 - 1) * g0;
        grad[1] = (4 * l1 - 1) * g1;
        grad[2] = (4 * l2 - 1) * g2;
        grad[3] = 4 * (l0 * g1 + l1 * g0);
        grad[4] = 4 * (l1 * g2 + l2 * g1);
        grad[5] = 4 * (l2 * g0 + l0 * g2);
    }
}

std::vector<std::array<int, 2>> compute_periodic_pairs(const std::vector<Vec2> &nodes) {
    std::map<Key, int> lookup;
    for (size_t i = 0; i < nodes.size(); ++i) lookup[coord_key(nodes[i])] = static_cast<int>(i);
    std::vector<std::array<int, 2>> pairs;
    auto find = [&](const Vec2 &p, int from) {
        auto it = lookup.find(coord_key(p));
        if (it == lookup.end() || (nodes[it->second] - p).norm() > kPeriodicTol) {
            std::ostringstream os;
            os << "node " << from << " at (" << nodes[from].x() << ", " << nodes[from].y()
               << ") has no periodic partner";
            throw Error(ErrorKind::Mesh, os.str());
        }
        return it->second;
    };
    for (size_t i = 0; i < nodes.size(); ++i) {
        const Vec2 &p = nodes[i];
        if (std::abs(p.x() - 0.5) < kPeriodicTol) pairs.push_back({int(i), find(p - Vec2(1, 0), int(i))});
        if (std::abs(p.y() - 0.5) < kPeriodicTol) pairs.push_back({int(i), find(p - Vec2(0, 1), int(i))});
    }
    // Every node on x = -1/2 or y = -1/2 must be hit.
    std::vector<int> hit(nodes.size(), 0);
    for (const auto &pr : pairs) hit[pr[1]] = 1;
    for (size_t i = 0; i < nodes.size(); ++i) {
        const Vec2 &p = nodes[i];
        bool on_low = std::abs(p.x() + 0.5) < kPeriodicTol || std::abs(p.y() + 0.5) < kPeriodicTol;
        if (on_low && !hit[i]) {
            std::ostringstream os;
            os << "node " << i << " on a lower face has no periodic partner";
            throw Error(ErrorKind::Mesh, os.str());
        }
    }
    return pairs;
}

CellDiscretization build_cell(const CellGeometry &geometry) {
    return build_cell_from_mesh(geometry, generate_cell_mesh(geometry));
}

CellDiscretization build_cell_from_mesh(const CellGeometry &geometry, const CellMesh &mesh) {
    geometry.validate();
    CellDiscretization d;
    d.geometry = geometry;
    d.mesh = mesh;
    const int nv = static_cast<int>(mesh.nodes.size());
    const int nt = static_cast<int>(mesh.tris.size());
    if (nt == 0 || static_cast<int>(mesh.region.size()) != nt)
        throw Error(ErrorKind::Mesh, "mesh has no triangles or region tags do not match");

    // P2 nodes.
    d.p2_nodes = mesh.nodes;
    std::map<std::pair<int, int>, int> edge_mid;
    auto midpoint = [&](int a, int b) {
        auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = edge_mid.find(key);
        if (it != edge_mid.end()) return it->second;
        int id = static_cast<int>(d.p2_nodes.size());
        d.p2_nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
        edge_mid[key] = id;
        return id;
    };
    for (int t = 0; t < nt; ++t) {
        const auto &v = mesh.tris[t];
        for (int k = 0; k < 3; ++k)
            if (v[k] < 0 || v[k] >= nv) throw Error(ErrorKind::Mesh, "triangle references a missing node");
        std::array<Vec2, 3> pv{mesh.nodes[v[0]], mesh.nodes[v[1]], mesh.nodes[v[2]]};
        if (triangle_area(pv) <= 0) {
            std::ostringstream os;
            os << "triangle " << t << " is degenerate or clockwise";
            throw Error(ErrorKind::Mesh, os.str());
        }
        d.p2_tris.push_back({v[0], v[1], v[2], midpoint(v[0], v[1]), midpoint(v[1], v[2]), midpoint(v[2], v[0])});
        if (mesh.region[t] == Solid) d.solid_tris.push_back(t);
        else if (mesh.region[t] == Fluid) d.fluid_tris.push_back(t);
        else throw Error(ErrorKind::Mesh, "unknown region tag");
    }
    const int np2 = static_cast<int>(d.p2_nodes.size());

    double area = d.total_area();
    if (std::abs(area - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "triangle areas sum to " << area << ", expected 1";
        throw Error(ErrorKind::Mesh, os.str());
    }

    // Periodic masters, resolved through chains (corners map twice).
    auto pairs = compute_periodic_pairs(d.p2_nodes);
    std::vector<int> partner(np2, -1), partner_y(np2, -1);
    for (const auto &pr : pairs) {
        const Vec2 &p = d.p2_nodes[pr[0]];
        if (std::abs(p.x() - 0.5) < kPeriodicTol && std::abs((d.p2_nodes[pr[1]] - p + Vec2(1, 0)).norm()) < kPeriodicTol)
            partner[pr[0]] = pr[1];
        else
            partner_y[pr[0]] = pr[1];
    }
    d.periodic_master.resize(np2);
    for (int i = 0; i < np2; ++i) {
        int m = i;
        if (partner[m] >= 0) m = partner[m];
        if (partner_y[m] >= 0) m = partner_y[m];
        if (partner[m] >= 0) m = partner[m];
        d.periodic_master[i] = m;
    }

    // Solid blocks in order of first appearance.
    d.solid_block.assign(np2, -1);
    std::vector<int> master_block(np2, -1);
    int nb = 0;
    for (int t : d.solid_tris)
        for (int k = 0; k < 6; ++k) {
            int node = d.p2_tris[t][k];
            int m = d.periodic_master[node];
            if (master_block[m] < 0) master_block[m] = nb++;
            d.solid_block[node] = master_block[m];
        }
    d.n_solid_dofs = 2 * nb;

    d.fluid_block.assign(np2, -1);
    nb = 0;
    for (int t : d.fluid_tris)
        for (int k = 0; k < 6; ++k) {
            int node = d.p2_tris[t][k];
            if (d.fluid_block[node] < 0) d.fluid_block[node] = nb++;
        }
    d.n_fluid_dofs = 2 * nb;
    d.pressure_index.assign(nv, -1);
    nb = 0;
    for (int t : d.fluid_tris)
        for (int k = 0; k < 3; ++k) {
            int node = d.p2_tris[t][k];
            if (d.pressure_index[node] < 0) d.pressure_index[node] = nb++;
        }
    d.n_pressure = nb;

    // Interface loop.
    const auto &loop = mesh.interface_nodes;
    if (loop.size() < 3) throw Error(ErrorKind::Mesh, "interface has fewer than 3 vertices");
    std::map<std::pair<int, int>, std::array<int, 2>> edge_regions;  // (solid count, fluid count)
    for (int t = 0; t < nt; ++t)
        for (int k = 0; k < 3; ++k) {
            int a = mesh.tris[t][k], b = mesh.tris[t][(k + 1) % 3];
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            edge_regions[key][mesh.region[t] == Solid ? 0 : 1] += 1;
        }
    const int nl = static_cast<int>(loop.size());
    for (int i = 0; i < nl; ++i) {
        int a = loop[i], b = loop[(i + 1) % nl];
        auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = edge_regions.find(key);
        if (it == edge_regions.end() || it->second[0] != 1 || it->second[1] != 1) {
            std::ostringstream os;
            os << "interface edge (" << a << ", " << b << ") does not separate solid from fluid";
            throw Error(ErrorKind::Mesh, os.str());
        }
        d.iface_nodes.push_back(a);
        d.iface_nodes.push_back(edge_mid.at(key));
    }
    int n_sep = 0;
    for (const auto &kv : edge_regions) n_sep += (kv.second[0] == 1 && kv.second[1] == 1);
    if (n_sep != nl) throw Error(ErrorKind::Mesh, "interface loop does not cover every solid/fluid edge");

    const int ni = static_cast<int>(d.iface_nodes.size());
    d.iface_mass = Eigen::MatrixXd::Zero(2 * ni, 2 * ni);
    double signed_area = 0;
    for (int i = 0; i < nl; ++i) {
        int pa = 2 * i, pm = 2 * i + 1, pb = (2 * i + 2) % ni;
        d.iface_edges.push_back({pa, pb, pm});
        const Vec2 &xa = d.p2_nodes[d.iface_nodes[pa]], &xb = d.p2_nodes[d.iface_nodes[pb]];
        Vec2 e = xb - xa;
        double len = e.norm();
        signed_area += 0.5 * (xa.x() * xb.y() - xa.y() * xb.x());
        d.iface_normals.push_back(Vec2(e.y(), -e.x()) / len);
        const double m1[3][3] = {{4, -1, 2}, {-1, 4, 2}, {2, 2, 16}};
        int idx[3] = {pa, pb, pm};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                for (int comp = 0; comp < 2; ++comp)
                    d.iface_mass(2 * idx[r] + comp, 2 * idx[c] + comp) += len / 30.0 * m1[r][c];
    }
    if (signed_area <= 0) throw Error(ErrorKind::Mesh, "interface loop must be counter-clockwise");
    for (int i = 0; i < ni; ++i)
        if (d.solid_block[d.iface_nodes[i]] < 0 || d.fluid_block[d.iface_nodes[i]] < 0)
            throw Error(ErrorKind::Mesh, "interface node missing from one of the phases");

    // Rigid motions, orthonormalized in L2(dO).
    Eigen::MatrixXd r(2 * ni, 3);
    for (int i = 0; i < ni; ++i) {
        const Vec2 &y = d.p2_nodes[d.iface_nodes[i]];
        r(2 * i, 0) = 1; r(2 * i + 1, 0) = 0;
        r(2 * i, 1) = 0; r(2 * i + 1, 1) = 1;
        r(2 * i, 2) = -y.y(); r(2 * i + 1, 2) = y.x();
    }
    Eigen::MatrixXd gram = r.transpose() * d.iface_mass * r;
    Eigen::LLT<Eigen::MatrixXd> gl(gram);
    if (gl.info() != Eigen::Success) throw Error(ErrorKind::Mesh, "degenerate interface: rigid motions are dependent");
    d.rigid = gl.matrixU().solve<Eigen::OnTheRight>(r);

    // Complement: with M = L L^T, L^T R has orthonormal columns; complete it by QR.
    Eigen::LLT<Eigen::MatrixXd> ml(d.iface_mass);
    Eigen::MatrixXd lr = ml.matrixU() * d.rigid;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(lr);
    Eigen::MatrixXd qfull = qr.householderQ() * Eigen::MatrixXd::Identity(2 * ni, 2 * ni);
    Eigen::MatrixXd q2 = qfull.rightCols(2 * ni - 3);
    d.hbasis = ml.matrixU().solve(q2);
    return d;
}

double CellDiscretization::solid_area() const {
    double a = 0;
    for (int t : solid_tris) a += triangle_area(tri_verts(*this, t));
    return a;
}

double CellDiscretization::fluid_area() const {
    double a = 0;
    for (int t : fluid_tris) a += triangle_area(tri_verts(*this, t));
    return a;
}

double CellDiscretization::perimeter() const {
    double p = 0;
    for (const auto &e : iface_edges) p += (p2_nodes[iface_nodes[e[1]]] - p2_nodes[iface_nodes[e[0]]]).norm();
    return p;
}

// --- interface fields -------------------------------------------------------

double trace_norm(const CellDiscretization &d, const Eigen::VectorXd &f) {
    return std::sqrt(std::max(0.0, f.dot(d.iface_mass * f)));
}

std::vector<Eigen::VectorXd> rigid_basis(const CellDiscretization &d) {
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k < d.rigid.cols(); ++k) out.push_back(d.rigid.col(k));
    return out;
}

Eigen::VectorXd project_P(const CellDiscretization &d, const Eigen::VectorXd &f) {
    if (f.size() != d.trace_size()) throw Error(ErrorKind::InvalidParameter, "interface field has wrong length");
    return d.rigid * (d.rigid.transpose() * (d.iface_mass * f));
}

TraceField project_Q(const CellDiscretization &d, const Eigen::VectorXd &f) {
    TraceField out;
    out.values = f - project_P(d, f);
    out.rigid_defect = rigid_defect(d, out.values);
    return out;
}

double rigid_defect(const CellDiscretization &d, const Eigen::VectorXd &f) {
    double n = trace_norm(d, f);
    if (n == 0.0) return 0.0;
    return trace_norm(d, project_P(d, f)) / n;
}

Eigen::VectorXd normal_flux_row(const CellDiscretization &d) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(d.trace_size());
    for (size_t e = 0; e < d.iface_edges.size(); ++e) {
        const auto &ed = d.iface_edges[e];
        double len = (d.p2_nodes[d.iface_nodes[ed[1]]] - d.p2_nodes[d.iface_nodes[ed[0]]]).norm();
        const Vec2 &nu = d.iface_normals[e];
        // Simpson weights of the P2 edge basis: 1/6, 1/6, 2/3.
        const double w[3] = {len / 6.0, len / 6.0, 2.0 * len / 3.0};
        for (int k = 0; k < 3; ++k) r.segment<2>(2 * ed[k]) += w[k] * nu;
    }
    return r;
}

Eigen::VectorXd trace_of_linear(const CellDiscretization &d, const SymMat &xi) {
    Eigen::Matrix2d m = xi.matrix();
    Eigen::VectorXd out(d.trace_size());
    for (int i = 0; i < d.n_iface(); ++i) out.segment<2>(2 * i) = m * d.p2_nodes[d.iface_nodes[i]];
    return out;
}

Eigen::VectorXd to_h_coords(const CellDiscretization &d, const Eigen::VectorXd &f) {
    return d.hbasis.transpose() * (d.iface_mass * f);
}

Eigen::VectorXd from_h_coords(const CellDiscretization &d, const Eigen::VectorXd &c) {
    return d.hbasis * c;
}

// --- assembly ---------------------------------------------------------------

SpMat assemble_elastic(const CellDiscretization &d, const Tensor4 &a) {
    if (a.dim() != 2) throw Error(ErrorKind::InvalidParameter, "cell problems need a 2D tensor");
    double amin = min_sym_eigenvalue(a, 1e-10);
    if (!(amin > 0)) throw Error(ErrorKind::InvalidParameter, "elasticity tensor is not positive definite");
    const Eigen::Matrix3d am = a.matrix();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(d.solid_tris.size() * 144);
    double n[6];
    Vec2 g[6];
    for (int t : d.solid_tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        Eigen::Matrix<double, 12, 12> ke = Eigen::Matrix<double, 12, 12>::Zero();
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, g);
            Eigen::Matrix<double, 3, 12> b;
            for (int k = 0; k < 6; ++k)
                for (int c = 0; c < 2; ++c) b.col(2 * k + c) = shape_strain(g[k], c);
            ke += (q.w * area) * b.transpose() * am * b;
        }
        int dof[12];
        for (int k = 0; k < 6; ++k)
            for (int c = 0; c < 2; ++c) dof[2 * k + c] = 2 * d.solid_block[d.p2_tris[t][k]] + c;
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) trip.emplace_back(dof[r], dof[c], ke(r, c));
    }
    SpMat k(d.n_solid_dofs, d.n_solid_dofs);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

Eigen::VectorXd assemble_strain_load(const CellDiscretization &d, const Tensor4 &a, const SymMat &xi) {
    Eigen::VectorXd stress = a.matrix() * xi.packed();
    return solid_strain_integral(d).transpose() * stress;
}

StokesForms assemble_stokes(const CellDiscretization &d, double mu) {
    if (!(mu > 0)) throw Error(ErrorKind::InvalidParameter, "viscosity must be positive");
    StokesForms out;
    out.viscous = 2.0 * mu * assemble_fluid_strain_gram(d);
    std::vector<Eigen::Triplet<double>> trip;
    double n[6];
    Vec2 g[6];
    for (int t : d.fluid_tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, g);
            double psi[3] = {q.l0, q.l1, q.l2};
            for (int i = 0; i < 3; ++i) {
                int p = d.pressure_index[d.p2_tris[t][i]];
                for (int k = 0; k < 6; ++k) {
                    int blk = d.fluid_block[d.p2_tris[t][k]];
                    trip.emplace_back(p, 2 * blk, -q.w * area * psi[i] * g[k].x());
                    trip.emplace_back(p, 2 * blk + 1, -q.w * area * psi[i] * g[k].y());
                }
            }
        }
    }
    out.divergence.resize(d.n_pressure, d.n_fluid_dofs);
    out.divergence.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SpMat assemble_fluid_strain_gram(const CellDiscretization &d) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(d.fluid_tris.size() * 144);
    double n[6];
    Vec2 g[6];
    for (int t : d.fluid_tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        Eigen::Matrix<double, 12, 12> ke = Eigen::Matrix<double, 12, 12>::Zero();
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, g);
            Eigen::Matrix<double, 3, 12> b;
            for (int k = 0; k < 6; ++k)
                for (int c = 0; c < 2; ++c) b.col(2 * k + c) = shape_strain(g[k], c);
            ke += (q.w * area) * b.transpose() * b;
        }
        int dof[12];
        for (int k = 0; k < 6; ++k)
            for (int c = 0; c < 2; ++c) dof[2 * k + c] = 2 * d.fluid_block[d.p2_tris[t][k]] + c;
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) trip.emplace_back(dof[r], dof[c], ke(r, c));
    }
    SpMat k(d.n_fluid_dofs, d.n_fluid_dofs);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

SpMat assemble_fluid_mass(const CellDiscretization &d) {
    std::vector<Eigen::Triplet<double>> trip;
    double n[6];
    for (int t : d.fluid_tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        Eigen::Matrix<double, 6, 6> me = Eigen::Matrix<double, 6, 6>::Zero();
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, nullptr);
            Eigen::Map<Eigen::Matrix<double, 6, 1>> nv(n);
            me += (q.w * area) * nv * nv.transpose();
        }
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                for (int comp = 0; comp < 2; ++comp)
                    trip.emplace_back(2 * d.fluid_block[d.p2_tris[t][r]] + comp,
                                      2 * d.fluid_block[d.p2_tris[t][c]] + comp, me(r, c));
    }
    SpMat m(d.n_fluid_dofs, d.n_fluid_dofs);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

namespace {
Eigen::MatrixXd strain_integral(const CellDiscretization &d, const std::vector<int> &tris,
                                const std::vector<int> &block, int ndofs) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3, ndofs);
    double n[6];
    Vec2 g[6];
    for (int t : tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, g);
            for (int k = 0; k < 6; ++k)
                for (int c = 0; c < 2; ++c)
                    out.col(2 * block[d.p2_tris[t][k]] + c) += (q.w * area) * shape_strain(g[k], c);
        }
    }
    return out;
}
} // namespace

Eigen::MatrixXd solid_strain_integral(const CellDiscretization &d) {
    return strain_integral(d, d.solid_tris, d.solid_block, d.n_solid_dofs);
}

Eigen::MatrixXd fluid_strain_integral(const CellDiscretization &d) {
    return strain_integral(d, d.fluid_tris, d.fluid_block, d.n_fluid_dofs);
}

Eigen::VectorXd pressure_integral(const CellDiscretization &d) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d.n_pressure);
    for (int t : d.fluid_tris) {
        double area = triangle_area(tri_verts(d, t));
        for (int k = 0; k < 3; ++k) out[d.pressure_index[d.p2_tris[t][k]]] += area / 3.0;
    }
    return out;
}

Eigen::MatrixXd solid_mean_rows(const CellDiscretization &d) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2, d.n_solid_dofs);
    double n[6];
    for (int t : d.solid_tris) {
        auto v = tri_verts(d, t);
        double area = triangle_area(v);
        for (const auto &q : triangle_rule()) {
            p2_shape(v, q, n, nullptr);
            for (int k = 0; k < 6; ++k)
                for (int c = 0; c < 2; ++c) out(c, 2 * d.solid_block[d.p2_tris[t][k]] + c) += q.w * area * n[k];
        }
    }
    return out;
}

SpMat solid_trace(const CellDiscretization &d) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < d.n_iface(); ++i)
        for (int c = 0; c < 2; ++c) trip.emplace_back(2 * i + c, 2 * d.solid_block[d.iface_nodes[i]] + c, 1.0);
    SpMat s(d.trace_size(), d.n_solid_dofs);
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

SpMat fluid_trace(const CellDiscretization &d) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < d.n_iface(); ++i)
        for (int c = 0; c < 2; ++c) trip.emplace_back(2 * i + c, 2 * d.fluid_block[d.iface_nodes[i]] + c, 1.0);
    SpMat s(d.trace_size(), d.n_fluid_dofs);
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

Eigen::VectorXd interpolate_solid(const CellDiscretization &d, const std::function<Vec2(const Vec2 &)> &u) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d.n_solid_dofs);
    for (size_t i = 0; i < d.p2_nodes.size(); ++i) {
        int b = d.solid_block[i];
        if (b < 0 || d.periodic_master[i] != static_cast<int>(i)) continue;
        out.segment<2>(2 * b) = u(d.p2_nodes[i]);
    }
    return out;
}

Eigen::VectorXd interpolate_fluid(const CellDiscretization &d, const std::function<Vec2(const Vec2 &)> &u) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d.n_fluid_dofs);
    for (size_t i = 0; i < d.p2_nodes.size(); ++i) {
        int b = d.fluid_block[i];
        if (b >= 0) out.segment<2>(2 * b) = u(d.p2_nodes[i]);
    }
    return out;
}

MeshStats mesh_stats(const CellDiscretization &d) {
    MeshStats s;
    s.vertices = static_cast<int>(d.mesh.nodes.size());
    s.triangles = static_cast<int>(d.mesh.tris.size());
    s.solid_triangles = static_cast<int>(d.solid_tris.size());
    s.fluid_triangles = static_cast<int>(d.fluid_tris.size());
    s.interface_nodes = d.n_iface();
    s.solid_dofs = d.n_solid_dofs;
    s.fluid_dofs = d.n_fluid_dofs;
    s.pressure_dofs = d.n_pressure;
    s.h_dim = d.h_dim();
    s.fluid_area = d.fluid_area();
    s.solid_area = d.solid_area();
    return s;
}

} // namespace homog
