#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "homog/cell_fem.hpp"

using namespace homog;

namespace {

CellGeometry disk(double r, double h) {
    CellGeometry g;
    g.radius = r;
    g.h = h;
    return g;
}

const CellDiscretization &coarse() {
    static const CellDiscretization d = build_cell(disk(0.25, 0.1));
    return d;
}

} // namespace

TEST_CASE("geometry validation") {
    CHECK_THROWS_AS(disk(0.6, 0.1).validate(), Error);
    CHECK_THROWS_AS(disk(0.5, 0.1).validate(), Error);
    CHECK_THROWS_AS(disk(0.25, 0.0).validate(), Error);
    try {
        disk(0.6, 0.1).validate();
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::Geometry);
    }
    CellGeometry cw;
    cw.polygon = {Vec2(0.2, 0.0), Vec2(0.0, -0.2), Vec2(-0.2, 0.0), Vec2(0.0, 0.2)};
    CHECK_THROWS_AS(cw.validate(), Error);
}

TEST_CASE("areas and interface length approach the disk values") {
    double prev_area = 1.0, prev_len = 1.0;
    for (double h : {0.1, 0.05}) {
        CellDiscretization d = build_cell(disk(0.25, h));
        CHECK(d.total_area() == doctest::Approx(1.0).epsilon(1e-12));
        double area_err = std::abs(d.fluid_area() - M_PI * 0.0625);
        double len_err = std::abs(d.perimeter() - 2 * M_PI * 0.25);
        CHECK(area_err < prev_area);
        CHECK(len_err < prev_len);
        prev_area = area_err;
        prev_len = len_err;
    }
    CHECK(prev_area < 1e-3);
}

TEST_CASE("interface mass integrates constants to the perimeter") {
    const auto &d = coarse();
    Eigen::VectorXd ex = Eigen::VectorXd::Zero(d.trace_size());
    for (int i = 0; i < d.n_iface(); ++i) ex[2 * i] = 1.0;
    CHECK(ex.dot(d.iface_mass * ex) == doctest::Approx(d.perimeter()).epsilon(1e-12));
}

TEST_CASE("periodic pairs differ by a lattice vector") {
    const auto &m = coarse().mesh;
    REQUIRE(!m.periodic_pairs.empty());
    for (const auto &p : m.periodic_pairs) {
        Vec2 dx = m.nodes[p[0]] - m.nodes[p[1]];
        bool ex = std::abs(dx.x() - 1.0) < 1e-10 && std::abs(dx.y()) < 1e-10;
        bool ey = std::abs(dx.y() - 1.0) < 1e-10 && std::abs(dx.x()) < 1e-10;
        CHECK((ex || ey));
    }
    std::vector<Vec2> lonely{Vec2(0.5, 0.1), Vec2(-0.5, 0.2)};
    CHECK_THROWS_AS(compute_periodic_pairs(lonely), Error);
}

TEST_CASE("interface vertices lie on the circle") {
    const auto &d = coarse();
    for (int v : d.mesh.interface_nodes) CHECK(d.mesh.nodes[v].norm() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("trace of a linear field and the rigid projection") {
    const auto &d = coarse();
    SymMat xi = SymMat::from_matrix((Eigen::Matrix2d() << 0.3, -0.2, -0.2, 1.1).finished());
    Eigen::VectorXd f = trace_of_linear(d, xi);
    for (int i = 0; i < d.n_iface(); ++i) {
        Vec2 y = d.p2_nodes[d.iface_nodes[i]];
        CHECK(f[2 * i] == doctest::Approx(0.3 * y.x() - 0.2 * y.y()));
        CHECK(f[2 * i + 1] == doctest::Approx(-0.2 * y.x() + 1.1 * y.y()));
    }
    // A rotation plus translation has no Q component.
    Eigen::VectorXd rig(d.trace_size());
    for (int i = 0; i < d.n_iface(); ++i) {
        Vec2 y = d.p2_nodes[d.iface_nodes[i]];
        rig.segment<2>(2 * i) = Vec2(0.4 - 0.7 * y.y(), -0.1 + 0.7 * y.x());
    }
    CHECK(trace_norm(d, project_Q(d, rig).values) < 1e-12 * trace_norm(d, rig));
    CHECK(rigid_defect(d, project_Q(d, f).values) < 1e-12);
    Eigen::VectorXd c = to_h_coords(d, project_Q(d, f).values);
    CHECK((from_h_coords(d, c) - project_Q(d, f).values).norm() < 1e-12 * f.norm());
    CHECK(d.h_dim() == d.trace_size() - 3);
}

TEST_CASE("mesh stats agree with the discretization") {
    const auto &d = coarse();
    MeshStats s = mesh_stats(d);
    CHECK(s.triangles == static_cast<int>(d.mesh.tris.size()));
    CHECK(s.solid_triangles + s.fluid_triangles == s.triangles);
    CHECK(s.h_dim == d.h_dim());
    CHECK(s.fluid_area == doctest::Approx(d.fluid_area()));
}

TEST_CASE("rebuilding from a stored mesh reproduces the discretization") {
    const auto &d = coarse();
    CellDiscretization e = build_cell_from_mesh(d.geometry, d.mesh);
    CHECK(e.n_solid_dofs == d.n_solid_dofs);
    CHECK(e.n_fluid_dofs == d.n_fluid_dofs);
    CHECK((e.iface_mass - d.iface_mass).norm() == 0.0);
}
