////////////////////////////////////////////////////////////////////////////////
// cell_fem.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Periodic unit cell Y = (-1/2, 1/2)^2 with one inclusion O (disk or star
//  shaped polygon) centred at the origin. The mesh is conforming across the
//  inclusion boundary: the solid part Y \ O and the fluid part O share the
//  interface vertices. On top of the P1 mesh we build
//    - a periodic vector P2 space on the solid (opposite faces identified),
//    - a Taylor-Hood P2/P1 pair on the fluid,
//    - the P2 trace space on the interface with its L2 mass matrix,
//  and the L2 projection onto rigid motions a + B y on the interface.
//
//  Interface vectors are laid out node-major: [u_x(0), u_y(0), u_x(1), ...]
//  with nodes in the order of CellDiscretization::iface_nodes.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "homog/tensor_core.hpp"

namespace homog {

using SpMat = Eigen::SparseMatrix<double>;
using Vec2 = Eigen::Vector2d;

struct CellGeometry {
    double radius = 0.25;
    // Optional star-shaped polygon (counter-clockwise); overrides radius when non-empty.
    std::vector<Vec2> polygon;
    double h = 0.05;

    bool is_polygon() const { return !polygon.empty(); }
    // Validates clearance from the cell boundary and centring; throws Geometry.
    void validate() const;
    // Distance from the origin to the inclusion boundary along direction theta.
    double boundary_radius(double theta) const;
    double max_extent() const;
};

enum Region : int { Solid = 0, Fluid = 1 };

// P1 level mesh; this is what the mesh JSON stores.
struct CellMesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> tris;
    std::vector<int> region;
    // (node, partner) pairs: node on x = 1/2 or y = 1/2, partner on the opposite face.
    std::vector<std::array<int, 2>> periodic_pairs;
    // Interface vertices in counter-clockwise order.
    std::vector<int> interface_nodes;
};

CellMesh generate_cell_mesh(const CellGeometry &geometry);
// Pairs (node on x = 1/2 or y = 1/2, partner shifted by -e_x or -e_y), matched by
// coordinates to 1e-10. Throws Mesh when a face node has no partner.
std::vector<std::array<int, 2>> compute_periodic_pairs(const std::vector<Vec2> &nodes);

struct CellDiscretization {
    CellGeometry geometry;
    CellMesh mesh;

    // P2 nodes: mesh vertices first, then one midpoint per edge.
    std::vector<Vec2> p2_nodes;
    // v0, v1, v2, m01, m12, m20
    std::vector<std::array<int, 6>> p2_tris;
    std::vector<int> solid_tris, fluid_tris;

    // Solid space: p2 node -> periodic master -> block index (dofs 2k, 2k+1).
    std::vector<int> periodic_master;
    std::vector<int> solid_block;
    int n_solid_dofs = 0;

    // Fluid velocity: p2 node -> block index; pressure: vertex -> index.
    std::vector<int> fluid_block;
    int n_fluid_dofs = 0;
    std::vector<int> pressure_index;
    int n_pressure = 0;

    // Interface: P2 node ids; edges as (a, b, mid) positions into iface_nodes.
    std::vector<int> iface_nodes;
    std::vector<std::array<int, 3>> iface_edges;
    std::vector<Vec2> iface_normals;  // unit normal per edge, pointing out of O
    Eigen::MatrixXd iface_mass;       // 2 nI x 2 nI, L2(dO) mass for vector fields

    // M-orthonormal rigid motions on the interface (columns).
    Eigen::MatrixXd rigid;
    // M-orthonormal basis of the rigid-free trace space (columns).
    Eigen::MatrixXd hbasis;

    int n_iface() const { return static_cast<int>(iface_nodes.size()); }
    int trace_size() const { return 2 * n_iface(); }
    int h_dim() const { return static_cast<int>(hbasis.cols()); }

    double solid_area() const;
    double fluid_area() const;
    double total_area() const { return solid_area() + fluid_area(); }
    double perimeter() const;
};

CellDiscretization build_cell(const CellGeometry &geometry);
CellDiscretization build_cell_from_mesh(const CellGeometry &geometry, const CellMesh &mesh);

// --- interface fields -------------------------------------------------------

struct TraceField {
    Eigen::VectorXd values;
    double rigid_defect = 0.0;  // ||P f|| / ||f|| in L2(dO)
};

double trace_norm(const CellDiscretization &d, const Eigen::VectorXd &f);
std::vector<Eigen::VectorXd> rigid_basis(const CellDiscretization &d);
Eigen::VectorXd project_P(const CellDiscretization &d, const Eigen::VectorXd &f);
TraceField project_Q(const CellDiscretization &d, const Eigen::VectorXd &f);
double rigid_defect(const CellDiscretization &d, const Eigen::VectorXd &f);
// Row r with r . f = int_{dO} f . nu (volume flux through the interface).
Eigen::VectorXd normal_flux_row(const CellDiscretization &d);
// Interface values of y -> xi y.
Eigen::VectorXd trace_of_linear(const CellDiscretization &d, const SymMat &xi);
// Coordinates in hbasis of a rigid-free field, and back.
Eigen::VectorXd to_h_coords(const CellDiscretization &d, const Eigen::VectorXd &f);
Eigen::VectorXd from_h_coords(const CellDiscretization &d, const Eigen::VectorXd &c);

// --- assembled forms --------------------------------------------------------

// Bilinear form  int_{Y\O} A e(u):e(v)  on the periodic solid space.
SpMat assemble_elastic(const CellDiscretization &d, const Tensor4 &a);
// Load  int_{Y\O} A xi : e(v).
Eigen::VectorXd assemble_strain_load(const CellDiscretization &d, const Tensor4 &a, const SymMat &xi);

struct StokesForms {
    SpMat viscous;     // 2 mu int_O e(u):e(v)
    SpMat divergence;  // n_p x n_f:  -int_O p div v
};
StokesForms assemble_stokes(const CellDiscretization &d, double mu);
// int_O e(u):e(v) without the 2 mu factor.
SpMat assemble_fluid_strain_gram(const CellDiscretization &d);

// Linear functionals; rows are packed strain coordinates.
Eigen::MatrixXd solid_strain_integral(const CellDiscretization &d);  // 3 x n_s: int e(u)
Eigen::MatrixXd fluid_strain_integral(const CellDiscretization &d);  // 3 x n_f
Eigen::VectorXd pressure_integral(const CellDiscretization &d);      // n_p:  int q
Eigen::MatrixXd solid_mean_rows(const CellDiscretization &d);        // 2 x n_s: int_{Y\O} u
// Trace operators as sparse selection matrices (2 nI x n).
SpMat solid_trace(const CellDiscretization &d);
SpMat fluid_trace(const CellDiscretization &d);

// Nodal interpolation of a vector function onto the solid space.
Eigen::VectorXd interpolate_solid(const CellDiscretization &d, const std::function<Vec2(const Vec2 &)> &u);
Eigen::VectorXd interpolate_fluid(const CellDiscretization &d, const std::function<Vec2(const Vec2 &)> &u);

// Vector P2 mass  int_O u.v  on the fluid velocity space.
SpMat assemble_fluid_mass(const CellDiscretization &d);

// --- element utilities ------------------------------------------------------

struct QuadPoint {
    double l0, l1, l2, w;  // barycentric coordinates, weight (sums to 1)
};
// Degree-5 seven point rule on the reference triangle.
const std::vector<QuadPoint> &triangle_rule();
// P2 shape values and physical gradients at a barycentric point.
void p2_shape(const std::array<Vec2, 3> &verts, const QuadPoint &q, double n[6], Vec2 grad[6]);
double triangle_area(const std::array<Vec2, 3> &verts);

// Mesh statistics used in manifests.
struct MeshStats {
    int vertices = 0, triangles = 0, solid_triangles = 0, fluid_triangles = 0;
    int interface_nodes = 0, solid_dofs = 0, fluid_dofs = 0, pressure_dofs = 0, h_dim = 0;
    double fluid_area = 0, solid_area = 0;
};
MeshStats mesh_stats(const CellDiscretization &d);

} // namespace homog
