// Block-structured cell mesh: an inner square grid and an inner ring fill the
// inclusion, an outer ring joins the inclusion boundary to the cell boundary.
// Ring nodes are blended along rays between matching boundary points, so the
// construction is fully deterministic and conforming by design.

#include "homog/cell_fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace homog {

namespace {

constexpr double kPi = 3.14159265358979323846;

double cross2(const Vec2 &a, const Vec2 &b) { return a.x() * b.y() - a.y() * b.x(); }

} // namespace

double CellGeometry::boundary_radius(double theta) const {
    if (!is_polygon()) return radius;
    Vec2 dir(std::cos(theta), std::sin(theta));
    double best = -1.0;
    const size_t n = polygon.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2 &p = polygon[i];
        const Vec2 &q = polygon[(i + 1) % n];
        Vec2 e = q - p;
        double den = cross2(dir, e);
        if (std::abs(den) < 1e-300) continue;
        // origin + t dir = p + s e
        double t = cross2(p, e) / den;
        double s = cross2(p, dir) / den;
        if (t > 0 && s >= -1e-14 && s <= 1 + 1e-14) {
            if (best < 0 || t < best) best = t;
        }
    }
    if (best < 0) throw Error(ErrorKind::Geometry, "ray from origin misses the inclusion boundary");
    return best;
}

double CellGeometry::max_extent() const {
    if (!is_polygon()) return radius;
    double m = 0;
    for (const auto &p : polygon) m = std::max({m, std::abs(p.x()), std::abs(p.y())});
    return m;
}

void CellGeometry::validate() const {
    if (!(h > 0.0) || h > 0.25) {
        std::ostringstream os;
        os << "mesh size h = " << h << " must lie in (0, 0.25]";
        throw Error(ErrorKind::Geometry, os.str());
    }
    if (!is_polygon()) {
        if (!(radius > 0.0) || radius >= 0.5) {
            std::ostringstream os;
            os << "inclusion radius " << radius << " must lie in (0, 1/2)";
            throw Error(ErrorKind::Geometry, os.str());
        }
    } else {
        const size_t n = polygon.size();
        if (n < 3) throw Error(ErrorKind::Geometry, "polygon needs at least 3 vertices");
        double perim = 0;
        Vec2 c = Vec2::Zero();
        for (size_t i = 0; i < n; ++i) {
            const Vec2 &p = polygon[i];
            const Vec2 &q = polygon[(i + 1) % n];
            if (cross2(p, q) <= 0)
                throw Error(ErrorKind::Geometry,
                            "polygon must be counter-clockwise and star shaped about the origin");
            double len = (q - p).norm();
            perim += len;
            c += 0.5 * len * (p + q);
        }
        if (c.norm() > 1e-12 * perim * perim) {
            std::ostringstream os;
            os << "boundary centroid of the polygon is at (" << c.x() / perim << ", " << c.y() / perim
               << "), not at the origin";
            throw Error(ErrorKind::Geometry, os.str());
        }
    }
    double clearance = 0.5 - max_extent();
    if (!(clearance > 2.0 * h)) {
        std::ostringstream os;
        os << "inclusion too close to the cell boundary: clearance " << clearance << " <= 2h = " << 2 * h;
        throw Error(ErrorKind::Geometry, os.str());
    }
}

namespace {

struct QuadMesher {
    CellMesh m;

    int add(const Vec2 &p) {
        m.nodes.push_back(p);
        return static_cast<int>(m.nodes.size()) - 1;
    }

    // Corners in cyclic order; the split follows the shorter diagonal.
    void quad(int a, int b, int c, int d, int region, int parity) {
        const Vec2 &pa = m.nodes[a], &pb = m.nodes[b], &pc = m.nodes[c], &pd = m.nodes[d];
        double d1 = (pa - pc).norm(), d2 = (pb - pd).norm();
        bool use_ac;
        if (std::abs(d1 - d2) < 1e-12 * (d1 + d2)) use_ac = (parity % 2 == 0);
        else use_ac = d1 < d2;
        if (use_ac) {
            tri(a, b, c, region);
            tri(a, c, d, region);
        } else {
            tri(a, b, d, region);
            tri(b, c, d, region);
        }
    }

    void tri(int a, int b, int c, int region) {
        const Vec2 &pa = m.nodes[a], &pb = m.nodes[b], &pc = m.nodes[c];
        double area = 0.5 * cross2(pb - pa, pc - pa);
        if (std::abs(area) < 1e-15) throw Error(ErrorKind::Mesh, "degenerate triangle in cell mesh");
        if (area > 0) m.tris.push_back({a, b, c});
        else m.tris.push_back({a, c, b});
        m.region.push_back(region);
    }
};

// Point j of 4n on the boundary of the square of half-width 1/2, counter-clockwise
// from the corner (1/2, -1/2). Opposite sides use the same expressions so that
// periodic partners agree bit for bit.
Vec2 square_point(int j, int n) {
    int side = j / n, k = j % n;
    double dn = n;
    switch (side) {
        case 0: return Vec2(0.5, -0.5 + k / dn);
        case 1: return Vec2(-0.5 + (n - k) / dn, 0.5);
        case 2: return Vec2(-0.5, -0.5 + (n - k) / dn);
        default: return Vec2(-0.5 + k / dn, -0.5);
    }
}

// Layer fractions in [0,1] whose thickness grows geometrically from t0 towards tmax.
std::vector<double> graded_layers(double length, double t0, double tmax, double growth) {
    std::vector<double> thick;
    double t = std::min(t0, tmax), sum = 0;
    while (sum < length * (1 - 1e-9)) {
        thick.push_back(t);
        sum += t;
        t = std::min(t * growth, tmax);
    }
    // Absorb a thin last layer into the previous one.
    if (thick.size() > 1 && sum - length > 0.5 * thick.back()) {
        sum -= thick.back();
        thick.pop_back();
    }
    std::vector<double> s(thick.size() + 1, 0.0);
    for (size_t i = 0; i < thick.size(); ++i) s[i + 1] = s[i] + thick[i] / sum;
    s.back() = 1.0;
    return s;
}

} // namespace

CellMesh generate_cell_mesh(const CellGeometry &g) {
    g.validate();
    const int n = std::max(4, static_cast<int>(std::ceil(1.0 / g.h - 1e-9)));
    const int nb = 4 * n;

    // Inclusion boundary points at uniform angles with the cell corners on the diagonals.
    std::vector<Vec2> circ(nb);
    double rmin = 1e300, perim = 0;
    for (int j = 0; j < nb; ++j) {
        double th = -0.25 * kPi + 2.0 * kPi * j / nb;
        double r = g.boundary_radius(th);
        rmin = std::min(rmin, r);
        circ[j] = Vec2(r * std::cos(th), r * std::sin(th));
    }
    for (int j = 0; j < nb; ++j) perim += (circ[(j + 1) % nb] - circ[j]).norm();
    const double spacing = perim / nb;
    const double a = 0.55 * rmin;  // inner square half-width

    QuadMesher qm;

    // Inner square grid.
    std::vector<int> grid((n + 1) * (n + 1));
    for (int l = 0; l <= n; ++l)
        for (int i = 0; i <= n; ++i)
            grid[l * (n + 1) + i] = qm.add(Vec2(-a + 2 * a * i / double(n), -a + 2 * a * l / double(n)));
    auto gid = [&](int i, int l) { return grid[l * (n + 1) + i]; };
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i) qm.quad(gid(i, l), gid(i + 1, l), gid(i + 1, l + 1), gid(i, l + 1), Fluid, i + l);

    std::vector<int> inner(nb);
    for (int j = 0; j < nb; ++j) {
        int side = j / n, k = j % n;
        switch (side) {
            case 0: inner[j] = gid(n, k); break;
            case 1: inner[j] = gid(n - k, n); break;
            case 2: inner[j] = gid(0, n - k); break;
            default: inner[j] = gid(k, 0); break;
        }
    }

    // Inner ring: inner square boundary -> inclusion boundary.
    double inner_gap = rmin - a;
    int nr_in = std::max(1, static_cast<int>(std::lround(inner_gap / (0.5 * (spacing + 2 * a / n)))));
    std::vector<int> prev = inner;
    for (int k = 1; k <= nr_in; ++k) {
        double s = double(k) / nr_in;
        std::vector<int> cur(nb);
        for (int j = 0; j < nb; ++j) {
            if (k == nr_in) cur[j] = qm.add(circ[j]);
            else cur[j] = qm.add((1 - s) * qm.m.nodes[inner[j]] + s * circ[j]);
        }
        for (int j = 0; j < nb; ++j) {
            int jn = (j + 1) % nb;
            qm.quad(prev[j], prev[jn], cur[jn], cur[j], Fluid, j + k);
        }
        prev = cur;
    }
    std::vector<int> iface = prev;

    // Outer ring: inclusion boundary -> cell boundary, graded from the boundary spacing to 1/n.
    double outer_gap = 0.5 - g.max_extent();
    std::vector<double> s_out = graded_layers(outer_gap, spacing, 1.0 / n, 1.2);
    const int nr_out = static_cast<int>(s_out.size()) - 1;
    std::vector<Vec2> sq(nb);
    for (int j = 0; j < nb; ++j) sq[j] = square_point(j, n);
    prev = iface;
    for (int k = 1; k <= nr_out; ++k) {
        std::vector<int> cur(nb);
        for (int j = 0; j < nb; ++j) {
            if (k == nr_out) cur[j] = qm.add(sq[j]);
            else cur[j] = qm.add((1 - s_out[k]) * circ[j] + s_out[k] * sq[j]);
        }
        for (int j = 0; j < nb; ++j) {
            int jn = (j + 1) % nb;
            qm.quad(prev[j], prev[jn], cur[jn], cur[j], Solid, j + k);
        }
        prev = cur;
    }

    CellMesh out = std::move(qm.m);
    out.interface_nodes = iface;
    out.periodic_pairs = compute_periodic_pairs(out.nodes);
    return out;
}

} // namespace homog
