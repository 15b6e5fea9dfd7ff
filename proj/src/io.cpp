#include "homog/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace homog {

namespace {

Error bad_input(const std::string &what) { return Error(ErrorKind::Input, what); }

const json &field(const json &j, const char *key) {
    if (!j.is_object() || !j.contains(key)) throw bad_input(std::string("missing field '") + key + "'");
    return j.at(key);
}

double as_number(const json &j) {
    if (!j.is_number()) throw bad_input("expected a number");
    return j.get<double>();
}

} // namespace

std::string canonical_dump(const json &j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path &path, const std::string &text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Input, "cannot write " + path.string());
    os << text;
    if (!os) throw Error(ErrorKind::Input, "write failed for " + path.string());
}

void write_json(const std::filesystem::path &path, const json &j) { write_text(path, canonical_dump(j)); }

json read_json(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw bad_input("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception &e) {
        throw bad_input("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string csv_number(double x) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json tensor_to_json(const Tensor4 &t) {
    json rows = json::array();
    for (int r = 0; r < t.size(); ++r) {
        json row = json::array();
        for (int c = 0; c < t.size(); ++c) row.push_back(number(t(r, c)));
        rows.push_back(row);
    }
    return json{{"dim", t.dim()}, {"packed", rows}};
}

Tensor4 tensor_from_json(const json &j) {
    int dim = field(j, "dim").get<int>();
    const json &rows = field(j, "packed");
    int n = packed_size(dim);
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) throw bad_input("packed tensor has wrong row count");
    Eigen::MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
        if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != n)
            throw bad_input("packed tensor has wrong column count");
        for (int c = 0; c < n; ++c) m(r, c) = as_number(rows[r][c]);
    }
    return Tensor4(dim, m);
}

json ctensor_to_json(const CTensor4 &t) {
    json re = json::array(), im = json::array();
    for (int r = 0; r < t.size(); ++r) {
        json a = json::array(), b = json::array();
        for (int c = 0; c < t.size(); ++c) {
            a.push_back(number(t(r, c).real()));
            b.push_back(number(t(r, c).imag()));
        }
        re.push_back(a);
        im.push_back(b);
    }
    return json{{"dim", t.dim()}, {"re", re}, {"im", im}};
}

json vector_to_json(const Eigen::VectorXd &v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
    return a;
}

// --- mesh ----------------------------------------------------------------------

json mesh_to_json(const CellGeometry &g, const CellMesh &m) {
    json nodes = json::array(), tris = json::array(), pairs = json::array();
    for (const auto &p : m.nodes) nodes.push_back({p.x(), p.y()});
    for (const auto &t : m.tris) tris.push_back({t[0], t[1], t[2]});
    for (const auto &p : m.periodic_pairs) pairs.push_back({p[0], p[1]});
    json poly = json::array();
    for (const auto &p : g.polygon) poly.push_back({p.x(), p.y()});
    return json{{"kind", "cell_mesh"},
                {"geometry", {{"radius", g.radius}, {"h", g.h}, {"polygon", poly}}},
                {"nodes", nodes},
                {"triangles", tris},
                {"region", m.region},
                {"periodic_pairs", pairs},
                {"interface_nodes", m.interface_nodes}};
}

CellMesh mesh_from_json(const json &j, CellGeometry &g) {
    if (!j.is_object() || j.value("kind", "") != "cell_mesh") throw bad_input("not a cell mesh file");
    try {
        const json &geo = field(j, "geometry");
        g.radius = as_number(field(geo, "radius"));
        g.h = as_number(field(geo, "h"));
        g.polygon.clear();
        for (const auto &p : field(geo, "polygon")) g.polygon.emplace_back(as_number(p.at(0)), as_number(p.at(1)));
        CellMesh m;
        for (const auto &p : field(j, "nodes")) m.nodes.emplace_back(as_number(p.at(0)), as_number(p.at(1)));
        for (const auto &t : field(j, "triangles")) m.tris.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        m.region = field(j, "region").get<std::vector<int>>();
        for (const auto &p : field(j, "periodic_pairs")) m.periodic_pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        m.interface_nodes = field(j, "interface_nodes").get<std::vector<int>>();
        const int nn = static_cast<int>(m.nodes.size());
        for (const auto &t : m.tris)
            for (int v : t)
                if (v < 0 || v >= nn) throw bad_input("triangle references a missing node");
        if (m.region.size() != m.tris.size()) throw bad_input("region list does not match the triangles");
        return m;
    } catch (const json::exception &e) {
        throw bad_input(std::string("malformed mesh: ") + e.what());
    }
}

// --- kernel samples and R table ------------------------------------------------------

json samples_to_json(const MemoryKernelSamples &s) {
    json S = json::array(), meta = json::object();
    for (const auto &x : s.S) S.push_back(tensor_to_json(x));
    for (const auto &[k, v] : s.meta) meta[k] = number(v);
    return json{{"kind", "kernel_samples"}, {"A_h", tensor_to_json(s.A_h)}, {"t", s.t}, {"S", S}, {"meta", meta}};
}

MemoryKernelSamples samples_from_json(const json &j) {
    if (!j.is_object() || j.value("kind", "") != "kernel_samples") throw bad_input("not a kernel samples file");
    try {
        MemoryKernelSamples s;
        s.A_h = tensor_from_json(field(j, "A_h"));
        s.t = field(j, "t").get<std::vector<double>>();
        for (const auto &x : field(j, "S")) s.S.push_back(tensor_from_json(x));
        if (j.contains("meta"))
            for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it)
                if (it.value().is_number()) s.meta[it.key()] = it.value().get<double>();
        if (s.t.size() != s.S.size() || s.t.empty()) throw bad_input("kernel samples are empty or ragged");
        for (size_t k = 1; k < s.t.size(); ++k)
            if (!(s.t[k] > s.t[k - 1])) throw bad_input("sample times must increase");
        return s;
    } catch (const json::exception &e) {
        throw bad_input(std::string("malformed kernel samples: ") + e.what());
    }
}

json R_table_to_json(const std::vector<double> &t, const std::vector<Tensor4> &R) {
    json a = json::array();
    for (const auto &x : R) a.push_back(tensor_to_json(x));
    return json{{"kind", "R_table"}, {"t", t}, {"R", a}};
}

void R_table_from_json(const json &j, std::vector<double> &t, std::vector<Tensor4> &R) {
    if (!j.is_object() || j.value("kind", "") != "R_table") throw bad_input("not an R table file");
    try {
        t = field(j, "t").get<std::vector<double>>();
        R.clear();
        for (const auto &x : field(j, "R")) R.push_back(tensor_from_json(x));
        if (t.size() != R.size()) throw bad_input("R table is ragged");
    } catch (const json::exception &e) {
        throw bad_input(std::string("malformed R table: ") + e.what());
    }
}

// --- kernel analysis --------------------------------------------------------------

json prony_to_json(const PronyKernel &k) {
    json terms = json::array();
    for (const auto &t : k.terms) terms.push_back({{"rate", t.rate}, {"weight", tensor_to_json(t.weight)}});
    return json{{"kind", "prony_kernel"},
                {"A_h", tensor_to_json(k.A_h)},
                {"terms", terms},
                {"residual", number(k.residual)},
                {"stagnated", k.stagnated},
                {"source", k.source}};
}

PronyKernel prony_from_json(const json &j) {
    if (!j.is_object() || j.value("kind", "") != "prony_kernel") throw bad_input("not a Prony kernel file");
    try {
        PronyKernel k;
        k.A_h = tensor_from_json(field(j, "A_h"));
        for (const auto &t : field(j, "terms")) k.terms.push_back({as_number(field(t, "rate")), tensor_from_json(field(t, "weight"))});
        k.residual = j.value("residual", 0.0);
        k.stagnated = j.value("stagnated", false);
        k.source = j.value("source", "");
        return k;
    } catch (const json::exception &e) {
        throw bad_input(std::string("malformed Prony kernel: ") + e.what());
    }
}

json decay_fit_to_json(const DecayFit &f) {
    return json{{"kind", "decay_fit"},
                {"lambda_hat", number(f.lambda_hat)},
                {"Lambda_hat", number(f.Lambda_hat)},
                {"r_squared", number(f.r_squared)},
                {"knee", f.knee},
                {"samples_used", f.used}};
}

json passivity_to_json(const PassivityReport &r, int n_xi) {
    json pts = json::array();
    for (const auto &p : r.points)
        pts.push_back({{"z_re", p.z.real()},
                       {"z_im", p.z.imag()},
                       {"xi", p.xi},
                       {"margin1", number(p.margin1)},
                       {"margin2", number(p.margin2)}});
    return json{{"kind", "passivity_report"},
                {"c", number(r.c)},
                {"min_margin1", number(r.min_margin1)},
                {"min_margin2", number(r.min_margin2)},
                {"pass", r.pass},
                {"xi_count", n_xi},
                {"points", pts}};
}

// --- CSV -----------------------------------------------------------------------------

std::string samples_csv(const std::vector<double> &t, const std::vector<Tensor4> &S, const std::string &prefix) {
    std::ostringstream os;
    os << "t";
    if (S.empty()) {
        os << "\n";
        return os.str();
    }
    const int n = S[0].size();
    for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) os << "," << prefix << r << c;
    os << "\n";
    for (size_t k = 0; k < t.size(); ++k) {
        os << csv_number(t[k]);
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) os << "," << csv_number(S[k](r, c));
        os << "\n";
    }
    return os.str();
}

std::string passivity_csv(const PassivityReport &r) {
    // Keep grid order; margins reduced over xi.
    std::vector<cdouble> order;
    std::map<std::pair<double, double>, std::pair<double, double>> best;
    for (const auto &p : r.points) {
        auto key = std::make_pair(p.z.real(), p.z.imag());
        auto it = best.find(key);
        if (it == best.end()) {
            order.push_back(p.z);
            best[key] = {p.margin1, p.margin2};
        } else {
            it->second.first = std::min(it->second.first, p.margin1);
            it->second.second = std::min(it->second.second, p.margin2);
        }
    }
    std::ostringstream os;
    os << "z_re,z_im,margin1,margin2\n";
    for (cdouble z : order) {
        auto m = best[{z.real(), z.imag()}];
        os << csv_number(z.real()) << "," << csv_number(z.imag()) << "," << csv_number(m.first) << ","
           << csv_number(m.second) << "\n";
    }
    return os.str();
}

std::string prony_csv(const PronyKernel &k) {
    std::vector<double> rates;
    std::vector<Tensor4> w;
    for (const auto &t : k.terms) {
        rates.push_back(t.rate);
        w.push_back(t.weight);
    }
    std::string s = samples_csv(rates, w, "G");
    return "rate" + s.substr(1);
}

std::string trajectory_csv(const MacroProblem &p, const std::vector<double> &t, const std::vector<Eigen::VectorXd> &u) {
    std::ostringstream os;
    os << (p.dim == 1 ? "t,node,x,u\n" : "t,node,x,y,ux,uy\n");
    for (size_t k = 0; k < t.size(); ++k) {
        Eigen::MatrixXd f = p.full_field(u[k]);
        for (int n = 0; n < p.n_nodes(); ++n) {
            os << csv_number(t[k]) << "," << n;
            for (int d = 0; d < p.dim; ++d) os << "," << csv_number(p.nodes(n, d));
            for (int c = 0; c < p.ncomp; ++c) os << "," << csv_number(f(n, c));
            os << "\n";
        }
    }
    return os.str();
}

std::string energy_csv(const std::vector<EnergyRow> &rows) {
    std::ostringstream os;
    os << "t,kinetic,elastic_modified,memory_aux,dissipated_cumulative,total\n";
    for (const auto &r : rows)
        os << csv_number(r.t) << "," << csv_number(r.kinetic) << "," << csv_number(r.elastic_modified) << ","
           << csv_number(r.memory_aux) << "," << csv_number(r.dissipated) << "," << csv_number(r.total) << "\n";
    return os.str();
}

} // namespace homog
