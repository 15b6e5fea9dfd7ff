#include "homog/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "homog/io.hpp"

namespace homog {

namespace {

Error bad(const std::string &what) { return Error(ErrorKind::Input, "config: " + what); }

void check_keys(const json &j, const std::string &section, const std::set<std::string> &allowed) {
    if (!j.is_object()) throw bad("section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw bad("unknown key '" + section + "." + it.key() + "'");
}

template <class T>
void get(const json &j, const char *key, T &out, const std::string &section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &) {
        throw bad("wrong type for '" + section + "." + key + "'");
    }
}

Tensor4 tensor_field(const json &j, const std::string &name) {
    try {
        if (j.is_array()) {
            auto rows = j.get<std::vector<std::vector<double>>>();
            int n = static_cast<int>(rows.size());
            int dim = n == 3 ? 2 : (n == 1 ? 1 : (n == 6 ? 3 : -1));
            if (dim < 0) throw bad("'" + name + "' must be a packed 1x1, 3x3 or 6x6 matrix");
            Eigen::MatrixXd m(n, n);
            for (int r = 0; r < n; ++r) {
                if (static_cast<int>(rows[r].size()) != n) throw bad("'" + name + "' is not square");
                for (int c = 0; c < n; ++c) m(r, c) = rows[r][c];
            }
            return Tensor4(dim, m);
        }
        return tensor_from_json(j);
    } catch (const json::exception &) {
        throw bad("malformed tensor '" + name + "'");
    }
}

FieldSpec field_spec(const json &j, const std::string &name) {
    check_keys(j, name, {"type", "amplitude", "mode", "component", "value", "center", "width", "duration", "frequency"});
    FieldSpec f;
    get(j, "type", f.type, name);
    get(j, "amplitude", f.amplitude, name);
    if (j.contains("mode")) {
        if (j["mode"].is_number_integer())
            f.mode = {j["mode"].get<int>(), 1};
        else
            get(j, "mode", f.mode, name);
    }
    get(j, "component", f.component, name);
    get(j, "value", f.value, name);
    get(j, "center", f.center, name);
    get(j, "width", f.width, name);
    get(j, "duration", f.duration, name);
    get(j, "frequency", f.frequency, name);
    return f;
}

json field_json(const FieldSpec &f) {
    return json{{"type", f.type},           {"amplitude", f.amplitude}, {"mode", f.mode},
                {"component", f.component}, {"value", f.value},         {"center", f.center},
                {"width", f.width},         {"duration", f.duration},   {"frequency", f.frequency}};
}

void positive(double v, const char *name) {
    if (!(v > 0) || !std::isfinite(v)) throw bad(std::string(name) + " must be positive");
}

void check_field(const FieldSpec &f, const char *name, int dim, bool force) {
    static const std::set<std::string> fields{"zero", "sine", "constant"}, forces{"zero", "sine", "pulse"};
    if (!(force ? forces : fields).count(f.type)) throw bad(std::string(name) + ".type '" + f.type + "' is not supported");
    if (f.component < 0 || f.component >= dim) throw bad(std::string(name) + ".component out of range");
    if (f.type == "sine" && (f.mode.size() < 1 || f.mode[0] < 1 || (dim == 2 && (f.mode.size() < 2 || f.mode[1] < 1))))
        throw bad(std::string(name) + ".mode must hold positive integers");
    if (f.type == "constant" && static_cast<int>(f.value.size()) != dim)
        throw bad(std::string(name) + ".value needs one entry per component");
    if (f.type == "pulse") {
        if (static_cast<int>(f.center.size()) != dim) throw bad(std::string(name) + ".center needs one entry per axis");
        positive(f.width, "force.width");
        positive(f.duration, "force.duration");
    }
}

} // namespace

CellGeometry RunConfig::geometry() const {
    CellGeometry g;
    g.radius = radius;
    g.polygon = polygon;
    g.h = h;
    return g;
}

Tensor4 RunConfig::solid_tensor() const { return A ? *A : iso_tensor(lambda_s, mu_s); }

std::vector<cdouble> RunConfig::passivity_grid() const {
    std::vector<cdouble> out;
    for (int i = 0; i < re_count; ++i) {
        double s = re_count == 1 ? 0.0 : static_cast<double>(i) / (re_count - 1);
        double re = std::exp(std::log(re_min) + s * (std::log(re_max) - std::log(re_min)));
        for (double im : im_values) out.emplace_back(re, im);
    }
    return out;
}

RunConfig config_from_json(const json &j) {
    RunConfig c;
    check_keys(j, "root", {"cell", "kernel", "passivity", "macro", "verify", "output", "seed"});
    if (j.contains("cell")) {
        const json &s = j["cell"];
        check_keys(s, "cell", {"radius", "polygon", "h", "lambda_s", "mu_s", "A", "mu", "rho_s", "rho_l"});
        get(s, "radius", c.radius, "cell");
        get(s, "h", c.h, "cell");
        get(s, "lambda_s", c.lambda_s, "cell");
        get(s, "mu_s", c.mu_s, "cell");
        get(s, "mu", c.mu, "cell");
        get(s, "rho_s", c.rho_s, "cell");
        get(s, "rho_l", c.rho_l, "cell");
        if (s.contains("polygon")) {
            std::vector<std::vector<double>> pts;
            get(s, "polygon", pts, "cell");
            for (const auto &p : pts) {
                if (p.size() != 2) throw bad("cell.polygon entries must be [x, y]");
                c.polygon.emplace_back(p[0], p[1]);
            }
        }
        if (s.contains("A")) c.A = tensor_field(s["A"], "cell.A");
    }
    if (j.contains("kernel")) {
        const json &s = j["kernel"];
        check_keys(s, "kernel", {"source", "stop_ratio", "prony_terms", "closed_form"});
        get(s, "source", c.kernel_source, "kernel");
        get(s, "stop_ratio", c.stop_ratio, "kernel");
        get(s, "prony_terms", c.prony_terms, "kernel");
        if (s.contains("closed_form")) {
            const json &p = s["closed_form"];
            check_keys(p, "kernel.closed_form", {"A_h", "B", "gamma"});
            if (p.contains("A_h")) c.closed_form_A_h = tensor_field(p["A_h"], "kernel.closed_form.A_h");
            if (p.contains("B")) c.closed_form_B = tensor_field(p["B"], "kernel.closed_form.B");
            get(p, "gamma", c.closed_form_gamma, "kernel.closed_form");
        }
    }
    if (j.contains("passivity")) {
        const json &s = j["passivity"];
        check_keys(s, "passivity", {"re_min", "re_max", "re_count", "im_values", "random_xi"});
        get(s, "re_min", c.re_min, "passivity");
        get(s, "re_max", c.re_max, "passivity");
        get(s, "re_count", c.re_count, "passivity");
        get(s, "im_values", c.im_values, "passivity");
        get(s, "random_xi", c.random_xi, "passivity");
    }
    if (j.contains("macro")) {
        const json &s = j["macro"];
        check_keys(s, "macro", {"dim", "lx", "ly", "nx", "ny", "dt", "t_final", "store_every", "fluid_fraction",
                                "well_prepared", "u0", "u1", "v0", "force"});
        get(s, "dim", c.macro_dim, "macro");
        get(s, "lx", c.lx, "macro");
        get(s, "ly", c.ly, "macro");
        get(s, "nx", c.nx, "macro");
        get(s, "ny", c.ny, "macro");
        get(s, "dt", c.dt, "macro");
        get(s, "t_final", c.t_final, "macro");
        get(s, "store_every", c.store_every, "macro");
        if (s.contains("fluid_fraction")) {
            double v = 0;
            get(s, "fluid_fraction", v, "macro");
            c.fluid_fraction = v;
        }
        get(s, "well_prepared", c.well_prepared, "macro");
        if (s.contains("u0")) c.u0 = field_spec(s["u0"], "macro.u0");
        if (s.contains("u1")) c.u1 = field_spec(s["u1"], "macro.u1");
        if (s.contains("v0")) c.v0 = field_spec(s["v0"], "macro.v0");
        if (s.contains("force")) c.force = field_spec(s["force"], "macro.force");
    }
    if (j.contains("verify")) {
        check_keys(j["verify"], "verify", {"coercivity_golden"});
        get(j["verify"], "coercivity_golden", c.coercivity_golden, "verify");
    }
    if (j.contains("output")) {
        check_keys(j["output"], "output", {"dir"});
        std::string d;
        get(j["output"], "dir", d, "output");
        if (!d.empty()) c.out_dir = d;
    }
    if (j.contains("seed")) get(j, "seed", c.seed, "root");
    return c;
}

json config_to_json(const RunConfig &c) {
    json poly = json::array();
    for (const auto &p : c.polygon) poly.push_back({p.x(), p.y()});
    json cell{{"radius", c.radius}, {"polygon", poly},       {"h", c.h},         {"lambda_s", c.lambda_s},
              {"mu_s", c.mu_s},     {"mu", c.mu},            {"rho_s", c.rho_s}, {"rho_l", c.rho_l}};
    if (c.A) cell["A"] = tensor_to_json(*c.A);
    json macro{{"dim", c.macro_dim},
               {"lx", c.lx},
               {"ly", c.ly},
               {"nx", c.nx},
               {"ny", c.ny},
               {"dt", c.dt},
               {"t_final", c.t_final},
               {"store_every", c.store_every},
               {"well_prepared", c.well_prepared},
               {"u0", field_json(c.u0)},
               {"u1", field_json(c.u1)},
               {"v0", field_json(c.v0)},
               {"force", field_json(c.force)}};
    if (c.fluid_fraction) macro["fluid_fraction"] = *c.fluid_fraction;
    return json{{"cell", cell},
                {"kernel",
                 {{"source", c.kernel_source},
                  {"stop_ratio", c.stop_ratio},
                  {"prony_terms", c.prony_terms},
                  {"closed_form", {{"A_h", tensor_to_json(c.closed_form_A_h)}, {"B", tensor_to_json(c.closed_form_B)}, {"gamma", c.closed_form_gamma}}}}},
                {"passivity",
                 {{"re_min", c.re_min},
                  {"re_max", c.re_max},
                  {"re_count", c.re_count},
                  {"im_values", c.im_values},
                  {"random_xi", c.random_xi}}},
                {"macro", macro},
                {"verify", {{"coercivity_golden", c.coercivity_golden}}},
                {"output", {{"dir", c.out_dir.string()}}},
                {"seed", c.seed}};
}

void validate(const RunConfig &c) {
    positive(c.h, "cell.h");
    positive(c.mu, "cell.mu");
    positive(c.rho_s, "cell.rho_s");
    positive(c.rho_l, "cell.rho_l");
    if (c.A) {
        if (c.A->dim() != 2) throw bad("cell.A must be a 2D tensor (3x3 packed)");
        if (c.A->symmetry_defect() > 1e-10 || min_sym_eigenvalue(*c.A, 1e-10) <= 0)
            throw bad("cell.A must be symmetric positive definite");
    } else {
        positive(c.mu_s, "cell.mu_s");
        if (!(c.lambda_s + c.mu_s > 0)) throw bad("cell.lambda_s + cell.mu_s must be positive");
    }
    // Geometry errors keep their own category.
    c.geometry().validate();
    if (c.kernel_source != "cell" && c.kernel_source != "closed_form") throw bad("kernel.source must be 'cell' or 'closed_form'");
    positive(c.stop_ratio, "kernel.stop_ratio");
    if (c.stop_ratio >= 1) throw bad("kernel.stop_ratio must be below 1");
    if (c.prony_terms < 1 || c.prony_terms > 12) throw bad("kernel.prony_terms must lie in [1, 12]");
    positive(c.closed_form_gamma, "kernel.closed_form.gamma");
    if (c.closed_form_A_h.dim() != 2 || c.closed_form_B.dim() != 2) throw bad("kernel.closed_form tensors must be 3x3 packed");
    positive(c.re_min, "passivity.re_min");
    if (!(c.re_max >= c.re_min)) throw bad("passivity.re_max must not be below re_min");
    if (c.re_count < 1) throw bad("passivity.re_count must be positive");
    if (c.im_values.empty()) throw bad("passivity.im_values must not be empty");
    if (c.random_xi < 0) throw bad("passivity.random_xi must not be negative");
    if (c.macro_dim != 1 && c.macro_dim != 2) throw bad("macro.dim must be 1 or 2");
    positive(c.lx, "macro.lx");
    positive(c.ly, "macro.ly");
    if (c.nx < 1 || c.ny < 1) throw bad("macro.nx and macro.ny must be positive");
    positive(c.dt, "macro.dt");
    if (!(c.t_final >= 0)) throw bad("macro.t_final must not be negative");
    if (c.store_every < 1) throw bad("macro.store_every must be positive");
    if (c.fluid_fraction && !(*c.fluid_fraction >= 0 && *c.fluid_fraction < 1))
        throw bad("macro.fluid_fraction must lie in [0, 1)");
    check_field(c.u0, "macro.u0", c.macro_dim, false);
    if (c.u0.type == "constant") throw bad("macro.u0 must vanish on the boundary; 'constant' is not allowed");
    check_field(c.u1, "macro.u1", c.macro_dim, false);
    check_field(c.v0, "macro.v0", c.macro_dim, false);
    check_field(c.force, "macro.force", c.macro_dim, true);
}

RunConfig load_config(const std::optional<std::filesystem::path> &path) {
    RunConfig c;
    if (path) {
        if (!std::filesystem::exists(*path)) throw Error(ErrorKind::Input, "config file not found: " + path->string());
        c = config_from_json(read_json(*path));
    }
    return c;
}

// --- fields ----------------------------------------------------------------------

namespace {

double sine_shape(const FieldSpec &s, int dim, double lx, double ly, const Eigen::VectorXd &x) {
    double v = std::sin(s.mode[0] * M_PI * x[0] / lx);
    if (dim == 2) v *= std::sin(s.mode[1] * M_PI * x[1] / ly);
    return v;
}

} // namespace

FieldFn make_field(const FieldSpec &s, int dim, double lx, double ly, const char *name) {
    if (s.type == "zero") return {};
    if (s.type == "sine")
        return [=](const Eigen::VectorXd &x) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            v[s.component] = s.amplitude * sine_shape(s, dim, lx, ly, x);
            return v;
        };
    if (s.type == "constant") {
        Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(s.value.data(), s.value.size());
        return [c](const Eigen::VectorXd &) { return c; };
    }
    throw bad(std::string(name) + ".type '" + s.type + "' is not supported");
}

ForceFn make_force(const FieldSpec &s, int dim, double lx, double ly) {
    if (s.type == "zero") return {};
    if (s.type == "sine")
        return [=](double t, const Eigen::VectorXd &x) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            double time = s.frequency != 0.0 ? std::sin(s.frequency * t) : 1.0;
            v[s.component] = s.amplitude * time * sine_shape(s, dim, lx, ly, x);
            return v;
        };
    if (s.type == "pulse") {
        Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(s.center.data(), s.center.size());
        return [=](double t, const Eigen::VectorXd &x) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            if (t < s.duration) v[s.component] = s.amplitude * std::exp(-(x - c).squaredNorm() / (s.width * s.width));
            return v;
        };
    }
    throw bad("macro.force.type '" + s.type + "' is not supported");
}

} // namespace homog
