#include "homog/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include <Eigen/Core>

#include "homog/cell_operators.hpp"
#include "homog/io.hpp"
#include "homog/kernel_analysis.hpp"
#include "homog/macro_solver.hpp"
#include "homog/verify.hpp"

#ifndef HOMOG_VERSION
#define HOMOG_VERSION "unknown"
#endif

namespace homog {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input:
        case ErrorKind::InvalidParameter:
        case ErrorKind::Geometry:
        case ErrorKind::Mesh: return ExitInput;
        default: return ExitFailure;
    }
}

namespace {

class Stopwatch {
public:
    double lap() {
        auto now = std::chrono::steady_clock::now();
        double s = std::chrono::duration<double>(now - m_last).count();
        m_last = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point m_last = std::chrono::steady_clock::now();
};

fs::path require(const fs::path &p) {
    if (!fs::exists(p)) throw Error(ErrorKind::Input, "missing input file " + p.string());
    return p;
}

double inclusion_area(const CellGeometry &g) {
    if (!g.is_polygon()) return M_PI * g.radius * g.radius;
    double a = 0.0;
    for (size_t i = 0; i < g.polygon.size(); ++i) {
        const Vec2 &p = g.polygon[i], &q = g.polygon[(i + 1) % g.polygon.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(a);
}

json mesh_stats_json(const MeshStats &s) {
    return json{{"vertices", s.vertices},           {"triangles", s.triangles},
                {"solid_triangles", s.solid_triangles}, {"fluid_triangles", s.fluid_triangles},
                {"interface_nodes", s.interface_nodes}, {"solid_dofs", s.solid_dofs},
                {"fluid_dofs", s.fluid_dofs},       {"pressure_dofs", s.pressure_dofs},
                {"h_dim", s.h_dim},                 {"fluid_area", s.fluid_area},
                {"solid_area", s.solid_area}};
}

json versions_json() {
    return json{{"homog", HOMOG_VERSION},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

// Dense samples of a Prony kernel, for the decay report of analytic kernels.
MemoryKernelSamples sample_prony(const PronyKernel &k) {
    MemoryKernelSamples s;
    s.A_h = k.A_h;
    double tmax = 40.0 / k.min_rate();
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
        s.t.push_back(tmax * i / n);
        s.S.push_back(k.eval(s.t.back()));
    }
    return s;
}

} // namespace

int cmd_cell(const RunConfig &c, const CellOptions &opt, std::ostream &log) {
    validate(c);
    Stopwatch sw;
    json timings;
    CellGeometry g = c.geometry();
    CellDiscretization disc = [&] {
        if (opt.mesh_in) {
            CellMesh m = mesh_from_json(read_json(require(*opt.mesh_in)), g);
            g.validate();
            return build_cell_from_mesh(g, m);
        }
        return build_cell(g);
    }();
    timings["mesh"] = sw.lap();
    CellOperatorSet ops(disc, c.solid_tensor(), c.mu);
    Tensor4 ah = compute_Ah(ops);
    Tensor4 ae = compute_Ah_energy(ops);
    timings["effective_tensor"] = sw.lap();
    const TSpectrum &spec = ops.spectrum();
    timings["spectrum"] = sw.lap();
    MemoryKernelSamples s = sample_S(ops, default_time_grid(ops, c.stop_ratio));
    s.meta["fluid_area"] = disc.fluid_area();
    s.meta["h"] = g.h;
    s.meta["mu"] = c.mu;
    s.meta["stop_ratio"] = c.stop_ratio;
    s.meta["decay_abscissa"] = spec.decay_abscissa();
    s.meta["conserved_modes"] = spec.n_conserved;
    timings["samples"] = sw.lap();

    const fs::path &out = c.out_dir;
    json mesh = mesh_to_json(g, disc.mesh);
    write_json(out / "mesh.json", mesh);
    if (opt.mesh_out) write_json(*opt.mesh_out, mesh);
    write_json(out / "effective_tensor.json",
               json{{"kind", "effective_tensor"},
                    {"A_h", tensor_to_json(ah)},
                    {"A_h_energy", tensor_to_json(ae)},
                    {"flux_energy_difference", number((ah.matrix() - ae.matrix()).norm() / ah.norm())},
                    {"symmetry_defect", number(ah.symmetry_defect())},
                    {"min_eigenvalue", number(min_sym_eigenvalue(ah, 1e-8))}});
    write_json(out / "kernel_samples.json", samples_to_json(s));
    write_json(out / "R_table.json", R_table_to_json(s.t, s.R));
    write_json(out / "manifest.json",
               json{{"kind", "run_manifest"},
                    {"command", "cell"},
                    {"versions", versions_json()},
                    {"config", config_to_json(c)},
                    {"mesh_stats", mesh_stats_json(mesh_stats(disc))},
                    {"timings_s", timings},
                    {"files", {"mesh.json", "effective_tensor.json", "kernel_samples.json", "R_table.json"}}});
    log << "cell: " << s.t.size() << " kernel samples, h_dim " << disc.h_dim() << ", A_h min eigenvalue "
        << min_sym_eigenvalue(ah, 1e-8) << "\n";
    return ExitOk;
}

int cmd_kernel(const RunConfig &c, std::ostream &log) {
    validate(c);
    const fs::path &out = c.out_dir;
    auto xi = passivity_xi_set(c.random_xi, c.seed);
    PronyKernel kernel;
    DecayFit fit;
    PassivityReport rep;
    if (c.kernel_source == "closed_form") {
        PrexKernel p = prex_kernel(c.closed_form_A_h, c.closed_form_B, c.closed_form_gamma);
        kernel = p.kernel;
        fit = fit_exponential(sample_prony(kernel));
        rep = certify_passivity(p.kernel.A_h, [&](cdouble z) { return p.LS(z); }, c.passivity_grid(), xi);
    } else {
        MemoryKernelSamples s = samples_from_json(read_json(require(out / "kernel_samples.json")));
        fit = fit_exponential(s);
        kernel = fit_prony(s, c.prony_terms);
        rep = certify_passivity(s.A_h, [&](cdouble z) { return laplace_of_samples(s, z, fit); }, c.passivity_grid(), xi);
    }
    write_json(out / "prony_kernel.json", prony_to_json(kernel));
    write_json(out / "decay_fit.json", decay_fit_to_json(fit));
    json pj = passivity_to_json(rep, static_cast<int>(xi.size()));
    pj["source"] = c.kernel_source;
    write_json(out / "passivity.json", pj);
    write_text(out / "passivity.csv", passivity_csv(rep));
    log << "kernel: " << kernel.terms.size() << " terms, fit residual " << kernel.residual << ", passivity c = " << rep.c
        << (rep.pass ? " (pass)" : " (FAIL)") << "\n";
    return rep.pass ? ExitOk : ExitCheck;
}

int cmd_macro(const RunConfig &c, std::ostream &log) {
    validate(c);
    const fs::path &out = c.out_dir;
    MacroSpec spec;
    spec.dim = c.macro_dim;
    spec.lx = c.lx;
    spec.ly = c.ly;
    spec.nx = c.nx;
    spec.ny = c.ny;
    spec.rho_s = c.rho_s;
    spec.rho_l = c.rho_l;
    spec.fluid_fraction = c.fluid_fraction ? *c.fluid_fraction : inclusion_area(c.geometry());
    spec.kernel = prony_from_json(read_json(require(out / "prony_kernel.json")));
    spec.A_h = spec.kernel.A_h;
    spec.well_prepared = c.well_prepared;
    if (!c.well_prepared) R_table_from_json(read_json(require(out / "R_table.json")), spec.R_t, spec.R_table);
    spec.u0 = make_field(c.u0, c.macro_dim, c.lx, c.ly, "u0");
    spec.u1 = make_field(c.u1, c.macro_dim, c.lx, c.ly, "u1");
    spec.v0 = make_field(c.v0, c.macro_dim, c.lx, c.ly, "v0");
    spec.f = make_force(c.force, c.macro_dim, c.lx, c.ly);
    MacroProblem p = build_macro_problem(spec);
    MacroRun r = run(p, c.t_final, c.dt, c.store_every);
    write_text(out / "trajectory.csv", trajectory_csv(p, r.t, r.u));
    write_text(out / "energy.csv", energy_csv(r.energy));
    double umax = 0.0;
    for (const auto &u : r.u) umax = std::max(umax, u.size() ? u.cwiseAbs().maxCoeff() : 0.0);
    const EnergyRow &last = r.energy.back();
    write_json(out / "macro_summary.json",
               json{{"kind", "macro_summary"},
                    {"steps", static_cast<int>(r.energy.size()) - 1},
                    {"t_final", last.t},
                    {"final_energy", number(last.total)},
                    {"initial_energy", number(r.energy.front().total)},
                    {"max_displacement", number(umax)},
                    {"balance_residual", number(r.balance_residual)},
                    {"max_increase", number(r.max_increase)},
                    {"rho_eff", p.rho_eff},
                    {"kernel_terms", p.kernel.terms.size()}});
    log << "macro: t = " << last.t << ", final energy " << last.total << ", max |u| " << umax << "\n";
    return ExitOk;
}

int cmd_verify(const RunConfig &c, const std::string &only, std::ostream &log) {
    validate(c);
    VerifyReport r = run_verification(c, only);
    write_json(c.out_dir / "verification.json", r.to_json());
    int failed = 0;
    for (const auto &k : r.checks)
        if (!k.passed) {
            ++failed;
            log << "FAIL " << k.group << "." << k.name << ": value " << k.value << ", threshold " << k.threshold
                << (k.detail.empty() ? "" : " (" + k.detail + ")") << "\n";
        }
    log << "verify: " << r.checks.size() - failed << "/" << r.checks.size() << " checks passed\n";
    return r.all_passed() ? ExitOk : ExitCheck;
}

int cmd_export(const RunConfig &c, std::ostream &log) {
    const fs::path &out = c.out_dir;
    int written = 0;
    if (fs::exists(out / "kernel_samples.json")) {
        MemoryKernelSamples s = samples_from_json(read_json(out / "kernel_samples.json"));
        write_text(out / "kernel_samples.csv", samples_csv(s.t, s.S, "S"));
        ++written;
    }
    if (fs::exists(out / "R_table.json")) {
        std::vector<double> t;
        std::vector<Tensor4> R;
        R_table_from_json(read_json(out / "R_table.json"), t, R);
        write_text(out / "R_table.csv", samples_csv(t, R, "R"));
        ++written;
    }
    if (fs::exists(out / "prony_kernel.json")) {
        write_text(out / "prony_kernel.csv", prony_csv(prony_from_json(read_json(out / "prony_kernel.json"))));
        ++written;
    }
    if (written == 0) throw Error(ErrorKind::Input, "nothing to export in " + out.string());
    log << "export: " << written << " CSV files in " << out.string() << "\n";
    return ExitOk;
}

} // namespace homog
