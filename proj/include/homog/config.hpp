////////////////////////////////////////////////////////////////////////////////
// config.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Run configuration: one JSON file with a section per stage. Unknown keys and
//  non-physical values are rejected before any computation (ErrorKind::Input).
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/cell_fem.hpp"
#include "homog/macro_solver.hpp"
#include "homog/tensor_core.hpp"

namespace homog {

// Scalar field or force description from the macro section.
struct FieldSpec {
    std::string type = "zero";       // zero | sine | constant | pulse
    double amplitude = 1.0;
    std::vector<int> mode{1, 1};     // sine: half-wave numbers along x, y
    int component = 0;
    std::vector<double> value;       // constant
    std::vector<double> center;      // pulse
    double width = 0.1;              // pulse
    double duration = 0.0;           // pulse: active for t < duration
    double frequency = 0.0;          // sine force: amplitude * sin(frequency t) * shape
};

struct RunConfig {
    // cell
    double radius = 0.25;
    std::vector<Vec2> polygon;
    double h = 0.05;
    double lambda_s = 1.0, mu_s = 1.0;
    std::optional<Tensor4> A;        // full solid tensor, overrides lambda_s, mu_s
    double mu = 1.0;                 // fluid viscosity
    double rho_s = 1.0, rho_l = 1.0;

    // kernel
    std::string kernel_source = "cell";  // cell | closed_form
    double stop_ratio = 1e-8;
    int prony_terms = 4;
    Tensor4 closed_form_A_h = Tensor4::identity(2) * 2.0;
    Tensor4 closed_form_B = Tensor4::identity(2);
    double closed_form_gamma = 1.0;

    // passivity
    double re_min = 1e-2, re_max = 10.0;
    int re_count = 7;
    std::vector<double> im_values{0.0, 0.5, -0.5, 2.0, -2.0, 10.0, -10.0, 50.0, -50.0};
    int random_xi = 20;

    // macro
    int macro_dim = 1;
    double lx = 1.0, ly = 1.0;
    int nx = 32, ny = 16;
    double dt = 0.01, t_final = 5.0;
    int store_every = 10;
    std::optional<double> fluid_fraction;  // defaults to the cell's fluid area
    bool well_prepared = true;
    FieldSpec u0, u1, v0, force;

    // verification
    double coercivity_golden = 0.0;  // 0 disables the rerun comparison

    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 1;

    CellGeometry geometry() const;
    Tensor4 solid_tensor() const;
    std::vector<cdouble> passivity_grid() const;
};

RunConfig config_from_json(const nlohmann::json &j);
nlohmann::json config_to_json(const RunConfig &c);
// Missing path means defaults. Throws Input on unreadable or invalid files.
RunConfig load_config(const std::optional<std::filesystem::path> &path);
// Throws Input naming the first offending field.
void validate(const RunConfig &c);

FieldFn make_field(const FieldSpec &s, int dim, double lx, double ly, const char *name);
ForceFn make_force(const FieldSpec &s, int dim, double lx, double ly);

} // namespace homog
