////////////////////////////////////////////////////////////////////////////////
// io.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  JSON and CSV serialization of the pipeline artifacts. JSON output is
//  canonical: keys sorted, two-space indent, numbers in shortest round-trip
//  form, non-finite numbers written as null. Schemas are in docs/formats.md.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/cell_fem.hpp"
#include "homog/cell_operators.hpp"
#include "homog/kernel_analysis.hpp"
#include "homog/macro_solver.hpp"
#include "homog/tensor_core.hpp"

namespace homog {

using json = nlohmann::json;

std::string canonical_dump(const json &j);
void write_text(const std::filesystem::path &path, const std::string &text);
void write_json(const std::filesystem::path &path, const json &j);
// Throws Input for a missing or malformed file.
json read_json(const std::filesystem::path &path);

// Number formatting shared by all CSV files.
std::string csv_number(double x);

// --- elementary values -----------------------------------------------------------

json number(double x);  // null when not finite
json tensor_to_json(const Tensor4 &t);
Tensor4 tensor_from_json(const json &j);
json ctensor_to_json(const CTensor4 &t);
json vector_to_json(const Eigen::VectorXd &v);

// --- artifacts -------------------------------------------------------------------

json mesh_to_json(const CellGeometry &g, const CellMesh &m);
CellMesh mesh_from_json(const json &j, CellGeometry &g);

json samples_to_json(const MemoryKernelSamples &s);
MemoryKernelSamples samples_from_json(const json &j);
json R_table_to_json(const std::vector<double> &t, const std::vector<Tensor4> &R);
void R_table_from_json(const json &j, std::vector<double> &t, std::vector<Tensor4> &R);

json prony_to_json(const PronyKernel &k);
PronyKernel prony_from_json(const json &j);

json decay_fit_to_json(const DecayFit &f);
json passivity_to_json(const PassivityReport &r, int n_xi);

// --- CSV ---------------------------------------------------------------------------

// t followed by the upper triangle of the packed matrix, row by row.
std::string samples_csv(const std::vector<double> &t, const std::vector<Tensor4> &S, const std::string &prefix);
// One row per z: minimum of each margin over the xi set.
std::string passivity_csv(const PassivityReport &r);
std::string prony_csv(const PronyKernel &k);
// Long format: t, node, x[, y], u[, uy]
std::string trajectory_csv(const MacroProblem &p, const std::vector<double> &t, const std::vector<Eigen::VectorXd> &u);
std::string energy_csv(const std::vector<EnergyRow> &rows);

} // namespace homog
