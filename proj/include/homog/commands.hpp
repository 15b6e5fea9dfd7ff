////////////////////////////////////////////////////////////////////////////////
// commands.hpp
////////////////////////////////////////////////////////////////////////////////
/*! @file
//  Pipeline stages behind the `homog` subcommands. Each returns the process
//  exit code; errors propagate as homog::Error and are mapped by exit_code_for.
*/
////////////////////////////////////////////////////////////////////////////////
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "homog/config.hpp"
#include "homog/errors.hpp"

namespace homog {

enum ExitCode : int { ExitOk = 0, ExitFailure = 1, ExitInput = 2, ExitCheck = 3 };

struct CellOptions {
    std::optional<std::filesystem::path> mesh_in, mesh_out;
};

// mesh.json, effective_tensor.json, kernel_samples.json, R_table.json, manifest.json
int cmd_cell(const RunConfig &c, const CellOptions &opt, std::ostream &log);
// prony_kernel.json, passivity.json, passivity.csv, decay_fit.json; 3 when passivity fails
int cmd_kernel(const RunConfig &c, std::ostream &log);
// trajectory.csv, energy.csv, macro_summary.json
int cmd_macro(const RunConfig &c, std::ostream &log);
// verification.json; 3 when any check fails
int cmd_verify(const RunConfig &c, const std::string &only, std::ostream &log);
// CSV copies of whichever JSON artifacts exist
int cmd_export(const RunConfig &c, std::ostream &log);

int exit_code_for(ErrorKind kind);

} // namespace homog
