// homog: cell -> kernel -> macro -> verify pipeline driver.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "homog/commands.hpp"
#include "homog/config.hpp"

namespace {

int report_error(const std::string &command, const std::string &kind, const std::string &message, int code) {
    nlohmann::json j{{"error", {{"command", command}, {"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << j.dump() << "\n";
    return code;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Homogenized fluid-filled elastic media: cell problems, memory kernels, macro dynamics"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, out_dir, mesh_in, mesh_out, only;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", seed, "random seed (overrides seed)");

    auto *cell = app.add_subcommand("cell", "mesh the cell, compute A_h, kernel samples and the R table");
    cell->add_option("--mesh-in", mesh_in, "reuse a mesh JSON instead of generating one");
    cell->add_option("--mesh-out", mesh_out, "also write the mesh JSON here");
    app.add_subcommand("kernel", "fit the Prony kernel, decay rate and passivity report");
    app.add_subcommand("macro", "integrate the macroscopic memory equation");
    auto *verify = app.add_subcommand("verify", "run the invariant suite");
    verify->add_option("--only", only, "run a single check group");
    app.add_subcommand("export", "write CSV copies of the JSON artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : homog::ExitInput;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        homog::RunConfig cfg =
            homog::load_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path));
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (app.count("--seed")) cfg.seed = seed;

        if (command == "cell") {
            homog::CellOptions opt;
            if (!mesh_in.empty()) opt.mesh_in = mesh_in;
            if (!mesh_out.empty()) opt.mesh_out = mesh_out;
            return homog::cmd_cell(cfg, opt, std::cout);
        }
        if (command == "kernel") return homog::cmd_kernel(cfg, std::cout);
        if (command == "macro") return homog::cmd_macro(cfg, std::cout);
        if (command == "verify") return homog::cmd_verify(cfg, only, std::cout);
        return homog::cmd_export(cfg, std::cout);
    } catch (const homog::Error &e) {
        return report_error(command, e.kind_name(), e.what(), homog::exit_code_for(e.kind()));
    } catch (const std::exception &e) {
        return report_error(command, "internal", e.what(), homog::ExitFailure);
    }
}
